//! Declarative scenario specifications and their samplers.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal,
    /// Componentwise exponential of the normal vector.
    Lognormal,
    /// μ + Z / √(W/ν), Z normal, W ~ χ²_ν.
    StudentT { dof: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MeanRule {
    Zero,
    /// (δ/√d)·1
    OnesOverSqrtD { delta: f64 },
    /// (δ/d)·1
    OnesOverD { delta: f64 },
    /// δ·1
    Ones { delta: f64 },
    /// δ on the first ⌊√d⌋ coordinates.
    FirstSqrtD { delta: f64 },
    /// δ on the first ⌊d^{1/3}⌋ coordinates.
    FirstCbrtD { delta: f64 },
}

impl MeanRule {
    pub fn vector(&self, d: usize) -> Vec<f64> {
        let df = d as f64;
        let head = |k: usize, v: f64| (0..d).map(|i| if i < k { v } else { 0.0 }).collect();
        match *self {
            MeanRule::Zero => vec![0.0; d],
            MeanRule::OnesOverSqrtD { delta } => vec![delta / df.sqrt(); d],
            MeanRule::OnesOverD { delta } => vec![delta / df; d],
            MeanRule::Ones { delta } => vec![delta; d],
            MeanRule::FirstSqrtD { delta } => head(integer_root(d, 2), delta),
            MeanRule::FirstCbrtD { delta } => head(integer_root(d, 3), delta),
        }
    }

    fn delta(&self) -> f64 {
        match *self {
            MeanRule::Zero => 0.0,
            MeanRule::OnesOverSqrtD { delta }
            | MeanRule::OnesOverD { delta }
            | MeanRule::Ones { delta }
            | MeanRule::FirstSqrtD { delta }
            | MeanRule::FirstCbrtD { delta } => delta,
        }
    }
}

/// Largest k with k^p <= d.
fn integer_root(d: usize, p: u32) -> usize {
    let mut k = (d as f64).powf(1.0 / p as f64).round() as usize + 1;
    while k.pow(p) > d {
        k -= 1;
    }
    k
}

/// Covariance rules built from Σ_d(r) = (r^|i-j|).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CovRule {
    Identity,
    /// Σ_d(r)
    Ar1 { r: f64 },
    /// scale·Σ_d(r)
    ScaledAr1 { r: f64, scale: f64 },
    /// Σ_d(r) + c·I
    Ar1PlusDiag { r: f64, c: f64 },
    /// scale·I
    ScaledIdentity { scale: f64 },
}

impl CovRule {
    /// (r, scale, c) with covariance scale·Σ_d(r) + c·I.
    fn parts(&self) -> (f64, f64, f64) {
        match *self {
            CovRule::Identity => (0.0, 1.0, 0.0),
            CovRule::Ar1 { r } => (r, 1.0, 0.0),
            CovRule::ScaledAr1 { r, scale } => (r, scale, 0.0),
            CovRule::Ar1PlusDiag { r, c } => (r, 1.0, c),
            CovRule::ScaledIdentity { scale } => (0.0, scale, 0.0),
        }
    }

    /// Population covariance entry (i, j).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (r, scale, c) = self.parts();
        let lag = i.abs_diff(j) as i32;
        scale * r.powi(lag) + if i == j { c } else { 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    #[serde(flatten)]
    pub family: Family,
    pub mean: MeanRule,
    pub cov: CovRule,
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let (r, scale, c) = self.cov.parts();
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!("AR(1) coefficient must lie in [0, 1), got {r}")));
        }
        if !(scale > 0.0) || !(c >= 0.0) {
            return Err(Error::InvalidParameter("covariance scale must be > 0 and diagonal term >= 0".into()));
        }
        if !(self.mean.delta() >= 0.0) {
            return Err(Error::InvalidParameter("δ must be >= 0".into()));
        }
        if let Family::StudentT { dof } = self.family {
            if !(dof > 0.0) {
                return Err(Error::InvalidParameter(format!("degrees of freedom must be > 0, got {dof}")));
            }
        }
        Ok(())
    }

    /// Draws `rows` observations of dimension `d`, row-major.
    ///
    /// The AR(1) part follows x₁ = z₁, x_i = r·x_{i-1} + √(1-r²)·z_i, which has
    /// covariance exactly Σ_d(r).
    pub fn sample<R: Rng>(&self, d: usize, rows: usize, rng: &mut R) -> Vec<f64> {
        let (r, scale, c) = self.cov.parts();
        let mean = self.mean.vector(d);
        let innov = (1.0 - r * r).sqrt();
        let (s, sc) = (scale.sqrt(), c.sqrt());
        let chi = match self.family {
            Family::StudentT { dof } => Some((dof, ChiSquared::new(dof).expect("validated dof"))),
            _ => None,
        };
        let mut out = Vec::with_capacity(d * rows);
        let mut row = vec![0.0; d];
        for _ in 0..rows {
            let mut prev = 0.0;
            for (i, x) in row.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                prev = if i == 0 { z } else { r * prev + innov * z };
                *x = s * prev;
            }
            if c > 0.0 {
                for x in row.iter_mut() {
                    *x += sc * rng.sample::<f64, _>(StandardNormal);
                }
            }
            if let Some((dof, chi)) = &chi {
                let w: f64 = chi.sample(rng);
                let k = (w / dof).sqrt();
                row.iter_mut().for_each(|x| *x /= k);
            }
            for (x, mu) in row.iter_mut().zip(&mean) {
                *x += mu;
                if self.family == Family::Lognormal {
                    *x = x.exp();
                }
            }
            out.extend_from_slice(&row);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleSpec {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub x: Distribution,
    pub y: Distribution,
}

impl TwoSampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m < 2 || self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need d >= 1 and m, n >= 2 (d = {}, m = {}, n = {})",
                self.d, self.m, self.n
            )));
        }
        self.x.validate()?;
        self.y.validate()
    }

    /// Samples X then Y from one stream and returns the pooled, labelled dataset.
    pub fn sample_pooled(&self, seed: u64) -> Result<Dataset> {
        self.validate()?;
        let mut rng = crate::seed::rng(seed);
        let x = Dataset::from_flat(self.x.sample(self.d, self.m, &mut rng), self.m, self.d)?;
        let y = Dataset::from_flat(self.y.sample(self.d, self.n, &mut rng), self.n, self.d)?;
        Dataset::pool(&x, &y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePointSpec {
    pub d: usize,
    /// Sequence length N.
    pub length: usize,
    /// Observations 1..=τ come from `before`, the rest from `after`.
    pub tau: usize,
    pub before: Distribution,
    pub after: Distribution,
}

impl ChangePointSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.length < 2 || self.tau > self.length {
            return Err(Error::InvalidParameter(format!(
                "need d >= 1, N >= 2 and τ <= N (d = {}, N = {}, τ = {})",
                self.d, self.length, self.tau
            )));
        }
        self.before.validate()?;
        self.after.validate()
    }

    pub fn sample_sequence(&self, seed: u64) -> Result<Dataset> {
        self.validate()?;
        let mut rng = crate::seed::rng(seed);
        let mut values = self.before.sample(self.d, self.tau, &mut rng);
        values.extend(self.after.sample(self.d, self.length - self.tau, &mut rng));
        Dataset::from_flat(values, self.length, self.d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    TwoSample(TwoSampleSpec),
    ChangePoint(ChangePointSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sampled {
    TwoSample { x: Dataset, y: Dataset },
    Sequence(Dataset),
}

pub fn sample_scenario(spec: &ScenarioSpec, seed: u64) -> Result<Sampled> {
    match spec {
        ScenarioSpec::TwoSample(s) => {
            let (x, y) = s.sample_pooled(seed)?.split()?;
            Ok(Sampled::TwoSample { x, y })
        }
        ScenarioSpec::ChangePoint(s) => Ok(Sampled::Sequence(s.sample_sequence(seed)?)),
    }
}

/// Free parameters of a named preset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetParams {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub delta: f64,
    /// Change-point presets: sequence length and true change point.
    pub length: usize,
    pub tau: usize,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            d: 500,
            m: 100,
            n: 100,
            delta: 0.0,
            length: 400,
            tau: 200,
        }
    }
}

/// Name and one-line description of every preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("null_normal", "X, Y ~ N(0, I)"),
    ("intro_normal", "X ~ N(0, Σ(0.5)); Y ~ N(δ/√d·1, Σ(0.5) + δ/√d·I)"),
    ("intro_lognormal", "X ~ LN(0, Σ(0.6)); Y ~ LN(δ on first √d, Σ(0.2))"),
    ("intro_t5", "X ~ t5(0, Σ(0.6)); Y ~ t5(δ on first d^(1/3), Σ(0.6))"),
    ("toy_scale", "X ~ N(0, I); Y ~ N(0, δ·I)"),
    ("toy_fixed_norm", "X ~ N(0, I); Y ~ N(0, σI) with ‖σI - I‖_F = δ, i.e. σ = 1 + δ/√d"),
    ("power_1", "X ~ N(0, Σ(0.5)); Y ~ N(δ/√d·1, Σ(0.5))"),
    ("power_2", "X ~ N(0, Σ(0.5)); Y ~ N(δ/√d·1, Σ(0.5) + δ/√d·I)"),
    ("power_3", "X ~ LN(0, Σ(0.5)); Y ~ LN(δ/√d·1, Σ(0.5))"),
    ("power_4", "X ~ t5(0, Σ(0.5)); Y ~ t5(δ/√d·1, Σ(0.5) + δ/√d·I)"),
    ("lambda_i", "X ~ N(0, Σ(0.5)); Y ~ N(0, δΣ(0.5)); m=200, n=100, d=500, δ=1.03"),
    ("lambda_ii", "X ~ LN(0, Σ(0.5)); Y ~ LN(δ·1, Σ(0.5)); m=100, n=200, d=1000, δ=0.05"),
    ("lambda_iii", "X ~ LN(0, Σ(0.5)); Y ~ LN(0, δΣ(0.5)); m=n=100, d=100, δ=1.15"),
    ("lambda_iv", "X ~ t5(0, Σ(0.5)); Y ~ t5(0, δΣ(0.5)); m=n=100, d=500, δ=1.35"),
    ("lambda_v", "X ~ t5(0, Σ(0.5)); Y ~ t5(δ·1, Σ(0.5)); m=300, n=100, d=500, δ=0.095"),
    ("two_sample_1", "X ~ N(0, Σ(0.5)); Y ~ N(δ/√d·1, Σ(0.5) + δ/√d·I)"),
    ("two_sample_2", "X ~ LN(0, Σ(0.6)); Y ~ LN(δ on first √d, Σ(0.2))"),
    ("two_sample_3", "X ~ t2(0, Σ(0.5)); Y ~ t2(δ/√d·1, Σ(0.5) + δI)"),
    ("two_sample_4", "X ~ t1(0, Σ(0.5)); Y ~ t1(δ/√d·1, Σ(0.5) + δ/2·I)"),
    ("cp_1", "N(0, Σ(0.5)) → N(δ/√d·1, Σ(0.5) + δ/√d·I)"),
    ("cp_2", "N(0, I) → N(0, Σ(δ))"),
    ("cp_3", "t5(0, Σ(0.5)) → t5(δ/d·1, δI + Σ(0.5))"),
];

/// Reference sizes for presets that fix them; other presets keep `base`.
pub fn preset_defaults(name: &str, base: PresetParams) -> PresetParams {
    let with = |d, m, n, delta| PresetParams { d, m, n, delta, ..base };
    match name {
        "lambda_i" => with(500, 200, 100, 1.03),
        "lambda_ii" => with(1000, 100, 200, 0.05),
        "lambda_iii" => with(100, 100, 100, 1.15),
        "lambda_iv" => with(500, 100, 100, 1.35),
        "lambda_v" => with(500, 300, 100, 0.095),
        _ => base,
    }
}

pub fn preset(name: &str, p: &PresetParams) -> Result<ScenarioSpec> {
    use Family::{Lognormal, Normal, StudentT};
    let dist = |family, mean, cov| Distribution { family, mean, cov };
    let sd = p.delta / (p.d as f64).sqrt();
    let ar = |r| CovRule::Ar1 { r };
    let two = |x, y| {
        ScenarioSpec::TwoSample(TwoSampleSpec {
            d: p.d,
            m: p.m,
            n: p.n,
            x,
            y,
        })
    };
    let cp = |before, after| {
        ScenarioSpec::ChangePoint(ChangePointSpec {
            d: p.d,
            length: p.length,
            tau: p.tau,
            before,
            after,
        })
    };
    let zero = MeanRule::Zero;
    let shift = MeanRule::OnesOverSqrtD { delta: p.delta };
    let t = |dof| StudentT { dof };
    let spec = match name {
        "null_normal" => two(dist(Normal, zero, CovRule::Identity), dist(Normal, zero, CovRule::Identity)),
        "intro_normal" | "power_2" | "two_sample_1" => two(
            dist(Normal, zero, ar(0.5)),
            dist(Normal, shift, CovRule::Ar1PlusDiag { r: 0.5, c: sd }),
        ),
        "intro_lognormal" | "two_sample_2" => two(
            dist(Lognormal, zero, ar(0.6)),
            dist(Lognormal, MeanRule::FirstSqrtD { delta: p.delta }, ar(0.2)),
        ),
        "intro_t5" => two(
            dist(t(5.0), zero, ar(0.6)),
            dist(t(5.0), MeanRule::FirstCbrtD { delta: p.delta }, ar(0.6)),
        ),
        "toy_scale" => two(
            dist(Normal, zero, CovRule::Identity),
            dist(Normal, zero, CovRule::ScaledIdentity { scale: p.delta }),
        ),
        "toy_fixed_norm" => two(
            dist(Normal, zero, CovRule::Identity),
            dist(Normal, zero, CovRule::ScaledIdentity { scale: 1.0 + sd }),
        ),
        "power_1" => two(dist(Normal, zero, ar(0.5)), dist(Normal, shift, ar(0.5))),
        "power_3" => two(dist(Lognormal, zero, ar(0.5)), dist(Lognormal, shift, ar(0.5))),
        "power_4" => two(
            dist(t(5.0), zero, ar(0.5)),
            dist(t(5.0), shift, CovRule::Ar1PlusDiag { r: 0.5, c: sd }),
        ),
        "lambda_i" => two(
            dist(Normal, zero, ar(0.5)),
            dist(Normal, zero, CovRule::ScaledAr1 { r: 0.5, scale: p.delta }),
        ),
        "lambda_ii" => two(
            dist(Lognormal, zero, ar(0.5)),
            dist(Lognormal, MeanRule::Ones { delta: p.delta }, ar(0.5)),
        ),
        "lambda_iii" => two(
            dist(Lognormal, zero, ar(0.5)),
            dist(Lognormal, zero, CovRule::ScaledAr1 { r: 0.5, scale: p.delta }),
        ),
        "lambda_iv" => two(
            dist(t(5.0), zero, ar(0.5)),
            dist(t(5.0), zero, CovRule::ScaledAr1 { r: 0.5, scale: p.delta }),
        ),
        "lambda_v" => two(
            dist(t(5.0), zero, ar(0.5)),
            dist(t(5.0), MeanRule::Ones { delta: p.delta }, ar(0.5)),
        ),
        "two_sample_3" => two(
            dist(t(2.0), zero, ar(0.5)),
            dist(t(2.0), shift, CovRule::Ar1PlusDiag { r: 0.5, c: p.delta }),
        ),
        "two_sample_4" => two(
            dist(t(1.0), zero, ar(0.5)),
            dist(t(1.0), shift, CovRule::Ar1PlusDiag { r: 0.5, c: p.delta / 2.0 }),
        ),
        "cp_1" => cp(
            dist(Normal, zero, ar(0.5)),
            dist(Normal, shift, CovRule::Ar1PlusDiag { r: 0.5, c: sd }),
        ),
        "cp_2" => cp(dist(Normal, zero, CovRule::Identity), dist(Normal, zero, ar(p.delta))),
        "cp_3" => cp(
            dist(t(5.0), zero, ar(0.5)),
            dist(t(5.0), MeanRule::OnesOverD { delta: p.delta }, CovRule::Ar1PlusDiag { r: 0.5, c: p.delta }),
        ),
        other => return Err(Error::InvalidParameter(format!("unknown preset {other:?}"))),
    };
    match &spec {
        ScenarioSpec::TwoSample(s) => s.validate()?,
        ScenarioSpec::ChangePoint(s) => s.validate()?,
    }
    Ok(spec)
}
