//! Monte-Carlo power, λ-scan and change-point accuracy estimators.
//!
//! Replicate r samples its data from `derive_seed(seed, r)`. Every arm of a
//! [`power_study`] sees the same data in a replicate, so arms can be compared
//! with paired tests.

use rayon::prelude::*;
use serde::Serialize;

use crate::changepoint::{scan, ScanConfig};
use crate::data::Dataset;
use crate::edgecount::LabelVector;
use crate::graphs::{build_knng, build_krnng, KrnngOptions};
use crate::inference::{test_on_graph, Prepared, TestConfig};
use crate::seed::derive_seed;
use crate::{Error, Result};

use super::perturb::{perturb, HubReference, Perturbation, PerturbationKind};
use super::scenario::{ChangePointSpec, TwoSampleSpec};

pub const MIN_REPS: usize = 50;
/// Largest |τ̂ - τ| counted as an accurate detection.
pub const CP_TOLERANCE: usize = 10;

// stream offsets so data, graph and perturbation seeds never coincide
const GRAPH_STREAM: u64 = 0x0067_7261_7068;
const PERTURB_STREAM: u64 = 0x7065_7274;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub power: f64,
    /// √(p̂(1 - p̂)/reps)
    pub se: f64,
    pub rejections: usize,
    pub reps: usize,
}

impl PowerEstimate {
    pub fn from_outcomes(outcomes: &[bool]) -> PowerEstimate {
        let reps = outcomes.len();
        let rejections = outcomes.iter().filter(|&&r| r).count();
        let power = rejections as f64 / reps.max(1) as f64;
        PowerEstimate {
            power,
            se: (power * (1.0 - power) / reps.max(1) as f64).sqrt(),
            rejections,
            reps,
        }
    }
}

/// One test configuration, optionally applied after a label perturbation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Arm {
    pub config: TestConfig,
    pub perturbation: Option<Perturbation>,
}

impl Arm {
    pub fn new(config: TestConfig) -> Arm {
        Arm {
            config,
            perturbation: None,
        }
    }

    pub fn perturbed(config: TestConfig, p: Perturbation) -> Arm {
        Arm {
            config,
            perturbation: Some(p),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ArmResult {
    pub estimate: PowerEstimate,
    /// Reject decision per replicate.
    pub outcomes: Vec<bool>,
    pub mean_max_degree: f64,
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::InvalidParameter(format!("reps must be at least {MIN_REPS}, got {reps}")));
    }
    Ok(())
}

/// Runs every arm on one replicate; returns (reject, max degree) per arm.
fn replicate(spec: &TwoSampleSpec, arms: &[Arm], seed: u64, r: u64) -> Result<Vec<(bool, usize)>> {
    let ds = spec.sample_pooled(derive_seed(seed, r))?;
    let lv = LabelVector::prefix(spec.m + spec.n, spec.m)?;
    let mut prepared: Option<(crate::data::Metric, Prepared)> = None;
    let mut out = Vec::with_capacity(arms.len());
    for arm in arms {
        let metric = arm.config.metric;
        if prepared.as_ref().is_none_or(|(m, _)| *m != metric) {
            prepared = Some((metric, Prepared::new(&ds, metric)?));
        }
        let prep = &prepared.as_ref().expect("prepared above").1;
        let cfg = TestConfig {
            seed: derive_seed(seed ^ GRAPH_STREAM, r),
            ..arm.config.clone()
        };
        let (g, _) = prep.graph(&cfg)?;
        let labels = match &arm.perturbation {
            Some(p) => {
                let knng;
                let reference = if p.kind == PerturbationKind::Hub && p.hub_reference == HubReference::Knng {
                    knng = build_knng(&prep.ranks, cfg.k)?.0;
                    &knng
                } else {
                    &g
                };
                perturb(&lv, &ds, Some(reference), p, derive_seed(seed ^ PERTURB_STREAM, r))?
            }
            None => lv.clone(),
        };
        let (_, _, p) = test_on_graph(&g, &labels, &cfg)?;
        out.push((p <= cfg.alpha, g.max_degree()));
    }
    Ok(out)
}

/// Paired power study: each replicate draws one dataset and runs every arm on it.
pub fn power_study(spec: &TwoSampleSpec, arms: &[Arm], reps: usize, seed: u64) -> Result<Vec<ArmResult>> {
    check_reps(reps)?;
    spec.validate()?;
    for arm in arms {
        arm.config.validate()?;
    }
    let rows: Vec<Vec<(bool, usize)>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| replicate(spec, arms, seed, r))
        .collect::<Result<_>>()?;
    Ok((0..arms.len())
        .map(|a| {
            let outcomes: Vec<bool> = rows.iter().map(|row| row[a].0).collect();
            let degree_sum: usize = rows.iter().map(|row| row[a].1).sum();
            ArmResult {
                estimate: PowerEstimate::from_outcomes(&outcomes),
                outcomes,
                mean_max_degree: degree_sum as f64 / reps as f64,
            }
        })
        .collect())
}

pub fn estimate_power(
    spec: &TwoSampleSpec,
    cfg: &TestConfig,
    reps: usize,
    perturbation: Option<Perturbation>,
    seed: u64,
) -> Result<PowerEstimate> {
    let arm = Arm {
        config: cfg.clone(),
        perturbation,
    };
    Ok(power_study(spec, &[arm], reps, seed)?.remove(0).estimate)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaRow {
    pub lambda: f64,
    /// Max degree of the K-RNNG; averaged over replicates in a scenario scan.
    pub max_degree: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("λ grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter(format!("λ must be >= 0, got {bad}")));
    }
    Ok(())
}

/// Max degree of the K-RNNG on one dataset for each λ in `grid`.
pub fn lambda_scan(ds: &Dataset, grid: &[f64], k: usize, seed: u64) -> Result<Vec<LambdaRow>> {
    check_grid(grid)?;
    let prep = Prepared::new(ds, crate::data::Metric::Euclidean)?;
    grid.par_iter()
        .map(|&lambda| {
            let opts = KrnngOptions {
                lambda,
                seed,
                ..KrnngOptions::default()
            };
            let out = build_krnng(&prep.ranks, k, &opts)?;
            Ok(LambdaRow {
                lambda,
                max_degree: out.graph.max_degree() as f64,
                power: None,
            })
        })
        .collect()
}

/// Power and mean max degree of GET on the K-RNNG for each λ in `grid`.
pub fn lambda_scan_power(
    spec: &TwoSampleSpec,
    grid: &[f64],
    base: &TestConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<LambdaRow>> {
    check_grid(grid)?;
    let arms: Vec<Arm> = grid
        .iter()
        .map(|&lambda| {
            Arm::new(TestConfig {
                graph: crate::graphs::GraphKind::Krnng,
                lambda,
                ..base.clone()
            })
        })
        .collect();
    let results = power_study(spec, &arms, reps, seed)?;
    Ok(grid
        .iter()
        .zip(results)
        .map(|(&lambda, r)| LambdaRow {
            lambda,
            max_degree: r.mean_max_degree,
            power: Some(r.estimate.power),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChangePointPower {
    /// Fraction of replicates with a significant scan.
    pub power: f64,
    /// Fraction significant with |τ̂ - τ| <= 10.
    pub accuracy: f64,
    pub detections: usize,
    pub accurate: usize,
    pub reps: usize,
}

pub fn cp_power_accuracy(spec: &ChangePointSpec, cfg: &ScanConfig, reps: usize, seed: u64) -> Result<ChangePointPower> {
    check_reps(reps)?;
    spec.validate()?;
    cfg.validate()?;
    let outcomes: Vec<(bool, bool)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let seq = spec.sample_sequence(derive_seed(seed, r))?;
            let rep_cfg = ScanConfig {
                test: TestConfig {
                    seed: derive_seed(seed ^ GRAPH_STREAM, r),
                    ..cfg.test.clone()
                },
                ..cfg.clone()
            };
            let res = scan(&seq, &rep_cfg)?;
            let hit = res.significant && res.tau_hat.abs_diff(spec.tau) <= CP_TOLERANCE;
            Ok((res.significant, hit))
        })
        .collect::<Result<_>>()?;
    let detections = outcomes.iter().filter(|o| o.0).count();
    let accurate = outcomes.iter().filter(|o| o.1).count();
    Ok(ChangePointPower {
        power: detections as f64 / reps as f64,
        accuracy: accurate as f64 / reps as f64,
        detections,
        accurate,
        reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::scenario::{preset, PresetParams, ScenarioSpec};

    fn two(name: &str, p: PresetParams) -> TwoSampleSpec {
        match preset(name, &p).unwrap() {
            ScenarioSpec::TwoSample(s) => s,
            _ => unreachable!(),
        }
    }

    fn small(delta: f64) -> PresetParams {
        PresetParams {
            d: 10,
            m: 30,
            n: 30,
            delta,
            ..PresetParams::default()
        }
    }

    #[test]
    fn reps_floor() {
        let spec = two("power_1", small(0.0));
        assert!(estimate_power(&spec, &TestConfig::knng(5), 10, None, 1).is_err());
    }

    #[test]
    fn saturated_alternative_rejects() {
        let spec = two("power_1", small(20.0));
        let est = estimate_power(&spec, &TestConfig::krnng(5, 0.3), 50, None, 3).unwrap();
        assert!(est.power >= 0.99, "{est:?}");
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let spec = two("power_2", small(1.5));
        let cfg = TestConfig::krnng(3, 0.3);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| power_study(&spec, &[Arm::new(cfg.clone())], 50, 9).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a[0].outcomes, b[0].outcomes);
        assert_eq!(a[0].mean_max_degree, b[0].mean_max_degree);
    }

    #[test]
    fn lambda_zero_row_is_knng_max_degree() {
        let spec = two("null_normal", small(0.0));
        let ds = spec.sample_pooled(4).unwrap();
        let rows = lambda_scan(&ds, &[0.0, 0.5], 5, 4).unwrap();
        let prep = Prepared::new(&ds, crate::data::Metric::Euclidean).unwrap();
        let knng = crate::graphs::build_knng(&prep.ranks, 5).unwrap().0;
        assert_eq!(rows[0].max_degree, knng.max_degree() as f64);
        assert_eq!(lambda_scan(&ds, &[0.1], 5, 4).unwrap().len(), 1);
        assert!(lambda_scan(&ds, &[], 5, 4).is_err());
    }

    #[test]
    fn accuracy_never_exceeds_power() {
        let spec = match preset(
            "cp_1",
            &PresetParams {
                d: 10,
                length: 60,
                tau: 30,
                delta: 3.0,
                ..PresetParams::default()
            },
        )
        .unwrap()
        {
            ScenarioSpec::ChangePoint(s) => s,
            _ => unreachable!(),
        };
        let cfg = ScanConfig {
            test: TestConfig {
                permutations: 99,
                ..TestConfig::krnng(3, 0.3)
            },
            ..ScanConfig::default()
        };
        let res = cp_power_accuracy(&spec, &cfg, 50, 2).unwrap();
        assert!(res.accuracy <= res.power);
        assert!(res.power > 0.8, "{res:?}");
    }
}
