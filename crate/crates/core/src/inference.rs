//! Two-sample test driver, permutation p-values, and the sample-size and λ
//! validity calculators for high-dimensional consistency of GET on the
//! K-RNNG.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{neighbor_ranks, pairwise_distances, Dataset, DistanceMatrix, Metric, RankMatrix};
use crate::edgecount::{
    asymptotic_pvalue, at_least, edge_counts, edge_counts_mask, EdgeCounts, Evaluator, LabelVector,
    MomentInputs, NullMoments, StatisticKind, StatisticValue,
};
use crate::graphs::{build_kmst, build_knng, build_krnng, graph_stats, DirectedGraph, GraphKind, KrnngOptions, KrnngSummary};
use crate::seed::{replicate_rng, DEFAULT_SEED};
use crate::{Error, Result, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMode {
    #[default]
    Asymptotic,
    Permutation,
}

impl std::str::FromStr for PValueMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "asymptotic" => Ok(PValueMode::Asymptotic),
            "permutation" => Ok(PValueMode::Permutation),
            other => Err(Error::InvalidParameter(format!("unknown p-value mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestConfig {
    pub graph: GraphKind,
    pub k: usize,
    pub lambda: f64,
    pub statistic: StatisticKind,
    pub mode: PValueMode,
    pub permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub metric: Metric,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            graph: GraphKind::Krnng,
            k: 5,
            lambda: 0.3,
            statistic: StatisticKind::Get,
            mode: PValueMode::Asymptotic,
            permutations: 1000,
            seed: DEFAULT_SEED,
            alpha: 0.05,
            metric: Metric::Euclidean,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::InvalidParameter("B must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("α must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("λ must be >= 0, got {}", self.lambda)));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        Ok(())
    }

    pub fn knng(k: usize) -> TestConfig {
        TestConfig {
            graph: GraphKind::Knng,
            k,
            lambda: 0.0,
            ..TestConfig::default()
        }
    }

    pub fn krnng(k: usize, lambda: f64) -> TestConfig {
        TestConfig {
            graph: GraphKind::Krnng,
            k,
            lambda,
            ..TestConfig::default()
        }
    }
}

/// Distances and ranks of a pooled sample, shared by every graph built on it.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub distances: DistanceMatrix,
    pub ranks: RankMatrix,
}

impl Prepared {
    pub fn new(ds: &Dataset, metric: Metric) -> Result<Prepared> {
        let distances = pairwise_distances(ds, metric)?;
        let ranks = neighbor_ranks(&distances);
        Ok(Prepared { distances, ranks })
    }

    /// Builds the configured graph. The K-RNNG descent uses `cfg.seed`.
    pub fn graph(&self, cfg: &TestConfig) -> Result<(DirectedGraph, Option<KrnngSummary>)> {
        match cfg.graph {
            GraphKind::Knng => Ok((build_knng(&self.ranks, cfg.k)?.0, None)),
            GraphKind::Kmst => Ok((build_kmst(&self.distances, cfg.k)?, None)),
            GraphKind::Krnng => {
                let opts = KrnngOptions {
                    lambda: cfg.lambda,
                    seed: cfg.seed,
                    ..KrnngOptions::default()
                };
                let out = build_krnng(&self.ranks, cfg.k, &opts)?;
                let summary = out.summary();
                Ok((out.graph, Some(summary)))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphSummary {
    pub kind: GraphKind,
    pub nodes: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub degree_variation: f64,
    pub reciprocal_edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descent: Option<KrnngSummary>,
}

impl GraphSummary {
    pub fn of(g: &DirectedGraph, descent: Option<KrnngSummary>) -> GraphSummary {
        let st = graph_stats(g);
        GraphSummary {
            kind: g.kind(),
            nodes: st.n,
            edges: st.edge_count,
            max_degree: st.max_degree,
            degree_variation: st.degree_variation,
            reciprocal_edges: st.reciprocal_edges,
            descent,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestDiagnostics {
    pub degenerate_covariance: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_validity: Option<LambdaValidity>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TestResult {
    pub schema_version: u32,
    pub statistic: f64,
    pub components: StatisticValue,
    pub counts: EdgeCounts,
    pub pvalue: f64,
    pub reject: bool,
    pub mode: PValueMode,
    pub m: usize,
    pub n: usize,
    pub config: TestConfig,
    pub graph_summary: GraphSummary,
    pub diagnostics: TestDiagnostics,
}

/// Computes the configured statistic and its p-value on a fixed graph.
pub fn test_on_graph(
    g: &DirectedGraph,
    lv: &LabelVector,
    cfg: &TestConfig,
) -> Result<(StatisticValue, EdgeCounts, f64)> {
    let ec = edge_counts(g, lv)?;
    let nm = NullMoments::from_inputs(&MomentInputs::from_graph(g), lv.m())?;
    let ev = Evaluator::new(cfg.statistic, &nm)?;
    let value = ev.evaluate(&ec);
    let p = match cfg.mode {
        PValueMode::Asymptotic => asymptotic_pvalue(&value)?,
        PValueMode::Permutation => {
            permutation_pvalue_with(g.n(), lv.m(), cfg.permutations, cfg.seed, value.value, |mask| {
                ev.value(&edge_counts_mask(g.edges(), mask))
            })
        }
    };
    Ok((value, ec, p))
}

/// Tests a labelled pooled dataset.
pub fn test_pooled(ds: &Dataset, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let labels = ds
        .labels()
        .ok_or_else(|| Error::InvalidParameter("pooled dataset needs sample labels".into()))?;
    let lv = LabelVector::new(labels)?;
    let (m, n) = (lv.m(), lv.n_y());
    if m < 2 || n < 2 {
        return Err(Error::InvalidParameter(format!("need m, n >= 2 (m = {m}, n = {n})")));
    }
    let prepared = Prepared::new(ds, cfg.metric)?;
    let (g, descent) = prepared.graph(cfg)?;
    let (value, counts, pvalue) = test_on_graph(&g, &lv, cfg)?;
    let lambda_validity = (cfg.graph == GraphKind::Krnng).then(|| lambda_validity(m + n, cfg.k, cfg.lambda, m, n));
    Ok(TestResult {
        schema_version: SCHEMA_VERSION,
        statistic: value.value,
        components: value,
        counts,
        pvalue,
        reject: pvalue <= cfg.alpha,
        mode: cfg.mode,
        m,
        n,
        config: cfg.clone(),
        graph_summary: GraphSummary::of(&g, descent),
        diagnostics: TestDiagnostics {
            degenerate_covariance: false,
            lambda_validity,
        },
    })
}

/// Pools `x` and `y`, builds the configured graph and tests for a difference.
pub fn two_sample_test(x: &Dataset, y: &Dataset, cfg: &TestConfig) -> Result<TestResult> {
    test_pooled(&Dataset::pool(x, y)?, cfg)
}

/// Permutation p-value with the graph held fixed and labels resampled.
///
/// Replicate b draws its assignment of the m sample-X nodes from a stream
/// seeded by (seed, b), so the result does not depend on thread scheduling.
pub fn permutation_pvalue(
    g: &DirectedGraph,
    lv: &LabelVector,
    kind: StatisticKind,
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::InvalidParameter("B must be at least 1".into()));
    }
    let nm = NullMoments::from_inputs(&MomentInputs::from_graph(g), lv.m())?;
    let ev = Evaluator::new(kind, &nm)?;
    let observed = ev.value(&edge_counts(g, lv)?);
    Ok(permutation_pvalue_with(g.n(), lv.m(), permutations, seed, observed, |mask| {
        ev.value(&edge_counts_mask(g.edges(), mask))
    }))
}

/// (1 + #{stat_b >= observed}) / (B + 1) over B uniform m-subsets of N nodes.
pub fn permutation_pvalue_with<F>(n: usize, m: usize, permutations: usize, seed: u64, observed: f64, stat: F) -> f64
where
    F: Fn(&[bool]) -> f64 + Sync,
{
    let exceed: usize = (0..permutations)
        .into_par_iter()
        .map_init(
            || vec![false; n],
            |mask, b| {
                let mut rng = replicate_rng(seed, b as u64);
                mask.iter_mut().for_each(|x| *x = false);
                for i in index::sample(&mut rng, n, m) {
                    mask[i] = true;
                }
                usize::from(at_least(stat(mask), observed))
            },
        )
        .sum();
    (1 + exceed) as f64 / (permutations + 1) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaValidity {
    /// (√(8NK + 4N - 8K) - √(8NK))² / 16; `None` when the root difference is not positive.
    pub lambda_upper_bound: Option<f64>,
    pub lambda_ok: bool,
    /// K + 2λ + √(8λKN)
    pub min_size_bound: f64,
    pub min_size_ok: bool,
    pub valid: bool,
}

fn lambda_upper_bound(n: f64, k: f64) -> Option<f64> {
    let diff = (8.0 * n * k + 4.0 * n - 8.0 * k).max(0.0).sqrt() - (8.0 * n * k).sqrt();
    (diff > 0.0).then(|| diff * diff / 16.0)
}

fn min_size_bound(n: f64, k: f64, lambda: f64) -> f64 {
    k + 2.0 * lambda + (8.0 * lambda * k * n).sqrt()
}

/// Checks 0 < λ < (√(8NK+4N-8K) - √(8NK))²/16 and min{m, n} > K + 2λ + √(8λKN).
pub fn lambda_validity(total: usize, k: usize, lambda: f64, m: usize, n: usize) -> LambdaValidity {
    let (nf, kf) = (total as f64, k as f64);
    let ub = lambda_upper_bound(nf, kf);
    let lambda_ok = lambda > 0.0 && ub.is_some_and(|b| lambda < b);
    let msb = min_size_bound(nf, kf, lambda);
    let min_size_ok = (m.min(n) as f64) > msb;
    LambdaValidity {
        lambda_upper_bound: ub,
        lambda_ok,
        min_size_bound: msb,
        min_size_ok,
        valid: lambda_ok && min_size_ok,
    }
}

/// Large-dimension moments of the two distributions, when known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleParameters {
    /// lim E‖X - EX‖² / d
    pub sigma1_sq: f64,
    /// lim E‖Y - EY‖² / d
    pub sigma2_sq: f64,
    /// lim ‖EX - EY‖² / d
    pub v_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSizeReport {
    /// χ²₂ upper-α quantile, -2 ln α.
    pub xi: f64,
    pub ratio_m_over_n: f64,
    pub lambda_bound_n: u64,
    pub min_size_n: u64,
    /// Scale-dominated-by-location case.
    pub case1_n: Option<u64>,
    /// Sample X more dispersed.
    pub case2_n: Option<u64>,
    /// Sample Y more dispersed.
    pub case3_n: Option<u64>,
    pub required_n: u64,
    pub binding: String,
}

const SEARCH_LIMIT: u64 = 100_000_000;

fn first_n(pred: impl Fn(f64) -> bool) -> Result<u64> {
    (1..=SEARCH_LIMIT)
        .find(|&n| pred(n as f64))
        .ok_or_else(|| Error::InvalidParameter(format!("no N <= {SEARCH_LIMIT} satisfies the condition")))
}

/// Minimal N strictly above `bound`.
fn above(bound: f64) -> u64 {
    if bound < 0.0 {
        1
    } else {
        bound.floor() as u64 + 1
    }
}

/// Threshold of the dispersion case where the sample with size share `r`
/// (relative to the other) is the more dispersed one.
fn dispersion_case(k: f64, lambda: f64, xi: f64, r: f64) -> Option<f64> {
    let inner = k / lambda + 2.0 * r * k / xi * (1.0 + k / (2.0 * lambda) + r * k / xi - k);
    if inner < 0.0 {
        return None;
    }
    let root = (k / lambda).sqrt() + inner.sqrt();
    Some(xi * xi / (2.0 * r * r * k * k) * root * root)
}

/// Minimal total sample size for GET on the K-RNNG to be consistent as the
/// dimension grows.
///
/// `ratio` is m/n. Without `scales` every dispersion case is evaluated and the
/// largest requirement wins; with `scales` only the case they select counts.
pub fn consistency_sample_size(
    k: usize,
    lambda: f64,
    alpha: f64,
    ratio: f64,
    scales: Option<ScaleParameters>,
) -> Result<SampleSizeReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("infeasible: λ must be > 0, got {lambda}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("α must lie in (0, 1), got {alpha}")));
    }
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::InvalidParameter(format!("ratio m/n must be > 0, got {ratio}")));
    }
    let kf = k as f64;
    let xi = -2.0 * alpha.ln();
    let small_share = ratio.min(1.0) / (1.0 + ratio);

    let lambda_bound_n = first_n(|n| lambda_upper_bound(n, kf).is_some_and(|b| lambda < b))?;
    let min_size_n = first_n(|n| small_share * n > min_size_bound(n, kf, lambda))?;

    let case1 = above(2.5 + xi / kf + (0.25 + 3.0 * xi / kf + xi * xi / (kf * kf)).sqrt());
    let case2 = dispersion_case(kf, lambda, xi, ratio).map(above);
    let case3 = dispersion_case(kf, lambda, xi, 1.0 / ratio).map(above);

    let (use1, use2, use3) = match scales {
        None => (true, true, true),
        Some(s) => {
            let gap = s.sigma1_sq - s.sigma2_sq;
            if gap.abs() < s.v_sq {
                (true, false, false)
            } else if gap > s.v_sq {
                (false, true, false)
            } else if -gap > s.v_sq {
                (false, false, true)
            } else {
                return Err(Error::InvalidParameter(
                    "infeasible: scale parameters sit on a case boundary".into(),
                ));
            }
        }
    };
    let mut candidates = vec![("lambda_upper_bound", Some(lambda_bound_n)), ("min_sample_size", Some(min_size_n))];
    if use1 {
        candidates.push(("case1_location", Some(case1)));
    }
    if use2 {
        candidates.push(("case2_x_dispersed", case2));
    }
    if use3 {
        candidates.push(("case3_y_dispersed", case3));
    }
    if candidates.iter().any(|(_, v)| v.is_none()) {
        return Err(Error::InvalidParameter(
            "infeasible: a dispersion case has no real threshold for these parameters".into(),
        ));
    }
    let mut binding = "";
    let mut required = 0;
    for (name, v) in &candidates {
        let v = v.unwrap_or_default();
        if v > required {
            required = v;
            binding = name;
        }
    }
    Ok(SampleSizeReport {
        xi,
        ratio_m_over_n: ratio,
        lambda_bound_n,
        min_size_n,
        case1_n: use1.then_some(case1),
        case2_n: if use2 { case2 } else { None },
        case3_n: if use3 { case3 } else { None },
        required_n: required,
        binding: binding.to_string(),
    })
}
