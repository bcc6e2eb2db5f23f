//! Within-sample edge counts and their permutation-null standardization.
//!
//! Under the permutation null every choice of the m sample-X nodes among N
//! is equally likely. The first two moments of (R1, R2) follow from
//! classifying ordered pairs of edges (e, f) by how many nodes they share:
//!
//! | class            | count                                  | nodes |
//! |------------------|----------------------------------------|-------|
//! | e = f            | \|G\|                                  | 2     |
//! | f reverses e     | N₀                                     | 2     |
//! | one shared node  | C₁ = Σ\|G_i\|² - 2\|G\| - 2N₀           | 3     |
//! | disjoint         | \|G\|² - \|G\| - N₀ - C₁                | 4     |
//!
//! A pair spanning k distinct nodes lies entirely in sample X with
//! probability p_k = m(m-1)…(m-k+1) / (N(N-1)…(N-k+1)). Only disjoint pairs
//! can place one edge in each sample.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Sample;
use crate::graphs::DirectedGraph;
use crate::{Error, Result};

/// Per-node sample membership with both samples non-empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    in_x: Vec<bool>,
    m: usize,
}

impl LabelVector {
    pub fn new(labels: &[Sample]) -> Result<LabelVector> {
        LabelVector::from_mask(labels.iter().map(|&s| s == Sample::X).collect())
    }

    /// `in_x[i]` is true when node i belongs to sample X (label 1).
    pub fn from_mask(in_x: Vec<bool>) -> Result<LabelVector> {
        let m = in_x.iter().filter(|&&b| b).count();
        if m == 0 || m == in_x.len() {
            return Err(Error::InvalidParameter(format!(
                "both samples must be non-empty (m = {m}, N = {})",
                in_x.len()
            )));
        }
        Ok(LabelVector { in_x, m })
    }

    /// Nodes listed in `x` (0-based) form sample X.
    pub fn from_x_indices(n: usize, x: &[usize]) -> Result<LabelVector> {
        let mut mask = vec![false; n];
        for &i in x {
            if i >= n {
                return Err(Error::InvalidParameter(format!("node {i} out of range")));
            }
            mask[i] = true;
        }
        LabelVector::from_mask(mask)
    }

    /// First `m` nodes in sample X, the rest in Y.
    pub fn prefix(n: usize, m: usize) -> Result<LabelVector> {
        LabelVector::from_mask((0..n).map(|i| i < m).collect())
    }

    pub fn len(&self) -> usize {
        self.in_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_x.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_y(&self) -> usize {
        self.in_x.len() - self.m
    }

    pub fn is_x(&self, i: usize) -> bool {
        self.in_x[i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.in_x
    }

    /// Same split with the two samples exchanged.
    pub fn swapped(&self) -> LabelVector {
        LabelVector {
            in_x: self.in_x.iter().map(|b| !b).collect(),
            m: self.n_y(),
        }
    }

    pub fn flip(&mut self, i: usize) {
        if self.in_x[i] {
            self.m -= 1;
        } else {
            self.m += 1;
        }
        self.in_x[i] = !self.in_x[i];
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeCounts {
    /// Edges with both ends in sample X.
    pub r1: u64,
    /// Edges with both ends in sample Y.
    pub r2: u64,
    /// Between-sample edges.
    pub rb: u64,
}

pub fn edge_counts(g: &DirectedGraph, lv: &LabelVector) -> Result<EdgeCounts> {
    if lv.len() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} nodes",
            lv.len(),
            g.n()
        )));
    }
    Ok(edge_counts_mask(g.edges(), lv.mask()))
}

pub(crate) fn edge_counts_mask(edges: &[(usize, usize)], in_x: &[bool]) -> EdgeCounts {
    let (mut r1, mut r2) = (0, 0);
    for &(i, j) in edges {
        match (in_x[i], in_x[j]) {
            (true, true) => r1 += 1,
            (false, false) => r2 += 1,
            _ => {}
        }
    }
    EdgeCounts {
        r1,
        r2,
        rb: edges.len() as u64 - r1 - r2,
    }
}

/// Graph quantities the null moments depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MomentInputs {
    pub n: usize,
    pub edges: u64,
    pub reciprocal: u64,
    pub sum_degree_sq: u64,
}

impl MomentInputs {
    pub fn from_graph(g: &DirectedGraph) -> MomentInputs {
        let st = crate::graphs::graph_stats(g);
        MomentInputs {
            n: st.n,
            edges: st.edge_count as u64,
            reciprocal: st.reciprocal_edges as u64,
            sum_degree_sq: st.sum_degree_sq,
        }
    }

    /// Ordered edge pairs sharing exactly one node.
    fn one_shared(&self) -> f64 {
        self.sum_degree_sq as f64 - 2.0 * self.edges as f64 - 2.0 * self.reciprocal as f64
    }

    /// Ordered edge pairs with four distinct nodes.
    fn disjoint(&self) -> f64 {
        let g = self.edges as f64;
        g * g - g - self.reciprocal as f64 - self.one_shared()
    }
}

/// Exact permutation-null moments of (R1, R2) and of the derived counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NullMoments {
    pub m: usize,
    pub n: usize,
    pub edges: u64,
    pub mean_r1: f64,
    pub mean_r2: f64,
    pub var_r1: f64,
    pub var_r2: f64,
    pub cov_r1_r2: f64,
}

/// P(k given distinct nodes all fall in a sample of size `size` out of `total`).
fn all_in(size: usize, total: usize, k: usize) -> f64 {
    if k > size {
        return 0.0;
    }
    (0..k).map(|t| (size - t) as f64 / (total - t) as f64).product()
}

impl NullMoments {
    pub fn from_inputs(inputs: &MomentInputs, m: usize) -> Result<NullMoments> {
        let total = inputs.n;
        if m == 0 || m >= total {
            return Err(Error::InvalidParameter(format!(
                "sample size m = {m} must satisfy 1 <= m <= N - 1 (N = {total})"
            )));
        }
        let n = total - m;
        let g = inputs.edges as f64;
        let pairs2 = g + inputs.reciprocal as f64;
        let shared = inputs.one_shared();
        let disjoint = inputs.disjoint();

        let second = |s: usize| {
            pairs2 * all_in(s, total, 2) + shared * all_in(s, total, 3) + disjoint * all_in(s, total, 4)
        };
        let mean_r1 = g * all_in(m, total, 2);
        let mean_r2 = g * all_in(n, total, 2);
        let split = if m >= 2 && n >= 2 {
            (m * (m - 1)) as f64 * (n * (n - 1)) as f64
                / (total as f64 * (total - 1) as f64 * (total - 2) as f64 * (total - 3) as f64)
        } else {
            0.0
        };
        Ok(NullMoments {
            m,
            n,
            edges: inputs.edges,
            mean_r1,
            mean_r2,
            var_r1: second(m) - mean_r1 * mean_r1,
            var_r2: second(n) - mean_r2 * mean_r2,
            cov_r1_r2: disjoint * split - mean_r1 * mean_r2,
        })
    }

    /// Weights (a, b) of R_w = a·R1 + b·R2 = ((n-1)R1 + (m-1)R2)/(N-2).
    pub fn weights(&self) -> (f64, f64) {
        let denom = (self.m + self.n) as f64 - 2.0;
        ((self.n as f64 - 1.0) / denom, (self.m as f64 - 1.0) / denom)
    }

    pub fn mean_rw(&self) -> f64 {
        let (a, b) = self.weights();
        a * self.mean_r1 + b * self.mean_r2
    }

    pub fn var_rw(&self) -> f64 {
        let (a, b) = self.weights();
        a * a * self.var_r1 + b * b * self.var_r2 + 2.0 * a * b * self.cov_r1_r2
    }

    pub fn mean_rd(&self) -> f64 {
        self.mean_r1 - self.mean_r2
    }

    pub fn var_rd(&self) -> f64 {
        self.var_r1 + self.var_r2 - 2.0 * self.cov_r1_r2
    }

    pub fn cov_rw_rd(&self) -> f64 {
        let (a, b) = self.weights();
        a * self.var_r1 - b * self.var_r2 + (b - a) * self.cov_r1_r2
    }

    pub fn mean_rb(&self) -> f64 {
        self.edges as f64 - self.mean_r1 - self.mean_r2
    }

    pub fn var_rb(&self) -> f64 {
        self.var_r1 + self.var_r2 + 2.0 * self.cov_r1_r2
    }

    /// Variances below this are numerically zero.
    fn zero_tol(&self) -> f64 {
        1e-12 * (self.edges as f64).max(1.0).powi(2)
    }
}

pub fn permutation_null_moments(g: &DirectedGraph, m: usize) -> Result<NullMoments> {
    NullMoments::from_inputs(&MomentInputs::from_graph(g), m)
}

/// Exact joint law of (R1, R2) over all C(N, m) label assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct NullDistribution {
    /// Number of assignments producing each (R1, R2).
    pub counts: BTreeMap<(u64, u64), u128>,
    pub total: u128,
}

impl NullDistribution {
    pub fn probability(&self, r1: u64, r2: u64) -> f64 {
        self.counts.get(&(r1, r2)).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    /// (E[R1], E[R2], Var[R1], Var[R2], Cov[R1, R2]) computed from the table.
    pub fn moments(&self) -> (f64, f64, f64, f64, f64) {
        let t = self.total as f64;
        let weighted = |f: &dyn Fn(f64, f64) -> f64| -> f64 {
            self.counts
                .iter()
                .map(|(&(r1, r2), &c)| c as f64 * f(r1 as f64, r2 as f64))
                .sum::<f64>()
                / t
        };
        let e1 = weighted(&|a, _| a);
        let e2 = weighted(&|_, b| b);
        (
            e1,
            e2,
            weighted(&|a, _| (a - e1) * (a - e1)),
            weighted(&|_, b| (b - e2) * (b - e2)),
            weighted(&|a, b| (a - e1) * (b - e2)),
        )
    }

    /// Exact probability that `stat(R1, R2) >= observed`.
    pub fn tail<F: Fn(u64, u64) -> f64>(&self, stat: F, observed: f64) -> f64 {
        let hit: u128 = self
            .counts
            .iter()
            .filter(|(&(r1, r2), _)| at_least(stat(r1, r2), observed))
            .map(|(_, &c)| c)
            .sum();
        hit as f64 / self.total as f64
    }
}

/// `value >= observed` up to floating noise from recomputing the same statistic.
pub(crate) fn at_least(value: f64, observed: f64) -> bool {
    value >= observed - 1e-10 * observed.abs().max(1.0)
}

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Enumerates every assignment of m sample-X nodes. Errors when C(N, m) > cap.
pub fn enumerate_null(g: &DirectedGraph, m: usize, cap: u128) -> Result<NullDistribution> {
    let n = g.n();
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!(
            "sample size m = {m} must satisfy 1 <= m <= N - 1 (N = {n})"
        )));
    }
    let count = binomial(n, m);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }
    let mut counts = BTreeMap::new();
    let mut chosen: Vec<usize> = (0..m).collect();
    let mut mask = vec![false; n];
    loop {
        mask.iter_mut().for_each(|b| *b = false);
        for &c in &chosen {
            mask[c] = true;
        }
        let ec = edge_counts_mask(g.edges(), &mask);
        *counts.entry((ec.r1, ec.r2)).or_insert(0u128) += 1;

        // next combination in lexicographic order
        let mut i = m;
        while i > 0 && chosen[i - 1] == n - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        chosen[i - 1] += 1;
        for j in i..m {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
    Ok(NullDistribution { counts, total: count })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// Generalized edge-count test: χ²₂ quadratic form in (R1, R2).
    #[default]
    Get,
    /// Weighted edge-count test: standardized R_w.
    Wet,
    /// Max-type edge-count test: max(Z_w, |Z_d|).
    Met,
    /// Original edge-count test: sign-flipped standardized between-sample count.
    Oet,
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "get" => Ok(StatisticKind::Get),
            "wet" => Ok(StatisticKind::Wet),
            "met" => Ok(StatisticKind::Met),
            "oet" => Ok(StatisticKind::Oet),
            other => Err(Error::InvalidParameter(format!("unknown statistic {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StatisticValue {
    pub kind: StatisticKind,
    pub value: f64,
    pub z_w: Option<f64>,
    pub z_d: Option<f64>,
}

/// Precomputed standardization for one (graph, m) pair; evaluating a new
/// labelling only needs its edge counts.
#[derive(Clone, Debug)]
pub struct Evaluator {
    kind: StatisticKind,
    nm: NullMoments,
    // inverse covariance of (R1, R2)
    inv: [f64; 3],
    sd_w: f64,
    sd_d: f64,
    sd_b: f64,
}

impl Evaluator {
    pub fn new(kind: StatisticKind, nm: &NullMoments) -> Result<Evaluator> {
        let mut ev = Evaluator {
            kind,
            nm: *nm,
            inv: [0.0; 3],
            sd_w: 0.0,
            sd_d: 0.0,
            sd_b: 0.0,
        };
        let tol = nm.zero_tol();
        match kind {
            StatisticKind::Get => {
                let (v1, v2, c) = (nm.var_r1, nm.var_r2, nm.cov_r1_r2);
                let det = v1 * v2 - c * c;
                if v1 <= tol || v2 <= tol || det <= 1e-12 * v1 * v2 {
                    return Err(Error::DegenerateCovariance(format!(
                        "Var(R1) = {v1:.6e}, Var(R2) = {v2:.6e}, det = {det:.6e}; \
                         equal node degrees make the quadratic form undefined"
                    )));
                }
                ev.inv = [v2 / det, -c / det, v1 / det];
                ev.sd_w = nm.var_rw().sqrt();
                ev.sd_d = nm.var_rd().sqrt();
            }
            StatisticKind::Wet | StatisticKind::Met => {
                let (vw, vd) = (nm.var_rw(), nm.var_rd());
                if vw <= tol || vd <= tol {
                    return Err(Error::ZeroVariance(format!(
                        "Var(R_w) = {vw:.6e}, Var(R_d) = {vd:.6e}"
                    )));
                }
                ev.sd_w = vw.sqrt();
                ev.sd_d = vd.sqrt();
            }
            StatisticKind::Oet => {
                let vb = nm.var_rb();
                if vb <= tol {
                    return Err(Error::ZeroVariance(format!("Var(R_b) = {vb:.6e}")));
                }
                ev.sd_b = vb.sqrt();
            }
        }
        Ok(ev)
    }

    pub fn kind(&self) -> StatisticKind {
        self.kind
    }

    pub fn moments(&self) -> &NullMoments {
        &self.nm
    }

    fn components(&self, ec: &EdgeCounts) -> (f64, f64) {
        let (a, b) = self.nm.weights();
        let rw = a * ec.r1 as f64 + b * ec.r2 as f64;
        let rd = ec.r1 as f64 - ec.r2 as f64;
        (
            (rw - self.nm.mean_rw()) / self.sd_w,
            (rd - self.nm.mean_rd()) / self.sd_d,
        )
    }

    pub fn evaluate(&self, ec: &EdgeCounts) -> StatisticValue {
        let nm = &self.nm;
        let (value, z_w, z_d) = match self.kind {
            StatisticKind::Get => {
                let x = ec.r1 as f64 - nm.mean_r1;
                let y = ec.r2 as f64 - nm.mean_r2;
                let [p, q, r] = self.inv;
                let (zw, zd) = self.components(ec);
                ((p * x * x + 2.0 * q * x * y + r * y * y).max(0.0), Some(zw), Some(zd))
            }
            StatisticKind::Wet => {
                let (zw, zd) = self.components(ec);
                (zw, Some(zw), Some(zd))
            }
            StatisticKind::Met => {
                let (zw, zd) = self.components(ec);
                (zw.max(zd.abs()), Some(zw), Some(zd))
            }
            StatisticKind::Oet => (-(ec.rb as f64 - nm.mean_rb()) / self.sd_b, None, None),
        };
        StatisticValue {
            kind: self.kind,
            value,
            z_w,
            z_d,
        }
    }

    pub fn value(&self, ec: &EdgeCounts) -> f64 {
        self.evaluate(ec).value
    }
}

/// S = vᵀ Σ⁻¹ v with v = (R1 - E[R1], R2 - E[R2]).
pub fn get_statistic(ec: &EdgeCounts, nm: &NullMoments) -> Result<StatisticValue> {
    Ok(Evaluator::new(StatisticKind::Get, nm)?.evaluate(ec))
}

/// Standardized R_w = ((n-1)R1 + (m-1)R2)/(N-2) and R_d = R1 - R2.
pub fn zw_zd(ec: &EdgeCounts, nm: &NullMoments) -> Result<(f64, f64)> {
    let v = Evaluator::new(StatisticKind::Wet, nm)?.evaluate(ec);
    Ok((v.z_w.unwrap_or_default(), v.z_d.unwrap_or_default()))
}

pub fn wet_statistic(ec: &EdgeCounts, nm: &NullMoments) -> Result<StatisticValue> {
    Ok(Evaluator::new(StatisticKind::Wet, nm)?.evaluate(ec))
}

/// M = max(Z_w, |Z_d|); Z_w enters signed.
pub fn met_statistic(ec: &EdgeCounts, nm: &NullMoments) -> Result<StatisticValue> {
    Ok(Evaluator::new(StatisticKind::Met, nm)?.evaluate(ec))
}

/// -(R_b - E[R_b]) / sd(R_b): large when few edges cross between samples.
pub fn oet_statistic(ec: &EdgeCounts, nm: &NullMoments) -> Result<StatisticValue> {
    Ok(Evaluator::new(StatisticKind::Oet, nm)?.evaluate(ec))
}

/// Large-sample p-value of a statistic value.
///
/// GET uses the χ²₂ survival function exp(-S/2); WET and OET use the upper
/// standard-normal tail. MET has no asymptotic p-value here.
pub fn asymptotic_pvalue(v: &StatisticValue) -> Result<f64> {
    match v.kind {
        StatisticKind::Get => Ok(chi2_2_survival(v.value)),
        StatisticKind::Wet | StatisticKind::Oet => {
            let normal = Normal::standard();
            Ok(normal.sf(v.value))
        }
        StatisticKind::Met => Err(Error::Unsupported(
            "MET p-values are only available in permutation mode".into(),
        )),
    }
}

/// P(χ²₂ > s) = exp(-s/2).
pub fn chi2_2_survival(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else {
        (-s / 2.0).exp()
    }
}
