//! Degree bookkeeping and the graph quantities that govern the χ²₂ limit of
//! the generalized edge-count statistic.

use serde::Serialize;

use super::DirectedGraph;

/// Largest N for which the square count is computed.
pub const DEFAULT_SQUARE_CAP: usize = 400;

#[derive(Clone, Debug, Serialize)]
pub struct GraphStats {
    pub n: usize,
    /// |G|
    pub edge_count: usize,
    /// |G_i|, in plus out.
    pub degrees: Vec<usize>,
    /// d̃_i = |G_i| - 2|G|/N
    pub centered_degrees: Vec<f64>,
    pub sum_degree_sq: u64,
    /// V_G = Σ d̃_i² = Σ|G_i|² - 4|G|²/N
    pub degree_variation: f64,
    /// N₀: edges whose reverse is also present.
    pub reciprocal_edges: usize,
    pub max_degree: usize,
    /// (degree, node count) pairs in increasing degree order.
    pub degree_histogram: Vec<(usize, usize)>,
}

impl GraphStats {
    /// N·V_G as an exact integer.
    pub fn scaled_variation(&self) -> i128 {
        self.n as i128 * self.sum_degree_sq as i128 - 4 * (self.edge_count as i128).pow(2)
    }

    /// Variance of the empirical degree law, V_G / N.
    pub fn degree_variance(&self) -> f64 {
        self.degree_variation / self.n as f64
    }
}

pub fn graph_stats(g: &DirectedGraph) -> GraphStats {
    let n = g.n();
    let degrees = g.degrees();
    let edge_count = g.edge_count();
    let mean = 2.0 * edge_count as f64 / n as f64;
    let centered_degrees: Vec<f64> = degrees.iter().map(|&d| d as f64 - mean).collect();
    let sum_degree_sq = degrees.iter().map(|&d| (d as u64).pow(2)).sum();

    let edge_set: std::collections::HashSet<(usize, usize)> = g.edges().iter().copied().collect();
    let reciprocal_edges = g
        .edges()
        .iter()
        .filter(|&&(i, j)| edge_set.contains(&(j, i)))
        .count();

    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max_degree + 1];
    for &d in &degrees {
        counts[d] += 1;
    }
    let degree_histogram = counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .collect();

    let mut stats = GraphStats {
        n,
        edge_count,
        degrees,
        centered_degrees,
        sum_degree_sq,
        degree_variation: 0.0,
        reciprocal_edges,
        max_degree,
        degree_histogram,
    };
    stats.degree_variation = stats.scaled_variation() as f64 / n as f64;
    stats
}

/// Ratios of the limit-theory sums to their normalizers. `None` when the
/// normalizer vanishes or the quantity was skipped.
#[derive(Clone, Debug, Serialize)]
pub struct Ratios {
    /// Σ|G_i|² / |G|^{3/2}
    pub degree_sq: Option<f64>,
    /// Σ|d̃_i|³ / V_G^{3/2}
    pub abs_cubed: Option<f64>,
    /// Σd̃_i³ / (V_G √|G|)
    pub cubed: Option<f64>,
    /// cross term / (|G| V_G)
    pub cross: Option<f64>,
    /// N_sq / |G|²
    pub squares: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub edge_count: usize,
    pub sum_degree_sq: u64,
    pub sum_abs_centered_cubed: f64,
    pub sum_centered_cubed: f64,
    /// Σ_i Σ d̃_j d̃_k over ordered pairs of edges at i whose far ends j != k.
    pub cross_term: f64,
    /// Number of 4-edge subsets forming a 4-cycle on distinct nodes
    /// (orientation ignored); `None` when N exceeds the cap.
    pub squares: Option<u64>,
    pub squares_skipped: bool,
    pub degree_variation: f64,
    /// Var(Q_N) of the empirical degree law.
    pub degree_variance: f64,
    pub max_degree: usize,
    /// All degrees equal: the permutation covariance of (R1, R2) is singular.
    pub degenerate: bool,
    pub ratios: Ratios,
}

pub fn condition_diagnostics(g: &DirectedGraph, size_cap: usize) -> DiagnosticsReport {
    let st = graph_stats(g);
    let dt = &st.centered_degrees;
    let sum_abs_centered_cubed = dt.iter().map(|x| x.abs().powi(3)).sum();
    let sum_centered_cubed = dt.iter().map(|x| x.powi(3)).sum();

    let mut cross_term = 0.0;
    for far in g.incidence().iter_mut() {
        far.sort_unstable();
        let total: f64 = far.iter().map(|&j| dt[j]).sum();
        let mut same = 0.0;
        for run in far.chunk_by(|a, b| a == b) {
            let c = run.len() as f64;
            same += c * c * dt[run[0]] * dt[run[0]];
        }
        cross_term += total * total - same;
    }

    let squares = (g.n() <= size_cap).then(|| count_squares(g));

    let degenerate = st.scaled_variation() == 0;
    let e = st.edge_count as f64;
    let vg = st.degree_variation;
    let pos = |den: f64| (den > 0.0).then_some(den);
    let ratios = Ratios {
        degree_sq: pos(e.powf(1.5)).map(|den| st.sum_degree_sq as f64 / den),
        abs_cubed: pos(vg.powf(1.5)).filter(|_| !degenerate).map(|den| sum_abs_centered_cubed / den),
        cubed: pos(vg * e.sqrt()).filter(|_| !degenerate).map(|den| sum_centered_cubed / den),
        cross: pos(e * vg).filter(|_| !degenerate).map(|den| cross_term / den),
        squares: squares.and_then(|s| pos(e * e).map(|den| s as f64 / den)),
    };

    DiagnosticsReport {
        n: st.n,
        edge_count: st.edge_count,
        sum_degree_sq: st.sum_degree_sq,
        sum_abs_centered_cubed,
        sum_centered_cubed,
        cross_term,
        squares,
        squares_skipped: squares.is_none(),
        degree_variation: vg,
        degree_variance: st.degree_variance(),
        max_degree: st.max_degree,
        degenerate,
        ratios,
    }
}

/// Counts 4-cycles weighted by edge multiplicity between each consecutive pair.
///
/// For every unordered diagonal {a, c}, with w_b = m(a,b)·m(b,c), the cycles
/// a-b-c-d-a number Σ_{b<d} w_b w_d = (s² - Σ w_b²)/2. Each cycle has two
/// diagonals, hence the final halving.
fn count_squares(g: &DirectedGraph) -> u64 {
    let n = g.n();
    let mut mult = vec![0u64; n * n];
    for &(i, j) in g.edges() {
        mult[i * n + j] += 1;
        mult[j * n + i] += 1;
    }
    let far = g.incidence();
    let mut total = 0u64;
    let mut touched = Vec::new();
    for a in 0..n {
        let mut mids: Vec<usize> = far[a].clone();
        mids.sort_unstable();
        mids.dedup();
        for &b in &mids {
            touched.extend(far[b].iter().copied().filter(|&c| c > a));
        }
        touched.sort_unstable();
        touched.dedup();
        for &c in &touched {
            let mut s = 0u64;
            let mut s2 = 0u64;
            for &b in &mids {
                let wb = mult[a * n + b] * mult[b * n + c];
                s += wb;
                s2 += wb * wb;
            }
            total += (s * s - s2) / 2;
        }
        touched.clear();
    }
    total / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphKind;

    fn graph(n: usize, one_based: &[(usize, usize)]) -> DirectedGraph {
        DirectedGraph::from_one_based(n, one_based, GraphKind::Knng).unwrap()
    }

    #[test]
    fn one_nng_stats() {
        let st = graph_stats(&graph(3, &[(1, 2), (2, 1), (3, 2)]));
        assert_eq!(st.edge_count, 3);
        assert_eq!(st.degrees, vec![2, 3, 1]);
        assert_eq!(st.reciprocal_edges, 2);
        // 4 + 9 + 1 - 36/3
        assert_eq!(st.scaled_variation(), 6);
        assert!((st.degree_variation - 2.0).abs() < 1e-12);
        let direct: f64 = st.centered_degrees.iter().map(|x| x * x).sum();
        assert!((direct - 2.0).abs() < 1e-12);
    }

    #[test]
    fn three_cycle_is_regular() {
        let g = graph(3, &[(1, 2), (2, 3), (3, 1)]);
        let st = graph_stats(&g);
        assert_eq!(st.degrees, vec![2, 2, 2]);
        assert_eq!(st.degree_variation, 0.0);
        assert_eq!(st.reciprocal_edges, 0);

        let diag = condition_diagnostics(&g, 100);
        assert_eq!(diag.sum_degree_sq, 12);
        assert_eq!(diag.sum_abs_centered_cubed, 0.0);
        assert_eq!(diag.cross_term, 0.0);
        assert!(diag.degenerate);
        assert_eq!(diag.degree_variance, 0.0);
        assert!(diag.ratios.cross.is_none());
    }

    #[test]
    fn mutual_pair() {
        assert_eq!(graph_stats(&graph(2, &[(1, 2), (2, 1)])).reciprocal_edges, 2);
    }

    #[test]
    fn square_counts() {
        let sq = graph(4, &[(1, 2), (2, 3), (3, 4), (4, 1)]);
        assert_eq!(condition_diagnostics(&sq, 100).squares, Some(1));
        // a reversed copy of one side doubles the ways to pick that side
        let doubled = graph(4, &[(1, 2), (2, 1), (2, 3), (3, 4), (4, 1)]);
        assert_eq!(condition_diagnostics(&doubled, 100).squares, Some(2));
        // K4 has three 4-cycles
        let k4 = graph(4, &[(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(condition_diagnostics(&k4, 100).squares, Some(3));
        assert_eq!(condition_diagnostics(&k4, 3).squares, None);
    }
}
