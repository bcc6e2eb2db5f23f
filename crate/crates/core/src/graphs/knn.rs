use crate::data::RankMatrix;
use crate::{Error, Result};

use super::{DirectedGraph, GraphKind, NeighborSets};

pub(crate) fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k + 1 > n {
        return Err(Error::InvalidParameter(format!(
            "K must satisfy 1 <= K <= N - 1 (K = {k}, N = {n})"
        )));
    }
    Ok(())
}

/// K-nearest-neighbor graph: node i points to the nodes holding ranks 1..=K
/// in row i. This edge set minimizes the rank-sum term of the objective.
pub fn build_knng(rm: &RankMatrix, k: usize) -> Result<(DirectedGraph, NeighborSets)> {
    let n = rm.n();
    check_k(n, k)?;
    let sets = (0..n)
        .map(|i| rm.nearest(i)[..k].iter().map(|&j| j as usize).collect())
        .collect();
    let ns = NeighborSets::new(sets)?;
    Ok((ns.to_graph(GraphKind::Knng), ns))
}

/// Σ_i Σ_{x∈C_i} R_i(x) + λ Σ_i |G_i|², with degrees recomputed from the
/// neighbor sets (out-degree K plus induced in-degree).
pub fn objective_value(ns: &NeighborSets, rm: &RankMatrix, lambda: f64) -> Result<f64> {
    if ns.n() != rm.n() {
        return Err(Error::InconsistentNeighbors(format!(
            "{} neighbor sets for {} ranked nodes",
            ns.n(),
            rm.n()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("λ must be >= 0, got {lambda}")));
    }
    let (rank_sum, sq) = objective_parts(ns, rm);
    Ok(rank_sum as f64 + lambda * sq as f64)
}

/// Integer rank-sum and Σ|G_i|² of a neighbor-set configuration.
pub(crate) fn objective_parts(ns: &NeighborSets, rm: &RankMatrix) -> (u64, u64) {
    let k = ns.k();
    let mut deg = vec![k as u64; ns.n()];
    let mut rank_sum = 0u64;
    for (i, set) in ns.iter().enumerate() {
        for &j in set {
            rank_sum += u64::from(rm.rank(i, j));
            deg[j] += 1;
        }
    }
    (rank_sum, deg.iter().map(|d| d * d).sum())
}
