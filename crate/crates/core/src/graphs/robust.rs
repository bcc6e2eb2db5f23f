//! Greedy construction of the K-robust nearest-neighbor graph.
//!
//! The objective is
//!
//! ```text
//!   L = Σ_i Σ_{x∈C_i} R_i(x) + λ Σ_i |G_i|²
//! ```
//!
//! where `|G_i|` is the total (in + out) degree. Starting from the K-NNG, each
//! pass visits the nodes in a fresh random order. Node `i` scores every
//! candidate `j` by
//!
//! ```text
//!   W_i(j) = R_i(Z_j) + λ (|G_j*| + 1)²,   |G_j*| = |G_j| - [j ∈ C_i]
//! ```
//!
//! takes the K smallest scores (smaller index on ties) and rewires to them only
//! if the objective strictly drops. The descent stops after a pass with no
//! accepted move.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::data::RankMatrix;
use crate::{Error, Result};

use super::knn::{build_knng, check_k, objective_parts};
use super::{DirectedGraph, GraphKind, NeighborSets};

pub const DEFAULT_MAX_PASSES: usize = 100;

#[derive(Clone, Debug)]
pub struct KrnngOptions {
    pub lambda: f64,
    pub seed: u64,
    pub max_passes: usize,
}

impl Default for KrnngOptions {
    fn default() -> Self {
        KrnngOptions {
            lambda: 0.3,
            seed: crate::seed::DEFAULT_SEED,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KrnngOutcome {
    pub graph: DirectedGraph,
    pub neighbors: NeighborSets,
    /// Objective of the K-NNG the descent started from.
    pub initial_objective: f64,
    pub objective: f64,
    /// Objective after each accepted move.
    pub trace: Vec<f64>,
    pub passes: usize,
    /// False when `max_passes` ran out before a pass without moves.
    pub converged: bool,
}

impl KrnngOutcome {
    pub fn summary(&self) -> KrnngSummary {
        KrnngSummary {
            initial_objective: self.initial_objective,
            objective: self.objective,
            accepted_moves: self.trace.len(),
            passes: self.passes,
            converged: self.converged,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KrnngSummary {
    pub initial_objective: f64,
    pub objective: f64,
    pub accepted_moves: usize,
    pub passes: usize,
    pub converged: bool,
}

pub fn build_krnng(rm: &RankMatrix, k: usize, opts: &KrnngOptions) -> Result<KrnngOutcome> {
    let n = rm.n();
    check_k(n, k)?;
    let lambda = opts.lambda;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("λ must be finite and >= 0, got {lambda}")));
    }
    if opts.max_passes == 0 {
        return Err(Error::InvalidParameter("max_passes must be at least 1".into()));
    }

    let (_, start) = build_knng(rm, k)?;
    let mut sets: Vec<Vec<usize>> = start.iter().map(<[usize]>::to_vec).collect();
    let mut deg = vec![k as u64; n];
    for set in &sets {
        for &j in set {
            deg[j] += 1;
        }
    }
    let (mut rank_sum, mut sq_sum) = objective_parts(&start, rm);
    let objective = |rs: u64, sq: u64| rs as f64 + lambda * sq as f64;
    let initial_objective = objective(rank_sum, sq_sum);

    let mut rng = crate::seed::rng(opts.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut is_current = vec![false; n];
    let mut scores: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    let mut trace = Vec::new();
    let mut passes = 0;
    let mut converged = false;

    while passes < opts.max_passes {
        passes += 1;
        order.shuffle(&mut rng);
        let mut moved = false;
        for &i in &order {
            for &j in &sets[i] {
                is_current[j] = true;
            }
            scores.clear();
            let row = rm.row(i);
            for j in (0..n).filter(|&j| j != i) {
                let g = deg[j] - u64::from(is_current[j]);
                let w = f64::from(row[j]) + lambda * ((g + 1) * (g + 1)) as f64;
                scores.push((w, j));
            }
            let by_score = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < scores.len() {
                scores.select_nth_unstable_by(k - 1, by_score);
            }
            let mut proposal: Vec<usize> = scores[..k].iter().map(|&(_, j)| j).collect();
            proposal.sort_unstable();

            let mut d_rank: i64 = 0;
            let mut d_sq: i64 = 0;
            for &j in &proposal {
                if !is_current[j] {
                    d_rank += i64::from(row[j]);
                    d_sq += 2 * deg[j] as i64 + 1;
                }
            }
            for &j in &sets[i] {
                is_current[j] = false;
                if proposal.binary_search(&j).is_err() {
                    d_rank -= i64::from(row[j]);
                    d_sq += 1 - 2 * deg[j] as i64;
                }
            }

            if (d_rank as f64) + lambda * (d_sq as f64) < 0.0 {
                for &j in &sets[i] {
                    deg[j] -= 1;
                }
                for &j in &proposal {
                    deg[j] += 1;
                }
                sets[i] = proposal;
                rank_sum = (rank_sum as i64 + d_rank) as u64;
                sq_sum = (sq_sum as i64 + d_sq) as u64;
                debug_assert_eq!(
                    (rank_sum, sq_sum),
                    objective_parts(&NeighborSets::new(sets.clone()).unwrap(), rm)
                );
                trace.push(objective(rank_sum, sq_sum));
                moved = true;
            }
        }
        if !moved {
            converged = true;
            break;
        }
    }

    let neighbors = NeighborSets::new(sets)?;
    Ok(KrnngOutcome {
        graph: neighbors.to_graph(GraphKind::Krnng),
        neighbors,
        initial_objective,
        objective: objective(rank_sum, sq_sum),
        trace,
        passes,
        converged,
    })
}
