//! Similarity graphs on pooled observations.
//!
//! Three builders share one [`DirectedGraph`] representation:
//! - [`build_knng`]: each node points to its K nearest neighbors by rank.
//! - [`build_kmst`]: union of K successive edge-disjoint minimum spanning
//!   trees, stored with canonical orientation `i < j`.
//! - [`build_krnng`]: greedy descent on the rank-sum plus `λ·Σ|G_i|²`
//!   objective, starting from the K-NNG.
//!
//! Extension points not built here: a distance-valued objective (replace
//! ranks by raw distances in the rank-sum term) and a hub-penalized K-MST.

mod kmst;
mod knn;
mod robust;
mod stats;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use kmst::build_kmst;
pub use knn::{build_knng, objective_value};
pub use robust::{build_krnng, KrnngOptions, KrnngOutcome, KrnngSummary, DEFAULT_MAX_PASSES};
pub use stats::{condition_diagnostics, graph_stats, DiagnosticsReport, GraphStats, Ratios, DEFAULT_SQUARE_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Knng,
    Kmst,
    Krnng,
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knng" | "nng" => Ok(GraphKind::Knng),
            "kmst" | "mst" => Ok(GraphKind::Kmst),
            "krnng" | "rnng" => Ok(GraphKind::Krnng),
            other => Err(Error::InvalidParameter(format!("unknown graph kind {other:?}"))),
        }
    }
}

/// Edge list over nodes `0..n` with no self-loops and no repeated ordered pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    kind: GraphKind,
}

impl DirectedGraph {
    /// Validates and wraps an edge list (0-based node ids).
    pub fn new(n: usize, edges: Vec<(usize, usize)>, kind: GraphKind) -> Result<DirectedGraph> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(i, j) in &edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidParameter(format!("duplicate edge ({i}, {j})")));
            }
            if kind == GraphKind::Kmst && i > j {
                return Err(Error::InvalidParameter(format!(
                    "K-MST edge ({i}, {j}) is not in canonical orientation"
                )));
            }
        }
        Ok(DirectedGraph { n, edges, kind })
    }

    /// Builds a graph from 1-based edge pairs.
    pub fn from_one_based(n: usize, edges: &[(usize, usize)], kind: GraphKind) -> Result<DirectedGraph> {
        let mut zero = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == 0 || j == 0 {
                return Err(Error::InvalidParameter("node ids are 1-based".into()));
            }
            zero.push((i - 1, j - 1));
        }
        DirectedGraph::new(n, zero, kind)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// |G|
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Total degree |G_i| (in plus out) of every node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// For each node, the other endpoint of every incident edge (one entry per edge).
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Returns the same graph with node ids relabelled by `perm` (old id → new id).
    pub fn relabel(&self, perm: &[usize]) -> Result<DirectedGraph> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let edges = self
            .edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (perm[i], perm[j]);
                if self.kind == GraphKind::Kmst && a > b {
                    (b, a)
                } else {
                    (a, b)
                }
            })
            .collect();
        DirectedGraph::new(self.n, edges, self.kind)
    }

    /// Writes the edge list as CSV with a `i,j` header and 1-based ids.
    pub fn write_edge_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j"])?;
        for &(i, j) in &self.edges {
            w.write_record([(i + 1).to_string(), (j + 1).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Out-neighbor sets C_i of a K-NNG or K-RNNG; each set is kept sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSets {
    sets: Vec<Vec<usize>>,
}

impl NeighborSets {
    pub fn new(sets: Vec<Vec<usize>>) -> Result<NeighborSets> {
        let n = sets.len();
        let k = sets.first().map_or(0, Vec::len);
        let mut sets = sets;
        for (i, s) in sets.iter_mut().enumerate() {
            s.sort_unstable();
            if s.len() != k {
                return Err(Error::InconsistentNeighbors(format!(
                    "node {i} has {} neighbors, expected {k}",
                    s.len()
                )));
            }
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InconsistentNeighbors(format!("node {i} repeats a neighbor")));
            }
            if s.iter().any(|&j| j == i || j >= n) {
                return Err(Error::InconsistentNeighbors(format!(
                    "node {i} has a self or out-of-range neighbor"
                )));
            }
        }
        Ok(NeighborSets { sets })
    }

    pub fn n(&self) -> usize {
        self.sets.len()
    }

    pub fn k(&self) -> usize {
        self.sets.first().map_or(0, Vec::len)
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(Vec::as_slice)
    }

    pub fn to_graph(&self, kind: GraphKind) -> DirectedGraph {
        let edges = self
            .sets
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
            .collect();
        DirectedGraph {
            n: self.n(),
            edges,
            kind,
        }
    }
}

/// Builds the requested graph kind from distances and ranks.
pub fn build_graph(
    kind: GraphKind,
    dm: &crate::data::DistanceMatrix,
    rm: &crate::data::RankMatrix,
    k: usize,
    lambda: f64,
    seed: u64,
) -> Result<DirectedGraph> {
    match kind {
        GraphKind::Knng => Ok(build_knng(rm, k)?.0),
        GraphKind::Kmst => build_kmst(dm, k),
        GraphKind::Krnng => {
            let opts = KrnngOptions {
                lambda,
                seed,
                ..KrnngOptions::default()
            };
            Ok(build_krnng(rm, k, &opts)?.graph)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_graphs() {
        assert!(DirectedGraph::new(3, vec![(0, 0)], GraphKind::Knng).is_err());
        assert!(DirectedGraph::new(3, vec![(0, 1), (0, 1)], GraphKind::Knng).is_err());
        assert!(DirectedGraph::new(3, vec![(0, 3)], GraphKind::Knng).is_err());
        assert!(DirectedGraph::new(3, vec![(2, 1)], GraphKind::Kmst).is_err());
        assert!(DirectedGraph::new(3, vec![(0, 1), (1, 0)], GraphKind::Knng).is_ok());
    }

    #[test]
    fn edge_csv_is_one_based() {
        let g = DirectedGraph::from_one_based(3, &[(1, 2), (3, 2)], GraphKind::Knng).unwrap();
        let mut buf = Vec::new();
        g.write_edge_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j\n1,2\n3,2\n");
    }

    #[test]
    fn neighbor_sets_validate() {
        assert!(NeighborSets::new(vec![vec![1], vec![0, 2], vec![0]]).is_err());
        assert!(NeighborSets::new(vec![vec![0], vec![0], vec![0]]).is_err());
        assert!(NeighborSets::new(vec![vec![1, 1], vec![0, 2], vec![0, 1]]).is_err());
        let ns = NeighborSets::new(vec![vec![1], vec![0], vec![1]]).unwrap();
        assert_eq!(ns.to_graph(GraphKind::Knng).edges(), &[(0, 1), (1, 0), (2, 1)]);
    }
}
