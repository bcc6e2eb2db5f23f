use petgraph::unionfind::UnionFind;

use crate::data::DistanceMatrix;
use crate::{Error, Result};

use super::{DirectedGraph, GraphKind};

/// Union of K successive minimum spanning trees, each built by Kruskal on the
/// pairs not used by earlier trees.
///
/// Pairs are sorted by (distance, i, j), so equal distances resolve to the
/// lexicographically smaller pair. Edges are stored as `(i, j)` with `i < j`;
/// every tree contributes N - 1 edges, giving |G| = K(N - 1).
pub fn build_kmst(dm: &DistanceMatrix, k: usize) -> Result<DirectedGraph> {
    let n = dm.n();
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    pairs.sort_by(|&(a, b), &(c, d)| {
        dm.get(a, b)
            .total_cmp(&dm.get(c, d))
            .then((a, b).cmp(&(c, d)))
    });

    let mut used = vec![false; pairs.len()];
    let mut edges = Vec::with_capacity(k * (n - 1));
    for tree in 1..=k {
        let mut uf = UnionFind::<usize>::new(n);
        let mut taken = Vec::with_capacity(n - 1);
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            if used[idx] {
                continue;
            }
            if uf.union(i, j) {
                taken.push(idx);
                if taken.len() == n - 1 {
                    break;
                }
            }
        }
        if taken.len() != n - 1 {
            return Err(Error::KmstExhausted { tree, nodes: n });
        }
        for idx in taken {
            used[idx] = true;
            edges.push(pairs[idx]);
        }
    }
    DirectedGraph::new(n, edges, GraphKind::Kmst)
}
