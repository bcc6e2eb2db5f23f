//! Label perturbations: reverse the sample labels of a few selected nodes.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::edgecount::LabelVector;
use crate::graphs::DirectedGraph;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Uniformly chosen nodes.
    Random,
    /// Nodes furthest (Euclidean) from the coordinatewise pooled mean.
    Outlier,
    /// Nodes with the largest total degree in the graph.
    Hub,
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(PerturbationKind::Random),
            "outlier" => Ok(PerturbationKind::Outlier),
            "hub" => Ok(PerturbationKind::Hub),
            other => Err(Error::InvalidParameter(format!("unknown perturbation {other:?}"))),
        }
    }
}

/// Graph whose hubs a hub perturbation targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HubReference {
    /// The K-NNG on the pooled data, so every graph sees the same mislabelled nodes.
    #[default]
    Knng,
    /// The graph the test is run on.
    Tested,
}

impl std::str::FromStr for HubReference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knng" => Ok(HubReference::Knng),
            "tested" => Ok(HubReference::Tested),
            other => Err(Error::InvalidParameter(format!("unknown hub reference {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub count: usize,
    #[serde(default)]
    pub hub_reference: HubReference,
}

impl Perturbation {
    pub fn new(kind: PerturbationKind) -> Perturbation {
        Perturbation {
            kind,
            count: 5,
            hub_reference: HubReference::default(),
        }
    }

    pub fn with_count(kind: PerturbationKind, count: usize) -> Perturbation {
        Perturbation {
            count,
            ..Perturbation::new(kind)
        }
    }
}

/// Indices of the `count` largest keys; ties go to the smaller index.
fn top_by<K: PartialOrd>(keys: &[K], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[b].partial_cmp(&keys[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

/// Nodes whose labels a perturbation reverses, in selection order. `graph`
/// supplies the degrees for a hub perturbation.
pub fn perturbation_targets(
    labels: &LabelVector,
    data: &Dataset,
    graph: Option<&DirectedGraph>,
    p: &Perturbation,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = labels.len();
    if data.n() != n || graph.is_some_and(|g| g.n() != n) {
        return Err(Error::DimensionMismatch("labels, data and graph must cover the same nodes".into()));
    }
    let limit = labels.m().min(labels.n_y());
    if p.count >= limit {
        return Err(Error::InvalidParameter(format!(
            "perturbation count {} must be below min(m, n) = {limit}",
            p.count
        )));
    }
    Ok(match p.kind {
        PerturbationKind::Random => sample(&mut crate::seed::rng(seed), n, p.count).into_vec(),
        PerturbationKind::Outlier => {
            let d = data.d();
            let mut center = vec![0.0; d];
            for i in 0..n {
                center.iter_mut().zip(data.row(i)).for_each(|(c, x)| *c += x);
            }
            center.iter_mut().for_each(|c| *c /= n as f64);
            let dist: Vec<f64> = (0..n)
                .map(|i| data.row(i).iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum())
                .collect();
            top_by(&dist, p.count)
        }
        PerturbationKind::Hub => {
            let g = graph.ok_or_else(|| Error::InvalidParameter("hub perturbation needs a graph".into()))?;
            top_by(&g.degrees(), p.count)
        }
    })
}

/// Returns `labels` with the selected nodes' labels reversed.
pub fn perturb(
    labels: &LabelVector,
    data: &Dataset,
    graph: Option<&DirectedGraph>,
    p: &Perturbation,
    seed: u64,
) -> Result<LabelVector> {
    let mut out = labels.clone();
    for i in perturbation_targets(labels, data, graph, p, seed)? {
        out.flip(i);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphKind;

    fn line(points: &[f64]) -> Dataset {
        Dataset::from_flat(points.to_vec(), points.len(), 1).unwrap()
    }

    #[test]
    fn hub_flips_highest_degree() {
        let g = DirectedGraph::from_one_based(3, &[(1, 2), (2, 1), (3, 2)], GraphKind::Knng).unwrap();
        let lv = LabelVector::from_mask(vec![true, true, false, false, false, true]).unwrap();
        let ds = line(&[0.0, 1.0, 3.0, 4.0, 5.0, 6.0]);
        let g6 = DirectedGraph::new(6, g.edges().to_vec(), GraphKind::Knng).unwrap();
        let one = Perturbation::with_count(PerturbationKind::Hub, 1);
        assert_eq!(perturbation_targets(&lv, &ds, Some(&g6), &one, 0).unwrap(), vec![1]);
        assert!(perturb(&lv, &ds, None, &one, 0).is_err());
    }

    #[test]
    fn outlier_flips_furthest_from_mean() {
        let lv = LabelVector::from_mask(vec![true, true, false, false]).unwrap();
        let p = Perturbation::with_count(PerturbationKind::Outlier, 1);
        let out = perturb(&lv, &line(&[0.0, 0.0, 0.0, 10.0]), None, &p, 0).unwrap();
        assert_eq!(out.mask(), &[true, true, false, true]);
    }

    #[test]
    fn random_is_reproducible_and_flips_exactly_count() {
        let mask: Vec<bool> = (0..40).map(|i| i < 20).collect();
        let lv = LabelVector::from_mask(mask).unwrap();
        let ds = line(&(0..40).map(f64::from).collect::<Vec<_>>());
        let p = Perturbation::new(PerturbationKind::Random);
        let a = perturb(&lv, &ds, None, &p, 11).unwrap();
        let b = perturb(&lv, &ds, None, &p, 11).unwrap();
        assert_eq!(a, b);
        let changed = a.mask().iter().zip(lv.mask()).filter(|(x, y)| x != y).count();
        assert_eq!(changed, 5);
    }

    #[test]
    fn count_must_stay_below_smaller_sample() {
        let lv = LabelVector::from_mask(vec![true, true, false, false, false]).unwrap();
        let p = Perturbation::with_count(PerturbationKind::Random, 2);
        assert!(perturb(&lv, &line(&[0.0; 5]), None, &p, 0).is_err());
    }
}
