//! Observation matrices, pairwise distances and neighbor ranks.
//!
//! Rows are observations and columns are features. Row order is preserved
//! exactly as read so that time-ordered sequences can be scanned for change
//! points.

use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sample membership of a pooled observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sample {
    X,
    Y,
}

impl Sample {
    fn parse(s: &str) -> Option<Sample> {
        match s.trim() {
            "X" | "x" | "1" => Some(Sample::X),
            "Y" | "y" | "2" => Some(Sample::Y),
            _ => None,
        }
    }
}

/// An N×d matrix of finite observations, optionally labelled by sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    d: usize,
    row_ids: Vec<String>,
    labels: Option<Vec<Sample>>,
}

impl Dataset {
    /// Builds a dataset from row-major values.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Dataset> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("no rows".into()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::EmptyInput("no columns".into()));
        }
        let mut values = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: d,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Dataset::from_flat(values, n, d)
    }

    pub fn from_flat(values: Vec<f64>, n: usize, d: usize) -> Result<Dataset> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if d == 0 || values.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {n}×{d} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        Ok(Dataset {
            values,
            n,
            d,
            row_ids: (1..=n).map(|i| i.to_string()).collect(),
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<Sample>) -> Result<Dataset> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Dataset> {
        if ids.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} row ids for {} rows",
                ids.len(),
                self.n
            )));
        }
        self.row_ids = ids;
        Ok(self)
    }

    /// Stacks `x` on top of `y` and labels the rows accordingly.
    pub fn pool(x: &Dataset, y: &Dataset) -> Result<Dataset> {
        if x.d != y.d {
            return Err(Error::DimensionMismatch(format!(
                "sample X has {} columns, sample Y has {}",
                x.d, y.d
            )));
        }
        let mut values = x.values.clone();
        values.extend_from_slice(&y.values);
        let labels = std::iter::repeat_n(Sample::X, x.n)
            .chain(std::iter::repeat_n(Sample::Y, y.n))
            .collect();
        let ids = x
            .row_ids
            .iter()
            .map(|id| format!("x{id}"))
            .chain(y.row_ids.iter().map(|id| format!("y{id}")))
            .collect();
        Dataset::from_flat(values, x.n + y.n, x.d)?
            .with_labels(labels)?
            .with_row_ids(ids)
    }

    /// Splits a labelled dataset into its X and Y parts.
    pub fn split(&self) -> Result<(Dataset, Dataset)> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("dataset has no labels".into()))?;
        let pick = |which: Sample| -> Result<Dataset> {
            let rows: Vec<Vec<f64>> = (0..self.n)
                .filter(|&i| labels[i] == which)
                .map(|i| self.row(i).to_vec())
                .collect();
            Dataset::from_rows(rows)
        };
        Ok((pick(Sample::X)?, pick(Sample::Y)?))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn labels(&self) -> Option<&[Sample]> {
        self.labels.as_deref()
    }

    /// Sizes (m, n) of the X and Y samples when labels are present.
    pub fn sample_sizes(&self) -> Option<(usize, usize)> {
        self.labels.as_ref().map(|l| {
            let m = l.iter().filter(|&&s| s == Sample::X).count();
            (m, l.len() - m)
        })
    }
}

/// Options for [`load_dataset`].
#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Name of the column holding sample labels (`X`/`Y` or `1`/`2`). Requires a header.
    pub label_column: Option<String>,
    pub delimiter: Option<u8>,
}

/// Parses CSV text into a [`Dataset`].
pub fn load_dataset<R: Read>(source: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(opts.delimiter.unwrap_or(b','))
        .from_reader(source);

    let label_idx = match &opts.label_column {
        Some(name) => {
            if !opts.has_header {
                return Err(Error::InvalidParameter(
                    "a label column requires a header row".into(),
                ));
            }
            let headers = reader.headers()?;
            Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::MissingColumn(name.clone()))?,
            )
        }
        None => None,
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::RaggedRow {
                    row,
                    expected: w,
                    found: record.len(),
                })
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_idx {
                let s = Sample::parse(cell).ok_or_else(|| Error::UnknownLabel {
                    row,
                    value: cell.to_string(),
                })?;
                labels.push(s);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: c + 1,
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        n += 1;
    }
    let Some(width) = width else {
        return Err(Error::EmptyInput("no data rows".into()));
    };
    let d = width - usize::from(label_idx.is_some());
    if d == 0 {
        return Err(Error::EmptyInput("no numeric columns".into()));
    }
    let ds = Dataset::from_flat(values, n, d)?;
    if label_idx.is_some() {
        ds.with_labels(labels)
    } else {
        Ok(ds)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    SquaredEuclidean,
    L1,
}

impl Metric {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => sq_euclidean(a, b).sqrt(),
            Metric::SquaredEuclidean => sq_euclidean(a, b),
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric N×N matrix of pairwise distances with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    /// Wraps a precomputed matrix after checking symmetry, zero diagonal and nonnegativity.
    pub fn from_values(n: usize, values: Vec<f64>, metric: Metric) -> Result<DistanceMatrix> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n}×{n} matrix",
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = values[i * n + j];
                if !(v >= 0.0 && v.is_finite()) || v != values[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i}, {j}) is negative, non-finite or asymmetric"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { n, values, metric })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Computes all pairwise distances. Rows are filled in parallel; the result
/// is identical to a sequential fill.
pub fn pairwise_distances(ds: &Dataset, metric: Metric) -> Result<DistanceMatrix> {
    let n = ds.n();
    let mut values = vec![0.0; n * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                if j < i {
                    *slot = metric.eval(ds.row(j), ds.row(i));
                } else if j > i {
                    *slot = metric.eval(ds.row(i), ds.row(j));
                }
            }
        });
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "distance between rows {} and {} overflowed",
            pos / n + 1,
            pos % n + 1
        )));
    }
    Ok(DistanceMatrix { n, values, metric })
}

/// Per-source neighbor ranks R_i(Z_j).
///
/// Row i ranks every j != i by D(Z_i, Z_j) ascending, starting at 1. Equal
/// distances are ordered by observation index, so the smaller index gets the
/// smaller rank. The diagonal holds the sentinel 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankMatrix {
    n: usize,
    ranks: Vec<u32>,
    // order[i * (n - 1) + r] is the node holding rank r + 1 in row i
    order: Vec<u32>,
}

impl RankMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// R_i(Z_j); 0 on the diagonal.
    pub fn rank(&self, i: usize, j: usize) -> u32 {
        self.ranks[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ranks[i * self.n..(i + 1) * self.n]
    }

    /// Nodes of row i sorted by rank (nearest first).
    pub fn nearest(&self, i: usize) -> &[u32] {
        let w = self.n - 1;
        &self.order[i * w..(i + 1) * w]
    }
}

/// Ranks each row of a distance matrix; ties go to the smaller index.
pub fn neighbor_ranks(dm: &DistanceMatrix) -> RankMatrix {
    let n = dm.n();
    let w = n - 1;
    let mut order = vec![0u32; n * w];
    order.par_chunks_mut(w).enumerate().for_each(|(i, out)| {
        let row = dm.row(i);
        let mut idx: Vec<u32> = (0..n as u32).filter(|&j| j as usize != i).collect();
        idx.sort_by(|&a, &b| row[a as usize].total_cmp(&row[b as usize]).then(a.cmp(&b)));
        out.copy_from_slice(&idx);
    });
    let mut ranks = vec![0u32; n * n];
    for i in 0..n {
        for (r, &j) in order[i * w..(i + 1) * w].iter().enumerate() {
            ranks[i * n + j as usize] = r as u32 + 1;
        }
    }
    RankMatrix { n, ranks, order }
}
