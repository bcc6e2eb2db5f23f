//! Offline single change-point detection by scanning a two-sample statistic
//! over every split of a time-ordered sequence.
//!
//! The similarity graph is built once on all observations. For a split at t
//! the first t observations form sample X (m = t). Null moments depend on the
//! graph and m only, so they are computed once per t and reused for every
//! permuted ordering in the p-value loop.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::edgecount::{at_least, EdgeCounts, Evaluator, MomentInputs, NullMoments, StatisticKind};
use crate::graphs::DirectedGraph;
use crate::inference::{GraphSummary, Prepared, TestConfig};
use crate::seed::replicate_rng;
use crate::{Error, Result, SCHEMA_VERSION};

pub const MIN_SEQUENCE_LENGTH: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    #[serde(flatten)]
    pub test: TestConfig,
    /// Boundary fraction w: candidate splits are ⌈wN⌉..=⌊(1-w)N⌋.
    pub window: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            test: TestConfig::default(),
            window: 0.05,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        self.test.validate()?;
        if !(self.window > 0.0 && self.window < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "window fraction must lie in (0, 0.5), got {}",
                self.window
            )));
        }
        Ok(())
    }

    /// Inclusive range of candidate split points for a sequence of length n.
    pub fn split_range(&self, n: usize) -> Result<(usize, usize)> {
        let lo = ((self.window * n as f64).ceil() as usize).max(1);
        let hi = ((((1.0 - self.window) * n as f64) + 1e-9).floor() as usize).min(n - 1);
        if lo > hi {
            return Err(Error::InvalidParameter(format!("empty scan window for N = {n}")));
        }
        Ok((lo, hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    /// `None` where the null covariance is degenerate at this split.
    pub statistic: Option<f64>,
}

/// Precomputed per-split standardizations on a fixed graph.
#[derive(Clone, Debug)]
pub struct Scanner<'g> {
    graph: &'g DirectedGraph,
    incidence: Vec<Vec<usize>>,
    lo: usize,
    hi: usize,
    evaluators: Vec<Option<Evaluator>>,
}

impl<'g> Scanner<'g> {
    pub fn new(graph: &'g DirectedGraph, kind: StatisticKind, lo: usize, hi: usize) -> Result<Scanner<'g>> {
        let n = graph.n();
        if lo == 0 || hi >= n || lo > hi {
            return Err(Error::InvalidParameter(format!(
                "scan window {lo}..={hi} must lie within 1..={}",
                n - 1
            )));
        }
        let inputs = MomentInputs::from_graph(graph);
        let mut evaluators = Vec::with_capacity(hi - lo + 1);
        for t in lo..=hi {
            let nm = NullMoments::from_inputs(&inputs, t)?;
            evaluators.push(Evaluator::new(kind, &nm).ok());
        }
        if evaluators.iter().all(Option::is_none) {
            return Err(Error::DegenerateCovariance(
                "the statistic is undefined at every split in the window".into(),
            ));
        }
        Ok(Scanner {
            graph,
            incidence: graph.incidence(),
            lo,
            hi,
            evaluators,
        })
    }

    pub fn window(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    /// Splits skipped because the statistic is undefined there.
    pub fn skipped(&self) -> Vec<usize> {
        (self.lo..=self.hi)
            .zip(&self.evaluators)
            .filter(|(_, e)| e.is_none())
            .map(|(t, _)| t)
            .collect()
    }

    /// Visits (t, statistic) for each split; `order[p]` is the node observed at time p.
    fn walk(&self, order: &[usize], mut visit: impl FnMut(usize, Option<f64>)) {
        let n = self.graph.n();
        let mut in_x = vec![false; n];
        let mut ec = EdgeCounts {
            r1: 0,
            r2: self.graph.edge_count() as u64,
            rb: 0,
        };
        for t in 1..=self.hi {
            let v = order[t - 1];
            for &u in &self.incidence[v] {
                if in_x[u] {
                    ec.r1 += 1;
                    ec.rb -= 1;
                } else {
                    ec.r2 -= 1;
                    ec.rb += 1;
                }
            }
            in_x[v] = true;
            if t >= self.lo {
                visit(t, self.evaluators[t - self.lo].as_ref().map(|e| e.value(&ec)));
            }
        }
    }

    pub fn curve(&self, order: &[usize]) -> Vec<CurvePoint> {
        let mut out = Vec::with_capacity(self.hi - self.lo + 1);
        self.walk(order, |t, statistic| out.push(CurvePoint { t, statistic }));
        out
    }

    /// (argmax t, max statistic); the smallest t wins ties.
    pub fn maximum(&self, order: &[usize]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        self.walk(order, |t, s| {
            if let Some(s) = s {
                if s > best.1 {
                    best = (t, s);
                }
            }
        });
        best
    }

    /// Monte-Carlo p-value of `observed_max` over uniformly permuted orderings.
    pub fn pvalue(&self, observed_max: f64, permutations: usize, seed: u64) -> f64 {
        let n = self.graph.n();
        let exceed: usize = (0..permutations)
            .into_par_iter()
            .map_init(
                || (0..n).collect::<Vec<usize>>(),
                |order, b| {
                    order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
                    order.shuffle(&mut replicate_rng(seed, b as u64));
                    usize::from(at_least(self.maximum(order).1, observed_max))
                },
            )
            .sum();
        (1 + exceed) as f64 / (permutations + 1) as f64
    }
}

/// Statistic at each split of the natural node order over `window`.
pub fn scan_curve(g: &DirectedGraph, window: (usize, usize), kind: StatisticKind) -> Result<Vec<CurvePoint>> {
    let scanner = Scanner::new(g, kind, window.0, window.1)?;
    let order: Vec<usize> = (0..g.n()).collect();
    Ok(scanner.curve(&order))
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub schema_version: u32,
    pub curve: Vec<CurvePoint>,
    /// Estimated change point τ̂: the last index of the first segment (1-based).
    pub tau_hat: usize,
    pub max_statistic: f64,
    pub pvalue: f64,
    pub significant: bool,
    pub window: (usize, usize),
    pub skipped: Vec<usize>,
    pub config: ScanConfig,
    pub graph_summary: GraphSummary,
}

impl ScanResult {
    /// Writes the (t, statistic) curve as CSV; skipped splits have an empty cell.
    pub fn write_curve_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "statistic"])?;
        for p in &self.curve {
            w.write_record([p.t.to_string(), p.statistic.map(|s| s.to_string()).unwrap_or_default()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scans a prebuilt graph whose node order is the time order.
pub fn scan_graph(g: &DirectedGraph, cfg: &ScanConfig, graph_summary: GraphSummary) -> Result<ScanResult> {
    cfg.validate()?;
    let window = cfg.split_range(g.n())?;
    let scanner = Scanner::new(g, cfg.test.statistic, window.0, window.1)?;
    let order: Vec<usize> = (0..g.n()).collect();
    let curve = scanner.curve(&order);
    let (tau_hat, max_statistic) = scanner.maximum(&order);
    let pvalue = scanner.pvalue(max_statistic, cfg.test.permutations, cfg.test.seed);
    Ok(ScanResult {
        schema_version: SCHEMA_VERSION,
        curve,
        tau_hat,
        max_statistic,
        pvalue,
        significant: pvalue <= cfg.test.alpha,
        window,
        skipped: scanner.skipped(),
        config: cfg.clone(),
        graph_summary,
    })
}

/// Builds the configured graph on a time-ordered sequence and scans it.
pub fn scan(seq: &Dataset, cfg: &ScanConfig) -> Result<ScanResult> {
    cfg.validate()?;
    if seq.n() < MIN_SEQUENCE_LENGTH {
        return Err(Error::InvalidParameter(format!(
            "change-point scan needs at least {MIN_SEQUENCE_LENGTH} observations, got {}",
            seq.n()
        )));
    }
    let prepared = Prepared::new(seq, cfg.test.metric)?;
    let (g, descent) = prepared.graph(&cfg.test)?;
    let summary = GraphSummary::of(&g, descent);
    scan_graph(&g, cfg, summary)
}
