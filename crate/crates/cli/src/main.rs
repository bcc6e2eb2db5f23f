//! `rnng`: graph building, two-sample testing, change-point detection and
//! simulation from the command line.

mod grid;
mod svg;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rnng::changepoint::{scan, ScanConfig};
use rnng::data::{load_dataset, CsvOptions, Dataset, Metric};
use rnng::edgecount::StatisticKind;
use rnng::graphs::{condition_diagnostics, GraphKind, DEFAULT_SQUARE_CAP};
use rnng::inference::{test_pooled, two_sample_test, GraphSummary, PValueMode, Prepared, TestConfig};
use rnng::seed::DEFAULT_SEED;
use rnng::simulate::{
    cp_power_accuracy, lambda_scan, lambda_scan_power, power_study, preset, preset_defaults, Arm, HubReference, LambdaRow,
    Perturbation, PerturbationKind, PresetParams, ScenarioSpec, PRESETS,
};
use rnng::{Error, Result, SCHEMA_VERSION};

use crate::grid::parse_grid;
use crate::svg::{line_chart, Series};

#[derive(Parser, Debug)]
#[command(name = "rnng", version, about = "Robust graph-based two-sample tests and change-point detection")]
struct Cli {
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true, env = "RNNG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a similarity graph and write its edge list and statistics
    Graph(GraphArgs),
    /// Two-sample test on two CSV files or one labelled file
    Test2(Test2Args),
    /// Single change-point scan over a time-ordered CSV
    Cpd(CpdArgs),
    /// Monte-Carlo power of a scenario preset or JSON spec
    Simulate(SimulateArgs),
    /// Maximum degree (and optionally power) of the K-RNNG over a λ grid
    LambdaScan(LambdaScanArgs),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// First CSV row holds column names
    #[arg(long)]
    header: bool,
    /// Field delimiter
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

impl InputArgs {
    fn options(&self, label_column: Option<String>) -> CsvOptions {
        CsvOptions {
            has_header: self.header || label_column.is_some(),
            label_column,
            delimiter: Some(self.delimiter as u8),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct GraphOpts {
    /// knng, kmst or krnng
    #[arg(long, default_value = "krnng", value_parser = parse_graph_kind)]
    graph: GraphKind,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.3)]
    lambda: f64,
    /// euclidean, squared_euclidean or l1
    #[arg(long, default_value = "euclidean", value_parser = parse_metric)]
    metric: Metric,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct TestOpts {
    #[command(flatten)]
    graph: GraphOpts,
    /// get, wet, met or oet
    #[arg(long, default_value = "get", value_parser = parse_statistic)]
    statistic: StatisticKind,
    /// asymptotic or permutation
    #[arg(long, default_value = "asymptotic", value_parser = parse_mode)]
    mode: PValueMode,
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

impl TestOpts {
    fn config(&self) -> TestConfig {
        TestConfig {
            graph: self.graph.graph,
            k: self.graph.k,
            lambda: self.graph.lambda,
            statistic: self.statistic,
            mode: self.mode,
            permutations: self.permutations,
            seed: self.graph.seed,
            alpha: self.alpha,
            metric: self.graph.metric,
        }
    }
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    csv: InputArgs,
    #[command(flatten)]
    opts: GraphOpts,
    /// Edge list CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Graph statistics JSON
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Test2Args {
    /// Sample X
    #[arg(long, requires = "y", conflicts_with = "input")]
    x: Option<PathBuf>,
    /// Sample Y
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    /// Pooled observations with a label column
    #[arg(long, requires = "label_column")]
    input: Option<PathBuf>,
    /// Column holding X/Y or 1/2 labels in --input
    #[arg(long)]
    label_column: Option<String>,
    #[command(flatten)]
    csv: InputArgs,
    #[command(flatten)]
    test: TestOpts,
    /// Result JSON (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CpdArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    csv: InputArgs,
    #[command(flatten)]
    test: TestOpts,
    /// Boundary fraction excluded at each end of the sequence
    #[arg(long, default_value_t = 0.05)]
    window: f64,
    /// Result JSON (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// (t, statistic) curve CSV
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Line chart of the curve
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    /// Named scenario; see --list-presets
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// Scenario JSON file
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Change-point sequence length
    #[arg(long)]
    length: Option<usize>,
    /// True change point
    #[arg(long)]
    tau: Option<usize>,
    /// Signal strength, or a grid such as 0,0.5,...,2
    #[arg(long)]
    delta: Option<String>,
}

impl ScenarioArgs {
    fn params(&self, name: &str) -> PresetParams {
        let mut p = preset_defaults(name, PresetParams::default());
        if let Some(d) = self.d {
            p.d = d;
        }
        if let Some(m) = self.m {
            p.m = m;
        }
        if let Some(n) = self.n {
            p.n = n;
        }
        if let Some(l) = self.length {
            p.length = l;
            if self.tau.is_none() {
                p.tau = l / 2;
            }
        }
        if let Some(t) = self.tau {
            p.tau = t;
        }
        p
    }

    /// (δ, spec) for every point of the δ grid.
    fn specs(&self) -> Result<Vec<(Option<f64>, ScenarioSpec)>> {
        match (&self.preset, &self.spec) {
            (Some(name), _) => {
                let base = self.params(name);
                let deltas = match &self.delta {
                    Some(s) => parse_grid(s)?,
                    None => vec![base.delta],
                };
                deltas
                    .into_iter()
                    .map(|delta| Ok((Some(delta), preset(name, &PresetParams { delta, ..base })?)))
                    .collect()
            }
            (None, Some(path)) => {
                if self.delta.is_some() {
                    return Err(Error::InvalidParameter("--delta applies to presets only".into()));
                }
                let spec: ScenarioSpec = serde_json::from_reader(BufReader::new(File::open(path)?))?;
                Ok(vec![(None, spec)])
            }
            (None, None) => Err(Error::InvalidParameter("give --preset or --spec".into())),
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Print the preset names and exit
    #[arg(long)]
    list_presets: bool,
    /// Comma-separated graph kinds to compare
    #[arg(long, default_value = "knng,krnng")]
    graphs: String,
    #[command(flatten)]
    test: TestOpts,
    /// random, outlier or hub
    #[arg(long, value_parser = parse_perturbation)]
    perturb: Option<PerturbationKind>,
    #[arg(long, default_value_t = 5)]
    perturb_count: usize,
    /// Graph whose hubs are perturbed: knng or tested
    #[arg(long, default_value = "knng", value_parser = parse_hub_reference)]
    hub_reference: HubReference,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Change-point scan boundary fraction
    #[arg(long, default_value_t = 0.05)]
    window: f64,
    /// Power table CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Power curve chart over δ
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Write the resolved scenario JSON and exit
    #[arg(long)]
    print_spec: bool,
}

#[derive(Args, Debug)]
struct LambdaScanArgs {
    /// Data CSV; otherwise a scenario gives power as well
    #[arg(long, conflicts_with_all = ["preset", "spec"])]
    input: Option<PathBuf>,
    #[command(flatten)]
    csv: InputArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "0,0.1,...,1")]
    grid: String,
    #[command(flatten)]
    test: TestOpts,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Table CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn parse_graph_kind(s: &str) -> std::result::Result<GraphKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_statistic(s: &str) -> std::result::Result<StatisticKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<PValueMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_perturbation(s: &str) -> std::result::Result<PerturbationKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_hub_reference(s: &str) -> std::result::Result<HubReference, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "euclidean" => Ok(Metric::Euclidean),
        "squared_euclidean" => Ok(Metric::SquaredEuclidean),
        "l1" | "manhattan" => Ok(Metric::L1),
        other => Err(format!("unknown metric {other:?}")),
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    schema_version: u32,
    error: ErrorBody<'a>,
}

fn report_error(code: &str, message: String) {
    let body = ErrorReport {
        schema_version: SCHEMA_VERSION,
        error: ErrorBody { code, message },
    };
    eprintln!("{}", serde_json::to_string(&body).expect("error report serializes"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            report_error("usage", e.kind().to_string());
            return ExitCode::from(2);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            report_error("threads", e.to_string());
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.code(), e.to_string());
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Graph(a) => cmd_graph(a),
        Command::Test2(a) => cmd_test2(a),
        Command::Cpd(a) => cmd_cpd(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::LambdaScan(a) => cmd_lambda_scan(a),
    }
}

fn load(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    load_dataset(BufReader::new(File::open(path)?), opts)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct GraphReport {
    schema_version: u32,
    graph_summary: GraphSummary,
    diagnostics: rnng::graphs::DiagnosticsReport,
}

fn cmd_graph(a: GraphArgs) -> Result<()> {
    let ds = load(&a.input, &a.csv.options(None))?;
    let cfg = TestConfig {
        graph: a.opts.graph,
        k: a.opts.k,
        lambda: a.opts.lambda,
        seed: a.opts.seed,
        metric: a.opts.metric,
        ..TestConfig::default()
    };
    cfg.validate()?;
    let (g, descent) = Prepared::new(&ds, cfg.metric)?.graph(&cfg)?;
    let mut edges = Vec::new();
    g.write_edge_csv(&mut edges)?;
    emit(a.out.as_deref(), &edges)?;
    if let Some(path) = &a.stats {
        let report = GraphReport {
            schema_version: SCHEMA_VERSION,
            graph_summary: GraphSummary::of(&g, descent),
            diagnostics: condition_diagnostics(&g, DEFAULT_SQUARE_CAP),
        };
        std::fs::write(path, json(&report)?)?;
    }
    Ok(())
}

fn cmd_test2(a: Test2Args) -> Result<()> {
    let cfg = a.test.config();
    let result = match (&a.x, &a.y, &a.input) {
        (Some(x), Some(y), None) => {
            let opts = a.csv.options(None);
            two_sample_test(&load(x, &opts)?, &load(y, &opts)?, &cfg)?
        }
        (None, None, Some(input)) => test_pooled(&load(input, &a.csv.options(a.label_column.clone()))?, &cfg)?,
        _ => {
            return Err(Error::InvalidParameter(
                "give --x and --y, or --input with --label-column".into(),
            ))
        }
    };
    emit(a.out.as_deref(), &json(&result)?)
}

fn cmd_cpd(a: CpdArgs) -> Result<()> {
    let seq = load(&a.input, &a.csv.options(None))?;
    let cfg = ScanConfig {
        test: a.test.config(),
        window: a.window,
    };
    let res = scan(&seq, &cfg)?;
    if let Some(path) = &a.curve {
        res.write_curve_csv(File::create(path)?)?;
    }
    if let Some(path) = &a.svg {
        let points = res.curve.iter().filter_map(|p| p.statistic.map(|s| (p.t as f64, s))).collect();
        let chart = line_chart(
            "scan statistic",
            "t",
            "statistic",
            &[Series {
                name: format!("{:?}", cfg.test.statistic).to_lowercase(),
                points,
            }],
        );
        std::fs::write(path, chart)?;
    }
    emit(a.out.as_deref(), &json(&res)?)
}

fn graph_list(s: &str) -> Result<Vec<GraphKind>> {
    let kinds: Vec<GraphKind> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if kinds.is_empty() {
        return Err(Error::InvalidParameter("--graphs is empty".into()));
    }
    Ok(kinds)
}

fn graph_label(kind: GraphKind, cfg: &TestConfig) -> String {
    match kind {
        GraphKind::Knng => format!("{}-NNG", cfg.k),
        GraphKind::Kmst => format!("{}-MST", cfg.k),
        GraphKind::Krnng => format!("{}-RNNG", cfg.k),
    }
}

fn lambda_cell(cfg: &TestConfig) -> String {
    if cfg.graph == GraphKind::Krnng {
        cfg.lambda.to_string()
    } else {
        String::new()
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    if a.list_presets {
        let text: String = PRESETS.iter().map(|(n, d)| format!("{n}\t{d}\n")).collect();
        return emit(None, text.as_bytes());
    }
    let specs = a.scenario.specs()?;
    if a.print_spec {
        let all: Vec<&ScenarioSpec> = specs.iter().map(|(_, s)| s).collect();
        return emit(a.out.as_deref(), &json(&all)?);
    }
    let base = a.test.config();
    let arms: Vec<Arm> = graph_list(&a.graphs)?
        .into_iter()
        .map(|graph| Arm {
            config: TestConfig { graph, ..base.clone() },
            perturbation: a.perturb.map(|kind| Perturbation {
                kind,
                count: a.perturb_count,
                hub_reference: a.hub_reference,
            }),
        })
        .collect();
    let seed = base.seed;
    let mut rows = Vec::new();
    let mut series: Vec<Series> = arms
        .iter()
        .map(|arm| Series {
            name: graph_label(arm.config.graph, &arm.config),
            points: Vec::new(),
        })
        .collect();
    let header: &[&str];
    match &specs[0].1 {
        ScenarioSpec::TwoSample(_) => {
            header = &["delta", "graph", "k", "lambda", "power", "se", "rejections", "reps", "mean_max_degree"];
            for (delta, spec) in &specs {
                let ScenarioSpec::TwoSample(spec) = spec else { unreachable!() };
                let results = power_study(spec, &arms, a.reps, seed)?;
                for ((arm, r), s) in arms.iter().zip(results).zip(series.iter_mut()) {
                    s.points.push((delta.unwrap_or(0.0), r.estimate.power));
                    rows.push(vec![
                        opt(*delta),
                        format!("{:?}", arm.config.graph).to_lowercase(),
                        arm.config.k.to_string(),
                        lambda_cell(&arm.config),
                        r.estimate.power.to_string(),
                        r.estimate.se.to_string(),
                        r.estimate.rejections.to_string(),
                        r.estimate.reps.to_string(),
                        r.mean_max_degree.to_string(),
                    ]);
                }
            }
        }
        ScenarioSpec::ChangePoint(_) => {
            if a.perturb.is_some() {
                return Err(Error::InvalidParameter("perturbations apply to two-sample scenarios".into()));
            }
            header = &["delta", "graph", "k", "lambda", "power", "accuracy", "detections", "accurate", "reps"];
            for (delta, spec) in &specs {
                let ScenarioSpec::ChangePoint(spec) = spec else { unreachable!() };
                for (arm, s) in arms.iter().zip(series.iter_mut()) {
                    let cfg = ScanConfig {
                        test: arm.config.clone(),
                        window: a.window,
                    };
                    let r = cp_power_accuracy(spec, &cfg, a.reps, seed)?;
                    s.points.push((delta.unwrap_or(0.0), r.power));
                    rows.push(vec![
                        opt(*delta),
                        format!("{:?}", arm.config.graph).to_lowercase(),
                        arm.config.k.to_string(),
                        lambda_cell(&arm.config),
                        r.power.to_string(),
                        r.accuracy.to_string(),
                        r.detections.to_string(),
                        r.accurate.to_string(),
                        r.reps.to_string(),
                    ]);
                }
            }
        }
    }
    if let Some(path) = &a.svg {
        std::fs::write(path, line_chart("estimated power", "δ", "power", &series))?;
    }
    emit(a.out.as_deref(), &csv_table(header, &rows)?)
}

fn cmd_lambda_scan(a: LambdaScanArgs) -> Result<()> {
    let grid = parse_grid(&a.grid)?;
    let cfg = a.test.config();
    let rows: Vec<LambdaRow> = match &a.input {
        Some(path) => lambda_scan(&load(path, &a.csv.options(None))?, &grid, cfg.k, cfg.seed)?,
        None => {
            let mut specs = a.scenario.specs()?;
            if specs.len() != 1 {
                return Err(Error::InvalidParameter("lambda-scan takes a single δ".into()));
            }
            let ScenarioSpec::TwoSample(spec) = specs.remove(0).1 else {
                return Err(Error::InvalidParameter("lambda-scan needs a two-sample scenario".into()));
            };
            lambda_scan_power(&spec, &grid, &cfg, a.reps, cfg.seed)?
        }
    };
    let with_power = rows.iter().any(|r| r.power.is_some());
    let header: &[&str] = if with_power {
        &["lambda", "max_degree", "power"]
    } else {
        &["lambda", "max_degree"]
    };
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.lambda.to_string(), r.max_degree.to_string()];
            if with_power {
                v.push(opt(r.power));
            }
            v
        })
        .collect();
    if let Some(path) = &a.svg {
        let series = [Series {
            name: "max degree".into(),
            points: rows.iter().map(|r| (r.lambda, r.max_degree)).collect(),
        }];
        std::fs::write(path, line_chart("maximum degree", "λ", "max degree", &series))?;
    }
    emit(a.out.as_deref(), &csv_table(header, &table)?)
}
