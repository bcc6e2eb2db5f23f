use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rnng(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnng"))
        .args(args)
        .env_remove("RNNG_THREADS")
        .output()
        .expect("binary runs")
}

fn lcg_rows(seed: u64, rows: usize, cols: usize, shift: f64) -> String {
    let mut s = seed;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| format!("{:.6}", next() + shift))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_code(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    let v: Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["schema_version"], 1);
    v["error"]["code"].as_str().unwrap().to_string()
}

#[test]
fn test2_reports_statistic_and_pvalue() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", &lcg_rows(1, 30, 4, 0.0));
    let y = write(dir.path(), "y.csv", &lcg_rows(2, 30, 4, 0.5));
    let out = rnng(&["test2", "--x", s(&x), "--y", s(&y), "--graph", "krnng", "--k", "5", "--lambda", "0.3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!(v["statistic"].as_f64().unwrap() > 0.0);
    let p = v["pvalue"].as_f64().unwrap();
    assert!(p < 0.01, "{p}");
    assert_eq!(v["m"], 30);
    assert_eq!(v["graph_summary"]["kind"], "krnng");
}

#[test]
fn pooled_file_with_label_column() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("a,b,group\n");
    for (i, row) in lcg_rows(3, 20, 2, 0.0).lines().enumerate() {
        body.push_str(&format!("{row},{}\n", if i < 10 { "X" } else { "Y" }));
    }
    let input = write(dir.path(), "pooled.csv", &body);
    let out = rnng(&["test2", "--input", s(&input), "--label-column", "group", "--mode", "permutation", "--permutations", "99"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mode"], "permutation");
    assert_eq!((v["m"].as_u64(), v["n"].as_u64()), (Some(10), Some(10)));
}

#[test]
fn lambda_scan_zero_row_is_knng_max_degree() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", &lcg_rows(4, 60, 20, 0.0));
    let stats = dir.path().join("stats.json");
    let edges = dir.path().join("edges.csv");
    let g = rnng(&["graph", "--input", s(&data), "--graph", "knng", "--k", "5", "--out", s(&edges), "--stats", s(&stats)]);
    assert!(g.status.success());
    let report: Value = serde_json::from_slice(&std::fs::read(&stats).unwrap()).unwrap();
    let knng_max = report["graph_summary"]["max_degree"].as_u64().unwrap();
    let edge_lines = std::fs::read_to_string(&edges).unwrap().lines().count();
    assert_eq!(edge_lines, 1 + 60 * 5);

    let scan = rnng(&["lambda-scan", "--input", s(&data), "--k", "5", "--grid", "0,0.1,...,1"]);
    assert!(scan.status.success());
    let text = String::from_utf8(scan.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,max_degree"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1].parse::<f64>().unwrap() as u64, knng_max);
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = rnng(&["test2", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(error_code(&out), "usage");
}

#[test]
fn domain_errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let missing = rnng(&["test2", "--x", "/nonexistent/a.csv", "--y", "/nonexistent/b.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(error_code(&missing), "io");

    let ragged = write(dir.path(), "r.csv", "1,2\n3\n");
    let out = rnng(&["graph", "--input", s(&ragged)]);
    assert_eq!(error_code(&out), "ragged_row");

    let tri = write(dir.path(), "t.csv", "0\n1\n3\n");
    let out = rnng(&["graph", "--input", s(&tri), "--graph", "kmst", "--k", "2"]);
    assert_eq!(error_code(&out), "kmst_exhausted");

    let short = write(dir.path(), "s.csv", &lcg_rows(5, 10, 2, 0.0));
    let out = rnng(&["cpd", "--input", s(&short)]);
    assert_eq!(error_code(&out), "invalid_parameter");
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let seq: String = format!("{}\n{}", lcg_rows(6, 30, 5, 0.0), lcg_rows(7, 30, 5, 1.0));
    let input = write(dir.path(), "seq.csv", &seq);
    let run = |threads: &str, tag: &str| {
        let curve = dir.path().join(format!("curve{tag}.csv"));
        let svg = dir.path().join(format!("curve{tag}.svg"));
        let out = rnng(&[
            "--threads", threads, "cpd", "--input", s(&input), "--permutations", "199", "--curve", s(&curve), "--svg",
            s(&svg),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (out.stdout, std::fs::read(curve).unwrap(), std::fs::read(svg).unwrap())
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("4", "c");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let v: Value = serde_json::from_slice(&a.0).unwrap();
    let tau = v["tau_hat"].as_u64().unwrap();
    assert!((25..=35).contains(&tau), "{tau}");
    assert!(String::from_utf8_lossy(&a.2).contains("<polyline"));
}

#[test]
fn simulate_writes_power_table_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("power.csv");
    let svg = dir.path().join("power.svg");
    let args = [
        "simulate", "--preset", "power_1", "--d", "5", "--m", "15", "--n", "15", "--delta", "0,4", "--reps", "50", "--k", "3",
        "--out", s(&csv), "--svg", s(&svg),
    ];
    let out = rnng(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "delta,graph,k,lambda,power,se,rejections,reps,mean_max_degree");
    assert_eq!(rows.len(), 5);
    assert!(rows[3].starts_with("4,knng,3,,"));
    let strong: f64 = rows[4].split(',').nth(4).unwrap().parse().unwrap();
    assert!(strong > 0.9);
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 2);
    assert!(rnng(&args).status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), table);
}

#[test]
fn simulate_spec_round_trip_and_presets() {
    let dir = tempfile::tempdir().unwrap();
    let listed = rnng(&["simulate", "--list-presets"]);
    assert!(String::from_utf8_lossy(&listed.stdout).contains("lambda_iii"));

    let printed = rnng(&["simulate", "--preset", "cp_2", "--delta", "0.4", "--d", "4", "--length", "40", "--print-spec"]);
    assert!(printed.status.success());
    let specs: Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert_eq!(specs[0]["kind"], "change_point");
    assert_eq!(specs[0]["tau"], 20);
    let spec_path = write(dir.path(), "spec.json", &serde_json::to_string(&specs[0]).unwrap());
    let out = rnng(&["simulate", "--spec", s(&spec_path), "--reps", "50", "--k", "3", "--permutations", "49", "--graphs", "krnng"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("delta,graph,k,lambda,power,accuracy"));

    let bad = rnng(&["simulate", "--preset", "nope"]);
    assert_eq!(error_code(&bad), "invalid_parameter");
}
