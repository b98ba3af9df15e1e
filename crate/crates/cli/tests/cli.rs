use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use arvar_cli::fit::load_model;

fn arvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arvar")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn score_single_standard_normal() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.csv", "mu,sigma,y_obs\n0,1,0\n");
    let out_dir = dir.path().join("out");
    let o = arvar(&["score", &f, "--out-dir", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("mean_crps 0.233695"), "{text}");
    assert!(text.contains("nlpd 0.918939"), "{text}");
    let csv = fs::read_to_string(out_dir.join("score.csv")).unwrap();
    assert!(csv.contains("mean_crps,0.233695"));
    for line in csv.lines().skip(1) {
        let (k, v) = line.split_once(',').unwrap();
        assert!(text.contains(&format!("{k} {v}")), "{k} disagrees");
    }
}

#[test]
fn score_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.csv", "mu,sigma,y_obs\n");
    let o = arvar(&["score", &empty]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write(dir.path(), "b.csv", "mu,sigma,y_obs\n0,1,0\n0,abc,1\n");
    let o = arvar(&["score", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":3:"), "{}", stderr(&o));

    let neg = write(dir.path(), "n.csv", "mu,sigma,y_obs\n0,1,0\n0,1,0\n0,-1,1\n");
    let o = arvar(&["score", &neg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":4:"), "{}", stderr(&o));

    let header = write(dir.path(), "h.csv", "mean,sd,y\n0,1,0\n");
    assert_eq!(arvar(&["score", &header]).status.code(), Some(2));
    assert_eq!(arvar(&["score", "/nonexistent/file.csv"]).status.code(), Some(2));
}

#[test]
fn gen_then_fit_polynomial_on_g() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = arvar(&["gen", "--datasets", "G", "--n", "500", "--seed", "3", "--out-dir", d]);
    assert!(o.status.success(), "{}", stderr(&o));
    let errors = dir.path().join("G_errors.csv");
    let fit_dir = dir.path().join("fit");
    let o = arvar(&["fit", errors.to_str().unwrap(), "--model", "poly", "--out-dir", fit_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = load_model(&fit_dir.join("model.json")).unwrap().model;
    let mid = model.predict_sigma(&[0.5]).unwrap();
    assert!((mid - 0.75).abs() <= 0.1, "σ̂(0.5) = {mid}");
    let rows = fs::read_to_string(fit_dir.join("sigma.csv")).unwrap();
    assert!(rows.starts_with("x1,sigma\n"));
    assert_eq!(rows.lines().count(), 501);
}

#[test]
fn fit_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(arvar(&["gen", "--datasets", "Y", "--n", "60", "--out-dir", d]).status.success());
    let input = dir.path().join("Y_errors.csv");
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = arvar(&["fit", input.to_str().unwrap(), "--model", "nn", "--seed", seed, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        (fs::read(out.join("model.json")).unwrap(), fs::read(out.join("sigma.csv")).unwrap())
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a.0, run("c", "12").0);
}

#[test]
fn polynomial_on_five_inputs_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(arvar(&["gen", "--datasets", "5D", "--n", "20", "--out-dir", d]).status.success());
    let input = dir.path().join("5D_errors.csv");
    let o = arvar(&["fit", input.to_str().unwrap(), "--model", "poly", "--out-dir", d]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("1-D"), "{}", stderr(&o));
}

#[test]
fn per_point_fit_predicts_nearest_level() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "e.csv", "x1,x2,eps\n0,0,0.1\n1,1,-0.8\n0,1,0.3\n1,0,-0.2\n");
    let out = dir.path().join("out");
    let o = arvar(&["fit", &f, "--model", "per-point", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = load_model(&out.join("model.json")).unwrap().model;
    let sig = fs::read_to_string(out.join("sigma.csv")).unwrap();
    let second: f64 = sig.lines().nth(2).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(model.predict_sigma(&[0.9, 1.1]).unwrap(), second);
}

#[test]
fn bench_writes_table_and_records_unsupported_cells() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = arvar(&[
        "bench", "--runs", "3", "--datasets", "G,5D", "--estimators", "ar-poly,gp", "--out-dir", d, "--plots",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "dataset,statistic,GP,AR-Poly");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("G,1st quartile,"));
    assert_eq!(lines[4], "5D,1st quartile,,");
    let failures = fs::read_to_string(dir.path().join("failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 3, "{failures}");
    let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 3);
    assert!(dir.path().join("recovery_G_ar-poly.csv").exists());
    let svg = fs::read_to_string(dir.path().join("recovery_G_ar-poly.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn bench_with_only_unsupported_cells_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = arvar(&["bench", "--runs", "1", "--datasets", "5D", "--estimators", "ar-poly", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn printed_config_round_trips() {
    let o = arvar(&["bench", "--datasets", "W,G,G", "--estimators", "ar-nn", "--seed", "9", "--print-config"]);
    assert!(o.status.success());
    let json = stdout(&o);
    let cfg = arvar_cli::RunConfig::from_json(&json).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(format!("{}\n", cfg.to_json()), json);
}

#[test]
fn unknown_dataset_is_a_usage_error() {
    assert_eq!(arvar(&["gen", "--datasets", "Q"]).status.code(), Some(2));
}
