use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use wfgl::io::{read_paired, read_table};
use wfgl::pipeline::{estimate, EdgeCounts, EstimateOptions, WeightSource};
use wfgl::screening::{screen, ScreenConfig};
use wfgl::weights::PsiEstimator;

fn wfgl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfgl")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = wfgl(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path) {
    ok(&["simulate", "--out", s(dir), "--seed", "7", "--p", "20", "--n", "80"]);
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn counts(v: &Value) -> EdgeCounts {
    serde_json::from_value(v.clone()).unwrap()
}

fn estimate_args(sim: &Path, out: &Path) -> Vec<String> {
    let (x, y) = (sim.join("data_x.tsv"), sim.join("data_y.tsv"));
    ["estimate", "--x", s(&x), "--y", s(&y), "--out", s(out)].map(String::from).into()
}

fn extend(mut args: Vec<String>, extra: &[&str]) -> Vec<String> {
    args.extend(extra.iter().map(|a| a.to_string()));
    args
}

fn strs(args: &[String]) -> Vec<&str> {
    args.iter().map(String::as_str).collect()
}

#[test]
fn simulate_writes_all_files_reproducibly() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(a.path());
    simulate(b.path());
    for f in ["data_x.tsv", "data_y.tsv", "truth_edges.tsv", "truth_omega_joint.tsv", "model.json"] {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert!(!x.is_empty(), "{f} is empty");
        assert_eq!(x, y, "{f} differs between runs");
    }
}

#[test]
fn invalid_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out_dir = dir.path().join("est");
    let args = extend(estimate_args(dir.path(), &out_dir), &["--alpha1", "1.5"]);
    let out = wfgl(&strs(&args));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1.5"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[admm]\nrhoo = 2.0\n").unwrap();
    let out = wfgl(&["--config", s(&cfg), "simulate", "--out", s(&dir.path().join("sim"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rhoo"));
}

#[test]
fn mismatched_shapes_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x.tsv"), dir.path().join("y.tsv"));
    fs::write(&x, "a\tb\n1\t2\n3\t4\n5\t7\n").unwrap();
    fs::write(&y, "a\tb\n1\t2\n3\t4\n").unwrap();
    let out = wfgl(&["estimate", "--x", s(&x), "--y", s(&y), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn estimate_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out_dir = dir.path().join("est");
    ok(&strs(&estimate_args(dir.path(), &out_dir)));
    let sum = summary(&out_dir);
    let data = read_paired(&dir.path().join("data_x.tsv"), &dir.path().join("data_y.tsv")).unwrap();
    let lib = estimate(&data, &EstimateOptions::default()).unwrap();
    assert_eq!(counts(&sum["counts"]), EdgeCounts::of(lib.estimate()));
    assert_eq!(counts(&sum["counts_before_pruning"]), EdgeCounts::of(&lib.unpruned));
    assert_eq!(sum["lambda1"].as_f64().unwrap(), lib.unpruned.lambda1);
    let listed = fs::read_to_string(out_dir.join("common_edges.tsv")).unwrap();
    let rows = listed.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, lib.estimate().common_edges.len());
}

#[test]
fn weight_modes_follow_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let data = read_paired(&dir.path().join("data_x.tsv"), &dir.path().join("data_y.tsv")).unwrap();
    for (mode, source) in
        [("independence", WeightSource::Independence), ("paired", WeightSource::Paired(PsiEstimator::RegBasedSim))]
    {
        let out_dir = dir.path().join(mode);
        let wpath = dir.path().join(format!("{mode}_weights.tsv"));
        let extra = ["--weights", mode, "--psi-estimator", "reg-based-sim", "--export-weights", s(&wpath)];
        ok(&strs(&extend(estimate_args(dir.path(), &out_dir), &extra)));
        let w = read_table(&wpath).unwrap().data;
        let off: Vec<f64> = (0..w.nrows()).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| w[(i, j)]).collect();
        if mode == "independence" {
            assert!(off.iter().all(|&v| v == 1.0));
        } else {
            assert!(off.iter().any(|&v| v > 1.0));
        }
        let lib = estimate(&data, &EstimateOptions { weights: source, ..Default::default() }).unwrap();
        assert_eq!(counts(&summary(&out_dir)["counts"]), EdgeCounts::of(lib.estimate()));
    }
}

#[test]
fn no_triangle_prune_keeps_raw_counts() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out_dir = dir.path().join("est");
    ok(&strs(&extend(estimate_args(dir.path(), &out_dir), &["--no-triangle-prune"])));
    let sum = summary(&out_dir);
    assert_eq!(sum["counts"], sum["counts_before_pruning"]);
    assert!(sum["pruning"].is_null());
}

#[test]
fn permtest_runs_requested_replicates() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out_dir = dir.path().join("perm");
    let mut args = extend(estimate_args(dir.path(), &out_dir), &["--reps", "1", "--seed", "3"]);
    args[0] = "permtest".into();
    ok(&strs(&args));
    let table = fs::read_to_string(out_dir.join("permtest_counts.tsv")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 2);
    let sum: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("permtest_summary.json")).unwrap()).unwrap();
    assert_eq!(sum["replicates"], 1);
}

#[test]
fn screen_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let (h, t) = (dir.path().join("h.tsv"), dir.path().join("t.tsv"));
    let mut hs = String::from("g1\tg2\tg3\n");
    let mut ts = hs.clone();
    for k in 0..12 {
        let a = (k as f64 * 0.7).sin();
        let b = (k as f64 * 1.3).cos();
        hs += &format!("{a}\t{}\t{b}\n", a + 0.1 * b);
        ts += &format!("{b}\t{}\t{a}\n", (k as f64).sqrt());
    }
    fs::write(&h, hs).unwrap();
    fs::write(&t, ts).unwrap();
    let out_dir = dir.path().join("screen");
    ok(&["screen", "--healthy", s(&h), "--tumor", s(&t), "--out", s(&out_dir)]);
    let (ht, tt) = (read_table(&h).unwrap(), read_table(&t).unwrap());
    let lib = screen(&ht.data, &tt.data, &ht.names, &ScreenConfig::default()).unwrap();
    let text = fs::read_to_string(out_dir.join("screen_results.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, g) in rows.iter().zip(&lib) {
        assert_eq!(row[0], g.gene);
        assert_eq!(row[3].parse::<f64>().unwrap(), g.tss);
        assert_eq!(row[6].parse::<f64>().unwrap(), g.pval_d);
        assert_eq!(row[10], g.selected.to_string());
    }
}
