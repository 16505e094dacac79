use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use leakfit::walkthrough::{COTTON_STATES, COTTON_TRANSACTIONS, TARGET_ORDER};
use tempfile::TempDir;

fn leakfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leakfit"))
        .args(args)
        .env_remove("LEAKFIT_CONFIG")
        .env_remove("LEAKFIT_RELEASE")
        .env_remove("LEAKFIT_OUT")
        .env_remove("LEAKFIT_GROUND_TRUTH")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = leakfit(args);
    assert!(
        out.status.success(),
        "leakfit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: [&str; 8] = ["--transactions", "1500", "--importers", "120", "--cities", "40", "--sh4-codes", "60"];

fn gen_small(dir: &Path, seed: &str, extra: &[&str]) -> String {
    let mut args = vec!["gen", "--out", s(dir), "--seed", seed];
    args.extend(SMALL);
    args.extend(extra);
    ok(&args)
}

fn release_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn gen_is_reproducible_and_seed_sensitive() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let stats_a = gen_small(&a, "42", &[]);
    let stats_b = gen_small(&b, "42", &[]);
    gen_small(&c, "43", &[]);
    let files = release_files(&a);
    assert_eq!(files.len(), 5);
    assert_eq!(files, release_files(&b));
    assert_eq!(stats_a.replace(s(&a), ""), stats_b.replace(s(&b), ""));
    assert_ne!(files, release_files(&c));
}

#[test]
fn without_suppression_the_microdata_is_complete() {
    let tmp = TempDir::new().unwrap();
    gen_small(tmp.path(), "5", &["--no-suppression"]);
    assert_eq!(
        rows(&tmp.path().join("deidentified_transactions.csv")),
        rows(&tmp.path().join("ground_truth.csv"))
    );
}

#[test]
fn walkthrough_target_is_reidentified() {
    let tmp = TempDir::new().unwrap();
    let (w, a) = (tmp.path().join("w"), tmp.path().join("a"));
    ok(&["gen", "--walkthrough", "--out", s(&w)]);
    let truth = w.join("ground_truth.csv");
    let summary = ok(&[
        "attack", "--release", s(&w), "--out", s(&a), "--target", TARGET_ORDER,
        "--ground-truth", s(&truth),
    ]);
    assert!(summary.contains("precision of certain verdicts: 1/1"), "{summary}");
    let traces = fs::read_to_string(a.join("traces.csv")).unwrap();
    let row = traces.lines().nth(1).unwrap();
    assert!(row.starts_with(&format!("{TARGET_ORDER},52083900,CHINA,")));
    assert!(row.contains(",certain,"));
    assert!(row.contains(",MINAS GERAIS,OURO BRANCO,"));
    let leakage = fs::read_to_string(a.join("leakage.csv")).unwrap();
    assert!(leakage.contains(",phase3,1,100%,326,18430"), "{leakage}");
    assert_eq!(fs::read_to_string(a.join("summary.txt")).unwrap(), summary);
}

#[test]
fn attack_outputs_are_byte_identical_across_runs_and_workers() {
    let tmp = TempDir::new().unwrap();
    let w = tmp.path().join("w");
    gen_small(&w, "3", &["--single-importer-city-fraction", "0.2"]);
    let truth = w.join("ground_truth.csv");
    let mut outs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = tmp.path().join(name);
        let summary = ok(&[
            "attack", "--release", s(&w), "--out", s(&out), "--ground-truth", s(&truth),
            "--sample", "300", "--seed", "9", "--workers", workers,
        ]);
        assert!(summary.contains("targets: 300"), "{summary}");
        outs.push(release_files(&out));
    }
    assert_eq!(outs[0].len(), 4);
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn failed_targets_exit_nonzero_and_partial_output_needs_the_flag() {
    let tmp = TempDir::new().unwrap();
    let w = tmp.path().join("w");
    ok(&["gen", "--walkthrough", "--out", s(&w)]);

    let a = tmp.path().join("a");
    let out = leakfit(&["attack", "--release", s(&w), "--out", s(&a), "--target", TARGET_ORDER, "--target", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 of 2 targets failed"));
    assert!(!a.exists());

    let b = tmp.path().join("b");
    let out = leakfit(&[
        "attack", "--release", s(&w), "--out", s(&b), "--target", TARGET_ORDER, "--target", "0",
        "--keep-partial",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(rows(&b.join("traces.csv")), 1);
}

#[test]
fn run_file_supplies_settings_and_flags_override_it() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    let from_file = tmp.path().join("from_file");
    fs::write(
        &cfg,
        format!("seed = 11\nout = \"{}\"\ntransactions = 800\nimporters = 60\ncities = 20\n", s(&from_file)),
    )
    .unwrap();
    ok(&["--config", s(&cfg), "gen"]);
    assert_eq!(rows(&from_file.join("ground_truth.csv")), 800);

    let from_flag = tmp.path().join("from_flag");
    ok(&["--config", s(&cfg), "gen", "--out", s(&from_flag), "--transactions", "900"]);
    assert_eq!(rows(&from_flag.join("ground_truth.csv")), 900);

    fs::write(&cfg, "sead = 11\n").unwrap();
    let out = leakfit(&["--config", s(&cfg), "gen"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sead"));
}

#[test]
fn paths_come_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let w = tmp.path().join("w");
    let out = Command::new(env!("CARGO_BIN_EXE_leakfit"))
        .args(["gen", "--walkthrough"])
        .env("LEAKFIT_OUT", &w)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(release_files(&w).len(), 5);
}

#[test]
fn gen_requires_a_seed() {
    let tmp = TempDir::new().unwrap();
    let out = leakfit(&["gen", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn malformed_release_reports_the_row() {
    let tmp = TempDir::new().unwrap();
    let w = tmp.path().join("w");
    ok(&["gen", "--walkthrough", "--out", s(&w)]);
    let path = w.join("deidentified_transactions.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[3] = lines[3].replacen(',', ",x", 3);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = leakfit(&["audit", "--release", s(&w)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 4"), "{err}");
}

#[test]
fn audit_prints_every_bucket() {
    let tmp = TempDir::new().unwrap();
    let w = tmp.path().join("w");
    gen_small(&w, "8", &["--outlier-rate", "0.05"]);
    let report = ok(&["audit", "--release", s(&w), "--out", s(&w)]);
    for label in ["suppressed", "abs_diff_below_2", "diff_at_least_2", "diff_at_most_minus_2", "total"] {
        assert!(report.contains(label), "{report}");
    }
    assert!(w.join("audit.csv").exists());
}

fn cotton_files(dir: &Path) -> (String, String) {
    let mut packages = String::from("id,value,weight\n");
    for (id, v, w) in COTTON_TRANSACTIONS {
        packages += &format!("{id},{v},{w}\n");
    }
    let mut bins = String::from("id,value,weight,tol_value,tol_weight\n");
    for (id, v, w) in COTTON_STATES {
        bins += &format!("{id},{v},{w},0.5,0.5\n");
    }
    let (p, b) = (dir.join("packages.csv"), dir.join("bins.csv"));
    fs::write(&p, packages).unwrap();
    fs::write(&b, bins).unwrap();
    (s(&p).to_string(), s(&b).to_string())
}

#[test]
fn solve_enumerates_the_cotton_target() {
    let tmp = TempDir::new().unwrap();
    let (p, b) = cotton_files(tmp.path());
    let out = ok(&["solve", "--packages", &p, "--bins", &b, "--target", TARGET_ORDER, "--enumerate"]);
    assert!(out.contains("feasible bins: MINAS GERAIS\n"), "{out}");
    assert!(out.contains("complete: true"));

    let pinned = ok(&["solve", "--packages", &p, "--bins", &b, "--target", TARGET_ORDER, "--target-bin", "CEARA"]);
    assert!(pinned.contains("infeasible"), "{pinned}");

    let gated = leakfit(&["solve", "--packages", &p, "--bins", &b, "--cap", "5"]);
    assert_eq!(gated.status.code(), Some(1));
    let forced = ok(&["solve", "--packages", &p, "--bins", &b, "--cap", "5", "--force"]);
    assert!(forced.contains(&format!("{TARGET_ORDER},MINAS GERAIS")), "{forced}");
}

#[test]
fn bench_writes_a_ladder() {
    let tmp = TempDir::new().unwrap();
    let table = ok(&["bench", "--out", s(tmp.path()), "--max-complexity", "4", "--reps", "2", "--bins", "2,3"]);
    assert!(table.starts_with("complexity"));
    let csv = fs::read_to_string(tmp.path().join("ladder.csv")).unwrap();
    assert!(csv.starts_with("complexity,packages,bins,outcome,seconds,solves\n"));
    assert!(csv.lines().skip(1).all(|l| l.contains(",solved,")), "{csv}");
}
