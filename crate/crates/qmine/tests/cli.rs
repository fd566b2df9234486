use std::path::{Path, PathBuf};

use serde_json::Value;

use qmine::cli::{run, EXIT_FAILED, EXIT_IO, EXIT_OK, EXIT_USAGE};
use qmine::harness::{bundled, Assertion, Comparator, ExperimentSpec, Tolerance};
use qmine::mining::{brute_force_frequent, MiningResult};
use qmine::oracles::Database;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qmine(args: &[&str]) -> Out {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("qmine").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Out { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn json(o: &Out) -> Value {
    assert_eq!(o.code, EXIT_OK, "stderr: {}", o.stderr);
    serde_json::from_str(&o.stdout).unwrap()
}

fn small_specs(dir: &Path, fail: bool) -> PathBuf {
    let mut specs: Vec<ExperimentSpec> = bundled("honest").unwrap();
    for s in &mut specs {
        s.trials = 40;
    }
    if fail {
        specs[0].assertions.push(Assertion::new("detection", Comparator::Ge, 0.5, Tolerance::Abs(0.0)));
    }
    let p = dir.join("specs.json");
    std::fs::write(&p, serde_json::to_string_pretty(&specs).unwrap()).unwrap();
    p
}

#[test]
fn count_reports_estimate_and_exact_support() {
    let db = data("tiny.txt");
    let v = json(&qmine(&["--seed", "7", "count", "--db", &db, "--itemset", "01", "--t", "6", "--oracle"]));
    assert_eq!(v["exact"], 0.75);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["t_eff"], 64);
    let s = v["s_combined"].as_f64().unwrap();
    assert!((s - 0.75).abs() < 0.1, "s = {s}");
}

#[test]
fn count_is_a_function_of_the_seed() {
    let db = data("basket.txt");
    let a = qmine(&["--seed", "11", "count", "--db", &db, "--itemset", "1100", "--t", "5"]);
    let b = qmine(&["--seed", "11", "count", "--db", &db, "--itemset", "1100", "--t", "5"]);
    assert_eq!(a.code, EXIT_OK);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stderr.contains("seed:"));
    let unseeded = qmine(&["count", "--db", &db, "--itemset", "1100", "--t", "5"]);
    let printed: u64 = unseeded.stderr.lines().find_map(|l| l.strip_prefix("seed: ")).unwrap().trim().parse().unwrap();
    assert_eq!(json(&unseeded)["seed"], printed);
}

#[test]
fn empty_itemset_has_full_support() {
    let v = json(&qmine(&["--seed", "3", "count", "--db", &data("basket.txt"), "--itemset", "0000", "--t", "6"]));
    assert!((v["s_combined"].as_f64().unwrap() - 1.0).abs() < 0.02);
}

#[test]
fn hidden_qubits_keep_t_eff() {
    let o = qmine(&[
        "--seed", "5", "count", "--db", &data("tiny.txt"), "--itemset", "10", "--t", "4", "--strategy", "two-confusing",
    ]);
    let v = json(&o);
    assert_eq!(v["t"], 6);
    assert_eq!(v["t_eff"], 16);
    assert!(o.stderr.contains("T_eff = 16"));
}

#[test]
fn transcript_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("run.jsonl");
    let o = qmine(&[
        "--seed", "9", "count", "--db", &data("tiny.txt"), "--itemset", "11", "--t", "4", "--p", "0.3", "--transcript",
        tp.to_str().unwrap(),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let (header, t) = qmine::protocol::read_transcript(&tp).unwrap();
    assert_eq!(header.seed, 9);
    assert_eq!(t.tests(), json(&o)["tests"].as_u64().unwrap() as usize);
}

#[test]
fn rules_match_brute_force() {
    let path = data("basket.txt");
    let o = qmine(&["--seed", "1", "mine", "--db", &path, "--s-min", "0.3", "--c-min", "0.7"]);
    let MiningResult::Rules { frequent, rules, .. } = serde_json::from_str(&json(&o).to_string()).unwrap() else {
        panic!("expected rules");
    };
    let db = Database::load(Path::new(&path)).unwrap();
    let mut got: Vec<_> = frequent.iter().flatten().map(|f| f.itemset).collect();
    got.sort();
    assert_eq!(got, brute_force_frequent(&db, 0.3));
    // bread and milk imply each other at 5/6, eggs imply milk at 3/4
    let pairs: Vec<(String, String)> = rules.iter().map(|r| (r.antecedent.to_string(), r.consequent.to_string())).collect();
    assert!(pairs.contains(&("1000".into(), "0100".into())));
    assert!(pairs.contains(&("0100".into(), "1000".into())));
    assert!(pairs.contains(&("0010".into(), "0100".into())));
    assert_eq!(pairs.len(), 3);
}

#[test]
fn zero_randomization_changes_nothing() {
    let db = data("basket.txt");
    let plain = qmine(&["--seed", "2", "mine", "--db", &db, "--s-min", "0.3"]);
    let zero = qmine(&["--seed", "2", "mine", "--db", &db, "--s-min", "0.3", "--randomize", "0"]);
    assert_eq!(plain.stdout, zero.stdout);
    let noisy = qmine(&["--seed", "2", "mine", "--db", &db, "--s-min", "0.3", "--randomize", "0.5"]);
    assert_eq!(noisy.code, EXIT_OK);
}

#[test]
fn separable_labels_give_a_stump() {
    let v = json(&qmine(&["--seed", "1", "mine", "--db", &data("labeled.txt"), "--mode", "tree"]));
    assert_eq!(v["tree"]["node"], "split");
    assert_eq!(v["tree"]["attribute"], 0);
    assert_eq!(v["tree"]["zero"]["label"], false);
    assert_eq!(v["tree"]["one"]["label"], true);
}

#[test]
fn attack_exit_reflects_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let ok = small_specs(dir.path(), false);
    let o = qmine(&["--seed", "4", "attack", "--spec", ok.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let report: qmine::harness::Report = serde_json::from_str(&o.stdout).unwrap();
    assert!(report.experiments.iter().all(|e| e.seed == 4 && e.trials_run == 40));

    let bad = small_specs(dir.path(), true);
    let csv = dir.path().join("r.csv");
    let o = qmine(&["attack", "--spec", bad.to_str().unwrap(), "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_FAILED);
    assert!(o.stderr.contains("FAIL honest-test1: detection"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn verify_passes_and_catches_the_mutation() {
    let o = qmine(&["verify", "--n", "3", "--k", "3", "--t", "3"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stdout);
    assert!(o.stdout.contains("ok   bases [n=3 k=3] 21 bases (want 21)"));
    let o = qmine(&["verify", "--mutate", "g-sign"]);
    assert_eq!(o.code, EXIT_FAILED);
    assert!(o.stderr.starts_with("verification failed: "));
}

#[test]
fn usage_errors_exit_2() {
    let db = data("tiny.txt");
    for args in [
        vec!["count", "--itemset", "01"],
        vec!["count", "--db", &db, "--itemset", "011"],
        vec!["count", "--db", &db, "--itemset", "01", "--k", "3"],
        vec!["mine", "--db", &db, "--mode", "tree"],
        vec!["mine", "--db", &db, "--randomize", "0.7"],
        vec!["attack", "--bundled", "nope"],
        vec!["verify", "--n", "4"],
        vec!["frobnicate"],
    ] {
        let o = qmine(&args);
        assert_eq!(o.code, EXIT_USAGE, "{args:?}: {}", o.stderr);
    }
    let dir = tempfile::tempdir().unwrap();
    let odd = dir.path().join("odd.txt");
    std::fs::write(&odd, "01\n10\n11\n").unwrap();
    assert_eq!(qmine(&["mine", "--db", odd.to_str().unwrap()]).code, EXIT_USAGE);
    assert_eq!(qmine(&["--help"]).code, EXIT_OK);
}

#[test]
fn io_errors_exit_3() {
    let o = qmine(&["count", "--db", "/nonexistent/db.txt", "--itemset", "01"]);
    assert_eq!(o.code, EXIT_IO);
    assert!(o.stderr.contains("/nonexistent/db.txt"));
    let o = qmine(&["--seed", "1", "mine", "--db", &data("tiny.txt"), "--out", "/nonexistent/dir/out.json"]);
    assert_eq!(o.code, EXIT_IO);
    assert_eq!(qmine(&["attack", "--spec", "/nonexistent/spec.json"]).code, EXIT_IO);
}
