use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn peelmeans(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peelmeans")).args(args).output().expect("spawn peelmeans")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn gen(dir: &Path, name: &str, n: usize, k: usize, seed: u64) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap();
    let out =
        peelmeans(&["gen", "--n", &n.to_string(), "--k", &k.to_string(), "--seed", &seed.to_string(), "--out", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p.to_string()
}

#[test]
fn gen_writes_points_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "pts.csv", 12, 2, 7);
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().all(|l| l.split(',').count() == 2));
    let truth: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pts.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["labels"].as_array().unwrap().len(), 12);
    assert_eq!(truth["k"], 2);
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", 30, 3, 11);
    let b = gen(dir.path(), "b.csv", 30, 3, 11);
    let c = gen(dir.path(), "c.csv", 30, 3, 12);
    let read = |p: &str| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn run_output_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "pts.csv", 12, 2, 3);
    let args = |threads: &str| {
        peelmeans(&[
            "--threads",
            threads,
            "run",
            "--points",
            &p,
            "--epsilon",
            "0.3",
            "--override-M",
            "4",
            "--cap",
            "2000",
            "--seed",
            "5",
        ])
    };
    let one = args("1");
    let four = args("4");
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, four.stdout);
    let v = json(&one);
    let counts = &v["trials"][0]["candidate_counts"];
    assert_eq!(counts["bare"], 1);
    assert_eq!(
        counts["total"].as_u64().unwrap(),
        counts["phase1"].as_u64().unwrap() + 1 + counts["phase2"].as_u64().unwrap()
    );
}

#[test]
fn run_with_oracle_reports_ratio_and_candidates_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "pts.csv", 10, 2, 1);
    let cands = dir.path().join("c.jsonl");
    let c = cands.to_str().unwrap();
    let out = peelmeans(&[
        "run",
        "--points",
        &p,
        "--epsilon",
        "0.3",
        "--override-M",
        "4",
        "--cap",
        "5000",
        "--oracle",
        "--trials",
        "2",
        "--candidates-out",
        c,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["trials"].as_array().unwrap().len(), 2);
    let first = &v["trials"][0];
    assert!(first["ratio"].as_f64().unwrap() >= 1.0 - 1e-12);
    assert!(v["success_rate"].as_f64().is_some());

    let eval = peelmeans(&["eval", "--points", &p, "--candidates", c, "--oracle"]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let e = json(&eval);
    assert_eq!(e["best_cost"], first["best_cost"]);
    assert_eq!(e["candidates"], first["candidate_counts"]["total"]);
}

#[test]
fn balanced_constraint_gives_equal_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "pts.csv", 10, 2, 4);
    let cands = dir.path().join("c.jsonl");
    let c = cands.to_str().unwrap();
    let out = peelmeans(&[
        "run",
        "--points",
        &p,
        "--epsilon",
        "0.3",
        "--override-M",
        "3",
        "--cap",
        "2000",
        "--candidates-out",
        c,
    ]);
    assert!(out.status.success());
    let eval = peelmeans(&["eval", "--points", &p, "--candidates", c, "--constraint", "balanced:c=1"]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    assert_eq!(json(&eval)["sizes"], serde_json::json!([5, 5]));
}

#[test]
fn params_paper_faithful_exits_zero() {
    let out = peelmeans(&["params", "--epsilon", "0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["params"]["paper_faithful"], true);
    assert!((v["params"]["alpha5"].as_f64().unwrap() - 4.446_359_778_445_406).abs() < 1e-12);
}

#[test]
fn params_with_small_m_is_a_validation_failure() {
    let out = peelmeans(&["params", "--epsilon", "0.3", "--override-M", "8"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["params"]["paper_faithful"], false);
    assert!(!v["params"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(peelmeans(&["params", "--epsilon", "1.5"]).status.code(), Some(2));
    assert_eq!(peelmeans(&["run", "--points", "/nonexistent.csv", "--epsilon", "0.3"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "pts.csv", 8, 2, 0);
    let out = peelmeans(&["run", "--points", &p, "--epsilon", "0.3", "--constraint", "lopsided"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reduce_checks_identity_and_pads() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    std::fs::write(&g, "# path on five vertices\n5\n0 1\n1 2\n2 3\n3 4\n").unwrap();
    let g = g.to_str().unwrap();
    assert_eq!(peelmeans(&["reduce", "--graph", g]).status.code(), Some(2));

    let pts = dir.path().join("emb.csv");
    let out = peelmeans(&["reduce", "--graph", g, "--pad", "--points-out", pts.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["padded"], true);
    assert_eq!(v["n_vertices"], 6);
    assert_eq!(v["identity"]["holds"], true);
    // padded path P5 + isolated vertex: best bisection cuts all 4 edges
    assert_eq!(v["identity"]["max_bisection"], 4);
    let min_cost = v["identity"]["min_cost"].as_f64().unwrap();
    assert!((min_cost - (2.0 * 4.0 - 4.0 / 6.0 * 4.0)).abs() < 1e-9);
    assert_eq!(std::fs::read_to_string(pts).unwrap().lines().count(), 6);
}

#[test]
fn lemmas_with_exact_centers_pass() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "pts.csv", 40, 2, 9);
    let truth: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pts.truth.json")).unwrap()).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let labels: Vec<u64> = truth["labels"].as_array().unwrap().iter().map(|l| l.as_u64().unwrap()).collect();
    let big = if labels.iter().filter(|&&l| l == 0).count() * 2 >= labels.len() { 0 } else { 1 };
    let mean = |label: u64| {
        let mut s = [0.0f64; 2];
        let mut c = 0.0;
        for (line, &l) in text.lines().zip(&labels) {
            if l == label {
                for (acc, x) in s.iter_mut().zip(line.split(',')) {
                    *acc += x.parse::<f64>().unwrap();
                }
                c += 1.0;
            }
        }
        format!("{},{}", s[0] / c, s[1] / c)
    };
    let (c1, c2) = (mean(big), mean(1 - big));
    let out = peelmeans(&["lemmas", "--points", &p, "--epsilon", "0.05", "--c1", &c1, "--c2", &c2]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["report"]["precondition"]["name"], "c1_quality");
    assert_eq!(v["report"]["precondition"]["pass"], true);
}

#[test]
fn extend_counts_prefixes_under_small_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = gen(dir.path(), "pts.csv", 10, 3, 2);
    let out = peelmeans(&[
        "extend",
        "--points",
        &p,
        "--k",
        "3",
        "--epsilon",
        "0.3",
        "--override-M",
        "2",
        "--override-Na",
        "4",
        "--override-Nb",
        "4",
        "--extension",
        "brute",
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["prefix_count"], 37);
    assert_eq!(v["truncated"], false);
    assert!(v["ratio"].as_f64().unwrap() >= 1.0 - 1e-12);

    let uncapped = peelmeans(&["extend", "--points", &p, "--k", "3", "--epsilon", "0.3"]);
    assert_eq!(uncapped.status.code(), Some(2));
}
