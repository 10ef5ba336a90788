use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tree_ising::{load_model, MeanParamIsing};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tree-ising"))
}

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Rows of the first CSV table in `text`, header dropped.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn mean_model(name: &str) -> MeanParamIsing {
    let file = load_model(&model(name)).unwrap();
    file.spec.to_mean(file.root).unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = run(&[
        "validate",
        "--model",
        model("symmetric_chain.toml").to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("ok:"));

    let bad = run(&[
        "validate",
        "--model",
        model("inadmissible.toml").to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).contains("alpha = 0.2"));

    let missing = run(&["validate", "--model", "no/such/file.toml"]);
    assert_eq!(missing.status.code(), Some(1));

    let usage = run(&["pmf-sum"]);
    assert_eq!(usage.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_model_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.toml");
    std::fs::write(
        &path,
        "vertices = [\"a\", \"b\"]\nq = 0.5\nedges = [[\"a\", \"c\", 0.1]]\n",
    )
    .unwrap();
    let out = run(&["pmf-sum", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pmf_sum_matches_enumeration() {
    let path = model("symmetric_chain.toml");
    let out = run(&["pmf-sum", "--model", path.to_str().unwrap()]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    let want = mean_model("symmetric_chain.toml")
        .brute_force_sum_pmf()
        .unwrap();
    assert_eq!(rows.len(), want.len());
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k.to_string());
        // printed with 9 significant digits
        assert!((num(&row[1]) - want.prob(k)).abs() < 1e-9);
    }
}

#[test]
fn pmf_sum_golden() {
    // K on the fair five-chain is symmetric about 5/2; values from a separate
    // enumeration of the 32 states with Pr(1 | x) = 1/2 +- alpha/2
    let path = model("symmetric_chain.toml");
    let out = run(&[
        "pmf-sum",
        "--model",
        path.to_str().unwrap(),
        "--n-fft",
        "64",
    ]);
    assert_eq!(
        stdout(&out),
        "k,p\n0,7.98000000e-2\n1,1.20800000e-1\n2,2.99400000e-1\n\
         3,2.99400000e-1\n4,1.20800000e-1\n5,7.98000000e-2\n"
    );
}

#[test]
fn pmf_sum_json_mirrors_csv() {
    let path = model("star_natural.toml");
    let csv = stdout(&run(&["pmf-sum", "--model", path.to_str().unwrap()]));
    let json = stdout(&run(&[
        "pmf-sum",
        "--model",
        path.to_str().unwrap(),
        "--json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = v["pmf_sum"]["rows"].as_array().unwrap();
    for (row, line) in rows.iter().zip(csv_rows(&csv)) {
        assert!((row["p"].as_f64().unwrap() - num(&line[1])).abs() < 1e-8);
    }
}

#[test]
fn bad_fft_length_is_an_input_error() {
    let path = model("symmetric_chain.toml");
    let out = run(&[
        "pmf-sum",
        "--model",
        path.to_str().unwrap(),
        "--n-fft",
        "48",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn allocation_totals_are_k_times_pmf() {
    let path = model("star_natural.toml");
    let alloc = stdout(&run(&["allocations", "--model", path.to_str().unwrap()]));
    let header: Vec<&str> = alloc.lines().next().unwrap().split(',').collect();
    assert_eq!(header, ["k", "hub", "x", "y", "z", "total"]);
    let pmf = mean_model("star_natural.toml")
        .brute_force_sum_pmf()
        .unwrap();
    for row in csv_rows(&alloc) {
        let k: usize = row[0].parse().unwrap();
        let parts: f64 = row[1..5].iter().map(|s| num(s)).sum();
        assert!((num(&row[5]) - k as f64 * pmf.prob(k)).abs() < 1e-8);
        assert!((parts - num(&row[5])).abs() < 1e-8);
    }
    let one = run(&[
        "allocations",
        "--model",
        path.to_str().unwrap(),
        "--vertex",
        "nope",
    ]);
    assert_eq!(one.status.code(), Some(1));
}

#[test]
fn convert_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let src = model("star_natural.toml");
    let mut prev = src.clone();
    for (i, to) in ["mean", "canonical", "centered", "natural"]
        .iter()
        .enumerate()
    {
        let next = dir.path().join(format!("{i}.toml"));
        let out = run(&[
            "convert",
            "--model",
            prev.to_str().unwrap(),
            "--to",
            to,
            "--output",
            next.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        prev = next;
    }
    let a = mean_model("star_natural.toml");
    let file = load_model(&prev).unwrap();
    let b = file.spec.to_mean(file.root).unwrap();
    for (x, y) in a.q().iter().zip(b.q()) {
        assert!((x - y).abs() < 1e-10);
    }
    for (x, y) in a.alpha().iter().zip(b.alpha()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn sampling_is_reproducible() {
    let path = model("symmetric_chain.toml");
    let args = |seed: &str, method: &str| {
        stdout(&run(&[
            "sample",
            "--model",
            path.to_str().unwrap(),
            "--n",
            "500",
            "--seed",
            seed,
            "--method",
            method,
            "--realizations",
        ]))
    };
    assert_eq!(args("3", "direct"), args("3", "direct"));
    assert_ne!(args("3", "direct"), args("4", "direct"));
    assert_eq!(args("3", "symmetric-flip"), args("3", "symmetric-flip"));
    assert_eq!(csv_rows(&args("3", "direct")).len(), 500);
}

#[test]
fn symmetric_flip_needs_fair_marginals() {
    let path = model("binary7_q01.toml");
    let out = run(&[
        "sample",
        "--model",
        path.to_str().unwrap(),
        "--method",
        "symmetric-flip",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn interval_output_brackets_the_pmf() {
    let path = model("symmetric_chain.toml");
    let out = run(&[
        "sample",
        "--model",
        path.to_str().unwrap(),
        "--n",
        "2000",
        "--reps",
        "200",
        "--level",
        "0.99",
    ]);
    assert!(out.status.success());
    let exact = mean_model("symmetric_chain.toml")
        .brute_force_sum_pmf()
        .unwrap();
    for row in csv_rows(&stdout(&out)) {
        let k: usize = row[0].parse().unwrap();
        let (lo, hi) = (num(&row[2]), num(&row[3]));
        assert!(
            lo <= exact.prob(k) && exact.prob(k) <= hi,
            "k={k}: [{lo}, {hi}]"
        );
    }
}

#[test]
fn poisson_compare_reports_bound() {
    let path = model("binary7_q01.toml");
    let out = run(&["poisson-compare", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let summary = text.split("\n\n").nth(1).unwrap();
    let metric = |name: &str| {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{name},")))
            .unwrap()
            .to_string()
    };
    assert!(num(&metric("tv_distance")) <= num(&metric("tv_bound")));
    assert_eq!(metric("convex_order"), "true");

    let mixed = run(&[
        "poisson-compare",
        "--model",
        model("symmetric_chain.toml").to_str().unwrap(),
    ]);
    assert_eq!(mixed.status.code(), Some(2));
}

#[test]
fn reproduce_tables_matches_published_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reproduce-tables", "--output", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let read = |name: &str| csv_rows(&std::fs::read_to_string(dir.path().join(name)).unwrap());

    // exact and Poisson columns, rounded as published
    let t1 = read("table1.csv");
    let exact = [0.97231, 0.01309, 0.00289, 0.01170];
    let poisson = [0.97239, 0.01307, 0.00291, 0.01164];
    for (row, (e, p)) in t1.iter().zip(exact.iter().zip(&poisson)) {
        assert!((num(&row[1]) - e).abs() <= 5e-6);
        assert!((num(&row[2]) - p).abs() <= 5e-6);
        // every interval brackets the exact value
        assert!(num(&row[3]) <= num(&row[1]) && num(&row[1]) <= num(&row[4]));
        assert!(num(&row[5]) <= num(&row[1]) && num(&row[1]) <= num(&row[6]));
    }
    let t4 = read("table4.csv");
    let pi_k = [
        0.007000, 0.004203, 0.002747, 0.001580, 0.000888, 0.000438, 0.000118, 0.0,
    ];
    for (row, want) in t4.iter().zip(&pi_k) {
        assert!((num(&row[1]) - want).abs() <= 5e-7);
        assert!(num(&row[2]) >= num(&row[1]));
    }
    assert_eq!(read("table2.csv").len(), 8);
    assert_eq!(read("table3.csv").len(), 4);
}
