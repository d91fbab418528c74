//! End-to-end acceptance checks. Each test runs one shipped scenario config
//! and asserts the published tolerances directly against the artifacts, so
//! a regression in either the library or the configs fails loudly here.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gibbslab::config::{parse_config, ExperimentConfig};
use gibbslab::report::RunArtifact;
use gibbslab::scenarios;

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> (ExperimentConfig, String) {
    let path = config_dir().join(format!("{name}.toml"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    let cfg = parse_config(&text, &[]).expect("shipped config parses");
    (cfg, text)
}

/// Runs a shipped scenario into a temp dir, asserting the wall-clock budget.
fn run_scenario(name: &str, budget: Duration) -> (RunArtifact, tempfile::TempDir) {
    let (cfg, text) = load(name);
    let dir = tempfile::tempdir().expect("tempdir");
    let started = Instant::now();
    let artifact = scenarios::run(&cfg, &text, dir.path()).expect("scenario runs");
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "{name} took {elapsed:?}, budget {budget:?}"
    );
    for v in &artifact.verdicts {
        assert!(v.pass, "{name} verdict failed: {}", v.line());
    }
    (artifact, dir)
}

fn read_csv(dir: &Path, name: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body = std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing artifact {name}: {e}"));
    let mut lines = body.lines();
    let header: Vec<String> = lines
        .next()
        .expect("header row")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}

#[test]
fn criterion_01_orlicz_suite() {
    let (_artifact, dir) = run_scenario("orlicz-suite", Duration::from_secs(10));
    let (h, rows) = read_csv(dir.path(), "conjugate_duality.csv");
    let err = column(&h, "max_rel_err");
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert!(row[err].parse::<f64>().unwrap() <= 1e-4, "duality {row:?}");
    }
    let (h, rows) = read_csv(dir.path(), "young_slack.csv");
    let slack = column(&h, "min_slack");
    for row in &rows {
        assert!(row[slack].parse::<f64>().unwrap() >= -1e-9, "young {row:?}");
    }
    let (h, rows) = read_csv(dir.path(), "herbst_bound.csv");
    let ok = column(&h, "ok");
    assert_eq!(rows.len(), 3 * 32);
    assert!(rows.iter().all(|r| r[ok] == "true"));
}

#[test]
fn criterion_02_one_site_constants() {
    let (_artifact, dir) = run_scenario("one-site-constants", Duration::from_secs(30));
    let (h, rows) = read_csv(dir.path(), "constants.csv");
    let q = column(&h, "quantity");
    let v = column(&h, "value");
    let lookup: HashMap<&str, f64> = rows
        .iter()
        .map(|r| (r[q].as_str(), r[v].parse::<f64>().unwrap()))
        .collect();
    assert!((lookup["gap"] - 1.0).abs() <= 0.002, "gap {}", lookup["gap"]);
    let ls = lookup["ls2_sup"];
    assert!((1.90..=2.01).contains(&ls), "ls2 {ls}");
    // margin = c/2 + slack - c0 must be nonnegative at slack 0.02
    assert!(lookup["half_ls_margin"] >= 0.0);
}

#[test]
fn criterion_03_tensorisation() {
    let (_artifact, dir) = run_scenario("tensorisation", Duration::from_secs(30));
    let (h, rows) = read_csv(dir.path(), "tensorisation.csv");
    let q = column(&h, "quantity");
    let v = column(&h, "value");
    let lookup: HashMap<&str, &str> = rows.iter().map(|r| (r[q].as_str(), r[v].as_str())).collect();
    let single: f64 = lookup["single_sup"].parse().unwrap();
    let product: f64 = lookup["product_sup"].parse().unwrap();
    assert!(product >= single - 1e-6, "product {product} vs single {single}");
    assert!(product <= single * 1.05, "product {product} vs single {single}");
}

#[test]
fn criterion_04_sweep_convergence() {
    let (_artifact, dir) = run_scenario("sweep-convergence", Duration::from_secs(300));
    // primary trace: strictly decreasing after step 2 until the floor
    let (h, rows) = read_csv(dir.path(), "trace_b2.csv");
    let d = column(&h, "deviation");
    let devs: Vec<f64> = rows.iter().map(|r| r[d].parse::<f64>().unwrap()).collect();
    assert!(devs.len() >= 6);
    let floor = 1e-13;
    for w in devs[2..].windows(2) {
        if w[0] > floor {
            assert!(w[1] < w[0], "deviations rose: {w:?}");
        }
    }
    // both opposite-boundary traces exist
    read_csv(dir.path(), "trace_bm2.csv");
}

#[test]
fn criterion_05_gradient_sweep() {
    let (_artifact, dir) = run_scenario("gradient-sweep", Duration::from_secs(120));
    let (h, rows) = read_csv(dir.path(), "eta.csv");
    let j = column(&h, "j0");
    let e = column(&h, "eta");
    let etas: HashMap<String, f64> = rows
        .iter()
        .map(|r| (r[j].clone(), r[e].parse::<f64>().unwrap()))
        .collect();
    assert!(etas["0.05"] < 1.0, "eta {}", etas["0.05"]);
    for (lo, hi, law) in [("0.025", "0.05", 4.0), ("0.05", "0.1", 4.0)] {
        let measured = etas[hi] / etas[lo];
        assert!(
            measured / law >= 0.5 && measured / law <= 2.0,
            "square law violated: {measured} vs {law}"
        );
    }
}

#[test]
fn criterion_06_entropy_decay() {
    let (_artifact, dir) = run_scenario("entropy-decay", Duration::from_secs(300));
    let (h, rows) = read_csv(dir.path(), "decay.csv");
    let tag = column(&h, "coupling");
    let mean = column(&h, "mean");
    let stderr = column(&h, "stderr");
    // decoupled rows vanish within noise
    for row in rows.iter().filter(|r| r[tag] == "null") {
        let m: f64 = row[mean].parse().unwrap();
        let s: f64 = row[stderr].parse().unwrap();
        assert!(m.abs() <= 3.0 * s + 1e-12, "null row {row:?}");
    }
    let (h, rows) = read_csv(dir.path(), "decay_fit.csv");
    let rate = column(&h, "rate");
    for row in &rows {
        let r: f64 = row[rate].parse().unwrap();
        assert!(r < 1.0, "fitted ratio {r}");
    }
}

#[test]
fn criterion_07_tail_product() {
    let (_artifact, dir) = run_scenario("tail-product", Duration::from_secs(120));
    let (h, rows) = read_csv(dir.path(), "tail.csv");
    let r = column(&h, "r");
    let emp = column(&h, "empirical");
    let upper = column(&h, "upper_ci");
    let valid = column(&h, "valid");
    let verdict = column(&h, "verdict");
    let oracle = rows.iter().find(|row| row[r] == "2").expect("r = 2 row");
    let e: f64 = oracle[emp].parse().unwrap();
    let u: f64 = oracle[upper].parse().unwrap();
    assert!(u >= 0.02275, "upper bound {u} excludes the normal value");
    assert!((e - 0.02275).abs() <= 0.005, "tail at 2 was {e}");
    let n_valid = rows.iter().filter(|row| row[valid] == "true").count();
    assert!(n_valid >= 10, "only {n_valid} valid radii");
    for row in rows.iter().filter(|row| row[valid] == "true") {
        assert_eq!(row[verdict], "PASS", "dominance violated at {row:?}");
    }
}

#[test]
fn criterion_08_gibbs_tail_and_enlargement() {
    let budget = Duration::from_secs(600);
    let started = Instant::now();
    let (_t, tdir) = run_scenario("tail-gibbs", budget);
    let (h, rows) = read_csv(tdir.path(), "tail.csv");
    let valid = column(&h, "valid");
    let verdict = column(&h, "verdict");
    let n_valid = rows.iter().filter(|row| row[valid] == "true").count();
    assert!(n_valid >= 10);
    for row in rows.iter().filter(|row| row[valid] == "true") {
        assert_eq!(row[verdict], "PASS");
    }

    let (_e, edir) = run_scenario("enlargement", budget - started.elapsed());
    let (h, rows) = read_csv(edir.path(), "enlargement.csv");
    let c = column(&h, "complement");
    let b = column(&h, "bound");
    for row in &rows {
        let comp: f64 = row[c].parse().unwrap();
        let bound: f64 = row[b].parse().unwrap();
        assert!(comp <= bound + 1e-12, "enlargement exceeded bound: {row:?}");
    }
    assert!(started.elapsed() <= budget, "criterion 8 over budget");
}

#[test]
fn criterion_08_talagrand_two_ball() {
    let (_artifact, dir) = run_scenario("talagrand", Duration::from_secs(600));
    let (h, rows) = read_csv(dir.path(), "talagrand.csv");
    let m = column(&h, "member_fraction");
    let f = column(&h, "floor");
    let mut prev = 0.0f64;
    for row in &rows {
        let frac: f64 = row[m].parse().unwrap();
        let floor: f64 = row[f].parse().unwrap();
        assert!(frac >= floor - 1e-12, "below floor: {row:?}");
        assert!(frac >= prev - 1e-12, "not monotone: {row:?}");
        prev = frac;
    }
}

#[test]
fn criterion_09_perturbation_pipeline() {
    let (_artifact, dir) = run_scenario("perturbation-s3", Duration::from_secs(900));
    let (h, rows) = read_csv(dir.path(), "perturbed_ls.csv");
    let g = column(&h, "grid_n");
    let needed = column(&h, "needed");
    // R-hat per resolution = max of per-boundary needed constants
    let mut by_grid: HashMap<String, f64> = HashMap::new();
    for row in &rows {
        let v: f64 = row[needed].parse().unwrap();
        let e = by_grid.entry(row[g].clone()).or_insert(0.0);
        *e = e.max(v);
    }
    assert_eq!(by_grid.len(), 2, "two grid resolutions expected");
    let vals: Vec<f64> = by_grid.values().cloned().collect();
    assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
    let hi = vals[0].max(vals[1]);
    assert!(
        (vals[0] - vals[1]).abs() <= 0.1 * hi,
        "resolution drift: {vals:?}"
    );

    let (h, rows) = read_csv(dir.path(), "penalty_moment.csv");
    let k = column(&h, "k_check");
    let kv: f64 = rows[0][k].parse().unwrap();
    assert!(kv.is_finite() && kv > 0.0, "moment bound {kv}");

    let (h, rows) = read_csv(dir.path(), "enlargement.csv");
    let c = column(&h, "complement");
    let b = column(&h, "bound");
    for row in &rows {
        let comp: f64 = row[c].parse().unwrap();
        let bound: f64 = row[b].parse().unwrap();
        assert!(comp <= bound + 1e-12, "4/3-gauge row {row:?}");
    }
}

/// Byte-identical CSVs on re-run with the same seed, independent of the
/// worker count. Exercises the installed binary end to end.
#[test]
fn criterion_10_determinism() {
    let bin = env!("CARGO_BIN_EXE_gibbslab");
    let config = config_dir().join("tail-product.toml");
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&d1, "1"), (&d2, "4")] {
        let status = std::process::Command::new(bin)
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path())
            .args(["--workers", workers])
            .status()
            .expect("binary runs");
        assert!(status.success(), "run exited with {status}");
    }
    let mut names: Vec<String> = std::fs::read_dir(d1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert!(names.len() >= 2, "expected several CSV artifacts");
    for name in &names {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }

    // in-process re-run of a second scenario reproduces hashes exactly
    let (cfg, text) = load("gradient-sweep");
    let e1 = tempfile::tempdir().unwrap();
    let e2 = tempfile::tempdir().unwrap();
    let a1 = scenarios::run(&cfg, &text, e1.path()).unwrap();
    let a2 = scenarios::run(&cfg, &text, e2.path()).unwrap();
    assert_eq!(a1.csv_hashes, a2.csv_hashes);
}
