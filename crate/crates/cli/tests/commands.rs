use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn ddtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddtrack")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn bounds_geometric_series() {
    let out = ddtrack(&["bounds", "--lambda", "0.5", "--phi", "1", "--e0", "0", "--steps", "50"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 51);
    assert!((rows[50][1] - 2.0).abs() < 1e-6);
}

#[test]
fn bounds_markov_is_expectation_over_delta() {
    let out = ddtrack(&[
        "bounds", "--lambda", "0.4", "--phi", "0.2", "--e0", "3", "--steps", "10", "--eta", "0.3", "--xi-mean",
        "0.7", "--nu", "1", "--delta", "0.5",
    ]);
    assert!(out.status.success());
    for row in csv_rows(&stdout(&out)) {
        assert_eq!(row[4], 2.0 * row[2]);
    }
}

#[test]
fn bounds_errors_and_exit_codes() {
    let missing = ddtrack(&["bounds", "--lambda", "0.5"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("Usage"));
    let bad_delta = ddtrack(&["bounds", "--lambda", "0.5", "--phi", "1", "--e0", "0", "--steps", "5", "--delta", "1.5"]);
    assert_eq!(bad_delta.status.code(), Some(2));
    let limsup = ddtrack(&["bounds", "--lambda", "1.0", "--phi", "1", "--e0", "0", "--steps", "5", "--limsup"]);
    assert_eq!(limsup.status.code(), Some(2));
    assert_eq!(ddtrack(&["--help"]).status.code(), Some(0));
}

fn write_samples(path: &Path, samples: &[f64]) {
    let body: String = std::iter::once("xi".to_string())
        .chain(samples.iter().map(|v| format!("{v:.17e}")))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(path, body).unwrap();
}

#[test]
fn fit_tail_constant_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    write_samples(&path, &vec![-2.5; 200]);
    let out = ddtrack(&["fit-tail", "--input", path.to_str().unwrap(), "--theta", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let nu: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# nu = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((nu - 2.5).abs() < 1e-12);
}

#[test]
fn fit_tail_gaussian_bound_rows_cover_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<f64> = StandardNormal.sample_iter(&mut rng).take(5000).collect();
    write_samples(&path, &samples);
    let out = ddtrack(&["fit-tail", "--input", path.to_str().unwrap(), "--theta", "0.5"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r[3] >= r[2]));
}

#[test]
fn fit_tail_rejects_empty_and_short_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("e.csv");
    std::fs::write(&empty, "").unwrap();
    let out = ddtrack(&["fit-tail", "--input", empty.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
    let short = dir.path().join("s.csv");
    write_samples(&short, &[1.0; 10]);
    assert!(!ddtrack(&["fit-tail", "--input", short.to_str().unwrap()]).status.success());
}

#[test]
fn reproduce_ev_writes_two_files_with_100_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = ddtrack(&["reproduce-ev", "--replications", "20", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["ev_metadata.json", "ev_result.csv"]);
    let csv = std::fs::read_to_string(out_dir.join("ev_result.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.starts_with("t,mean_err_exact,mean_err_greedy,mean_err_lazy,env_opgd,env_exp,env_hp,env_markov,phi"));
}

#[test]
fn reproduce_ev_same_seed_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = dir.path().join(name);
        let out = ddtrack(&["reproduce-ev", "--seed", "7", "--replications", "20", "--out-dir", d.to_str().unwrap()]);
        assert!(out.status.success());
        std::fs::read(d.join("ev_result.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn reproduce_ev_failures() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = ddtrack(&["reproduce-ev", "--replications", "2", "--out-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "stations = -1\n").unwrap();
    let out = ddtrack(&["reproduce-ev", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_ev_reads_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "steps = 12\nreplications = 4\nseed = 3\nconstraint = \"nonneg-budget\"\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = ddtrack(&["reproduce-ev", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("ev_result.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}
