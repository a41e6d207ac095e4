use std::io::Write;

use ddtrack::harness::{
    result_table, run_experiment, write_outputs, PriceSource, ScenarioConfig, Table, EXTRA_COLUMNS, RESULT_COLUMNS,
};
use ddtrack::sequence::SequenceSpec;

fn small() -> ScenarioConfig {
    ScenarioConfig {
        steps: 25,
        replications: 100,
        seed: 5,
        ..ScenarioConfig::default()
    }
}

#[test]
fn written_csv_parses_back_to_the_result() {
    let result = run_experiment(&small(), Some(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (csv, meta) = write_outputs(&result, dir.path()).unwrap();

    let table = Table::parse(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    let expected: Vec<&str> = RESULT_COLUMNS.iter().chain(EXTRA_COLUMNS.iter()).copied().collect();
    assert_eq!(table.header, expected);
    assert_eq!(table.rows.len(), 25);
    assert_eq!(table.column("mean_err_greedy").unwrap(), result.greedy.mean_err);
    assert_eq!(table.column("env_hp").unwrap(), result.greedy.env_hp);
    assert_eq!(table.column("phi").unwrap(), result.phi);
    assert_eq!(table, result_table(&result));

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(meta).unwrap()).unwrap();
    assert_eq!(doc["seed"], 5);
    assert_eq!(doc["config_hash"], result.config_hash.as_str());
    assert_eq!(doc["xi"]["lazy"]["nu"].as_array().unwrap().len(), 25);
    assert_eq!(doc["config"]["steps"], 25);
    assert!(doc["wall_time_secs"].as_f64().unwrap() >= 0.0);
}

#[test]
fn same_seed_same_numbers_different_seed_different_numbers() {
    let a = run_experiment(&small(), None).unwrap();
    let b = run_experiment(&small(), Some(1)).unwrap();
    assert_eq!(result_table(&a).to_csv(), result_table(&b).to_csv());
    let c = run_experiment(&ScenarioConfig { seed: 6, ..small() }, None).unwrap();
    assert_ne!(result_table(&a).to_csv(), result_table(&c).to_csv());
}

#[test]
fn price_file_drives_the_map_sensitivity() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "price_usd_per_kwh").unwrap();
    for t in 0..25 {
        writeln!(f, "{}", 0.02 + 0.001 * t as f64).unwrap();
    }
    let cfg = ScenarioConfig {
        prices: PriceSource::File {
            path: f.path().to_path_buf(),
        },
        ..small()
    };
    let r = run_experiment(&cfg, Some(1)).unwrap();
    assert!((r.prices[24] - 0.044).abs() < 1e-15);
    assert_eq!(r.exact_domination_violations, 0);
    assert_eq!(r.infeasible_iterates, 0);
}

#[test]
fn config_file_paths_resolve_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.csv"), "0.05\n".repeat(10)).unwrap();
    let cfg_path = dir.path().join("scenario.toml");
    std::fs::write(
        &cfg_path,
        "steps = 10\nreplications = 3\n[prices]\nsource = \"file\"\npath = \"p.csv\"\n",
    )
    .unwrap();
    let cfg = ScenarioConfig::from_file(&cfg_path).unwrap();
    let r = run_experiment(&cfg, Some(1)).unwrap();
    assert_eq!(r.prices, vec![0.05; 10]);
}

#[test]
fn non_contractive_steps_are_flagged_not_fatal() {
    // eta = 0.6 with alpha = beta = 4 gives rho = 1.4
    let cfg = ScenarioConfig {
        eta: SequenceSpec::Scalar(0.6),
        replications: 2,
        ..small()
    };
    let r = run_experiment(&cfg, Some(1)).unwrap();
    assert_eq!(r.envelope_invalid_steps.len(), 25);
}

#[test]
fn shipped_scenario_file_matches_defaults() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/ev_default.toml");
    assert_eq!(ScenarioConfig::from_file(&path).unwrap(), ScenarioConfig::default());
}
