use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use super::experiment::ExperimentResult;
use crate::error::{Error, Result};

/// Leading result columns, one row per step.
pub const RESULT_COLUMNS: [&str; 9] = [
    "t",
    "mean_err_exact",
    "mean_err_greedy",
    "mean_err_lazy",
    "env_opgd",
    "env_exp",
    "env_hp",
    "env_markov",
    "phi",
];

/// Columns appended after [`RESULT_COLUMNS`]. The `env_*` columns above refer
/// to the greedy estimator; these carry the lazy envelopes and the standard
/// errors of the means.
pub const EXTRA_COLUMNS: [&str; 6] = [
    "env_exp_lazy",
    "env_hp_lazy",
    "env_markov_lazy",
    "se_err_exact",
    "se_err_greedy",
    "se_err_lazy",
];

pub const RESULT_CSV: &str = "ev_result.csv";
pub const METADATA_JSON: &str = "ev_metadata.json";

/// Formats a value with 17 significant digits so that parsing it back
/// reproduces the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A parsed CSV table: header names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Renders the table; the first column is written as an integer index.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut fields = vec![format!("{}", row[0] as u64)];
            fields.extend(row[1..].iter().map(|v| format_f64(*v)));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or(Error::EmptyInput("csv header"))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidArgument(format!("data row {}: {e}", i + 1)))?;
            if row.len() != header.len() {
                return Err(Error::InvalidArgument(format!(
                    "data row {}: {} fields, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }
}

/// The per-step result table.
pub fn result_table(result: &ExperimentResult) -> Table {
    let header = RESULT_COLUMNS
        .iter()
        .chain(EXTRA_COLUMNS.iter())
        .map(|s| s.to_string())
        .collect();
    let (g, l) = (&result.greedy, &result.lazy);
    let rows = (0..result.steps())
        .map(|t| {
            vec![
                t as f64,
                result.mean_err_exact[t],
                g.mean_err[t],
                l.mean_err[t],
                result.env_opgd[t],
                g.env_exp[t],
                g.env_hp[t],
                g.env_markov[t],
                result.phi[t],
                l.env_exp[t],
                l.env_hp[t],
                l.env_markov[t],
                result.se_err_exact[t],
                g.se_err[t],
                l.se_err[t],
            ]
        })
        .collect();
    Table { header, rows }
}

/// Metadata document: config echo, seed, hash, noise statistics, coverage,
/// validity flags and wall time.
pub fn metadata_json(result: &ExperimentResult) -> serde_json::Value {
    json!({
        "config": result.config,
        "config_hash": result.config_hash,
        "seed": result.seed,
        "replications": result.replications,
        "xi": {
            "greedy": result.greedy.xi,
            "lazy": result.lazy.xi,
        },
        "hp_coverage": {
            "greedy": result.greedy.hp_coverage,
            "lazy": result.lazy.hp_coverage,
        },
        "lambda": result.lambda,
        "prices": result.prices,
        "stable_points": result.stable_points,
        "exact_domination_violations": result.exact_domination_violations,
        "infeasible_iterates": result.infeasible_iterates,
        "envelope_invalid_steps": result.envelope_invalid_steps,
        "steady_state_ordering": result.steady_state_ordering,
        "wall_time_secs": result.wall_time_secs,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes [`RESULT_CSV`] and [`METADATA_JSON`] into `dir`, returning their paths.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let csv = dir.join(RESULT_CSV);
    let meta = dir.join(METADATA_JSON);
    write_file(&csv, &result_table(result).to_csv())?;
    let mut doc = serde_json::to_string_pretty(&metadata_json(result))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let _ = writeln!(doc);
    write_file(&meta, &doc)?;
    Ok((csv, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips_exactly() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 123456.789, 0.0, f64::MAX] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
        assert!(format_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn table_round_trips() {
        let t = Table {
            header: vec!["t".into(), "a".into(), "b".into()],
            rows: vec![vec![0.0, 0.1, 1.0 / 7.0], vec![1.0, 2.5e-17, 3.0]],
        };
        let back = Table::parse(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("b").unwrap(), vec![1.0 / 7.0, 3.0]);
        assert!(back.column("zz").is_none());
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        assert!(Table::parse("t,a\n0,1,2\n").is_err());
        assert!(Table::parse("t,a\n0,x\n").is_err());
        assert!(Table::parse("").is_err());
    }
}
