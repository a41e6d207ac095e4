//! Per-step sequence descriptors used in configuration files.
//!
//! A sequence can be written as a bare number (constant), an explicit array,
//! or a formula table:
//!
//! ```toml
//! capacity = 10.0
//! sigma = [1.0, 1.0, 0.5]
//! gamma = { kind = "piecewise-linear", knots = [[0, 0.5], [50, 1.0], [100, 0.5]] }
//! kappa = { kind = "constant", value = 2.0 }
//! ```
//!
//! Piecewise-linear sequences interpolate between knots `(t, value)` and hold
//! the end values outside the knot range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceSpec {
    Scalar(f64),
    Explicit(Vec<f64>),
    Formula(Formula),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Formula {
    Constant { value: f64 },
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

impl SequenceSpec {
    pub fn constant(value: f64) -> Self {
        SequenceSpec::Formula(Formula::Constant { value })
    }

    pub fn piecewise_linear(knots: Vec<[f64; 2]>) -> Self {
        SequenceSpec::Formula(Formula::PiecewiseLinear { knots })
    }

    /// Materializes the first `len` values (time indices `0..len`).
    pub fn evaluate(&self, len: usize) -> Result<Vec<f64>> {
        let values = match self {
            SequenceSpec::Scalar(v) | SequenceSpec::Formula(Formula::Constant { value: v }) => {
                vec![*v; len]
            }
            SequenceSpec::Explicit(values) => {
                if values.len() < len {
                    return Err(Error::Config(format!(
                        "explicit sequence has {} values, need {}",
                        values.len(),
                        len
                    )));
                }
                values[..len].to_vec()
            }
            SequenceSpec::Formula(Formula::PiecewiseLinear { knots }) => {
                if knots.is_empty() {
                    return Err(Error::Config("piecewise-linear sequence without knots".into()));
                }
                if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::Config(
                        "piecewise-linear knots must have strictly increasing t".into(),
                    ));
                }
                (0..len).map(|t| interpolate(knots, t as f64)).collect()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sequence"));
        }
        Ok(values)
    }
}

fn interpolate(knots: &[[f64; 2]], t: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first[0] {
        return first[1];
    }
    if t >= last[0] {
        return last[1];
    }
    let i = knots.partition_point(|k| k[0] <= t);
    let [t0, v0] = knots[i - 1];
    let [t1, v1] = knots[i];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}
