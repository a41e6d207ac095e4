use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Optional header line of a price file.
pub const PRICE_HEADER: &str = "price_usd_per_kwh";

/// Bounds of the synthetic price series, in $/kWh.
pub const SYNTH_PRICE_MIN: f64 = 0.01;
pub const SYNTH_PRICE_MAX: f64 = 0.09;

/// Five-minute steps per day.
const STEPS_PER_DAY: f64 = 288.0;

/// Reads the first `steps` prices from a file with one decimal value per line
/// (5-minute steps, $/kWh) and an optional `price_usd_per_kwh` header.
/// Blank lines are skipped; errors name the 1-based line.
pub fn load_price_series(path: &Path, steps: usize) -> Result<Vec<f64>> {
    let data_err = |reason: String| Error::Data {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| data_err(e.to_string()))?;
    let mut values = Vec::with_capacity(steps);
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let field = line.trim();
        if field.is_empty() || (row == 1 && field == PRICE_HEADER) {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| data_err(format!("row {row}: cannot parse {field:?} as a price")))?;
        if !v.is_finite() {
            return Err(data_err(format!("row {row}: non-finite price")));
        }
        if v < 0.0 {
            return Err(data_err(format!("row {row}: negative price {v}")));
        }
        values.push(v);
        if values.len() == steps {
            return Ok(values);
        }
    }
    Err(data_err(format!(
        "insufficient data: {} prices, need {steps}",
        values.len()
    )))
}

/// Smooth daily price curve with seeded AR(1) fluctuations, clamped to
/// `[SYNTH_PRICE_MIN, SYNTH_PRICE_MAX]`. Uses stream 0 of the seed.
pub fn synth_price_series(steps: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let mut noise = 0.0;
    (0..steps)
        .map(|t| {
            let w: f64 = StandardNormal.sample(&mut rng);
            noise = 0.9 * noise + 0.004 * w;
            let seasonal = 0.05 + 0.02 * (2.0 * PI * t as f64 / STEPS_PER_DAY + phase).sin();
            (seasonal + noise).clamp(SYNTH_PRICE_MIN, SYNTH_PRICE_MAX)
        })
        .collect()
}

/// Uniform draw from the sphere `{x : ||x|| = radius}` in `d` dimensions
/// (normalized Gaussian direction).
pub fn sample_sphere<R: Rng + ?Sized>(radius: f64, d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = crate::vector::norm(&dir);
        if n > 0.0 {
            return dir.iter().map(|v| radius * v / n).collect();
        }
    }
}
