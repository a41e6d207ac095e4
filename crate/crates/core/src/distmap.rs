//! Decision-dependent distributional maps, gradient evaluation under them,
//! and Wasserstein-1 distances.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::LossFamily;
use crate::vector;

/// `D(x)` with independent coordinates `z_i ~ N(mu_scale * x_i, sigma^2)`.
///
/// Shifting the decision translates the distribution, so the map is
/// `|mu_scale|`-sensitive in Wasserstein-1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLocationMap {
    mu_scale: f64,
    sigma: f64,
    dim: usize,
}

impl GaussianLocationMap {
    pub fn new(mu_scale: f64, sigma: f64, dim: usize) -> Result<Self> {
        if !mu_scale.is_finite() {
            return Err(Error::NonFinite("location slope"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma = {sigma} must be positive")));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("map dimension must be at least 1".into()));
        }
        Ok(GaussianLocationMap {
            mu_scale,
            sigma,
            dim,
        })
    }

    pub fn mu_scale(&self) -> f64 {
        self.mu_scale
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Wasserstein-1 Lipschitz constant of `x -> D(x)`.
    pub fn sensitivity(&self) -> f64 {
        self.mu_scale.abs()
    }

    /// `E[z]` under `D(x)`.
    pub fn mean(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.mu_scale * v).collect()
    }

    /// Closed-form `W1(D(x), D(y))`: the two laws differ by a translation, so
    /// the distance is the length of the mean shift.
    pub fn w1_translation(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mu_scale.abs() * vector::dist(x, y)
    }

    /// Draws `n` i.i.d. samples of `D(x)`.
    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], n: usize, step: usize, rng: &mut R) -> Result<SampleBatch> {
        self.check_dim(x)?;
        if n == 0 {
            return Err(Error::EmptyInput("sample batch"));
        }
        let mean = self.mean(x);
        let mut values = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            for m in &mean {
                let w: f64 = StandardNormal.sample(rng);
                values.push(m + self.sigma * w);
            }
        }
        Ok(SampleBatch {
            step,
            dim: self.dim,
            values,
        })
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// `n` realizations of a `dim`-dimensional random vector, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub step: usize,
    dim: usize,
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn from_rows(step: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::EmptyInput("sample batch"));
        };
        let dim = first.len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            if !vector::all_finite(r) {
                return Err(Error::NonFinite("sample batch"));
            }
            values.extend_from_slice(r);
        }
        Ok(SampleBatch { step, dim, values })
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim.max(1))
    }

    /// Values of coordinate `j` across the batch.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// `grad_x f(x, D(y)) = E_{z ~ D(y)}[grad_x l(x, z)]`. Both loss families are
/// affine in `z`, so the expectation passes through to the mean of `D(y)`.
pub fn expected_gradient(map: &GaussianLocationMap, loss: &LossFamily, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    map.check_dim(x)?;
    map.check_dim(y)?;
    if let Some(d) = loss.dim() {
        if d != x.len() {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
    }
    Ok(loss.gradient(x, &map.mean(y)))
}

/// Mini-batch gradient `(1/N) sum_i grad_x l(x, z_i)`.
pub fn batch_gradient(loss: &LossFamily, x: &[f64], batch: &SampleBatch) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("sample batch"));
    }
    if batch.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: batch.dim(),
        });
    }
    let mut acc = vec![0.0; x.len()];
    for z in batch.rows() {
        for (a, g) in acc.iter_mut().zip(loss.gradient(x, z)) {
            *a += g;
        }
    }
    let n = batch.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Empirical Wasserstein-1 distance between two one-dimensional samples via
/// the sorted (quantile) coupling. Unequal lengths are truncated to the
/// shorter sample.
pub fn w1_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("W1 sample"));
    }
    if !vector::all_finite(a) || !vector::all_finite(b) {
        return Err(Error::NonFinite("W1 sample"));
    }
    let n = a.len().min(b.len());
    if a.len() != b.len() {
        log::warn!("W1: truncating samples of sizes {} and {} to {}", a.len(), b.len(), n);
    }
    let mut sa = a[..n].to_vec();
    let mut sb = b[..n].to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64)
}

/// Monte Carlo estimate of the map's sensitivity between two decisions.
///
/// Samples of `D(x)` and `D(x')` share their underlying standard-normal
/// draws (common random numbers). Per-coordinate W1 distances are combined
/// by their Euclidean norm and divided by `||x - x'||`.
pub fn sensitivity_estimate<R: Rng + ?Sized>(
    map: &GaussianLocationMap,
    x: &[f64],
    x_prime: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    map.check_dim(x)?;
    map.check_dim(x_prime)?;
    let gap = vector::dist(x, x_prime);
    if gap == 0.0 {
        return Err(Error::InvalidArgument("sensitivity needs x != x'".into()));
    }
    if n == 0 {
        return Err(Error::EmptyInput("sample batch"));
    }
    let d = map.dim();
    let noise: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
    let mut shifts = Vec::with_capacity(d);
    for j in 0..d {
        let ma = map.mu_scale * x[j];
        let mb = map.mu_scale * x_prime[j];
        let a: Vec<f64> = (0..n).map(|i| ma + map.sigma * noise[i * d + j]).collect();
        let b: Vec<f64> = (0..n).map(|i| mb + map.sigma * noise[i * d + j]).collect();
        shifts.push(w1_empirical_1d(&a, &b)?);
    }
    Ok(vector::norm(&shifts) / gap)
}
