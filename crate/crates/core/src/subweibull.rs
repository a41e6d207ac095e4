//! Sub-Weibull tail descriptors and their closure algebra.
//!
//! A random variable `z` is `SW(theta, nu)` when its moment roots satisfy
//! `||z||_k <= nu * k^theta` for every `k >= 1`. Equivalently its tail obeys
//! `P(|z| >= eps) <= 2 exp(-(eps / nu')^(1/theta))` with
//! `nu' = nu * (2e / theta)^theta`. `theta = 1/2` covers sub-Gaussian and
//! `theta = 1` sub-exponential variables.
//!
//! Descriptors are not unique and are never compared for equality; they are
//! only used to evaluate bounds.

use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest moment order used by [`fit_subweibull`] unless overridden.
pub const DEFAULT_MAX_MOMENT: usize = 10;
/// Minimum sample count accepted by [`fit_subweibull`].
pub const MIN_FIT_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubWeibull {
    theta: f64,
    nu: f64,
}

impl SubWeibull {
    pub fn new(theta: f64, nu: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("theta = {theta} must be positive")));
        }
        if nu == 0.0 {
            return Err(Error::DegenerateDescriptor);
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!("nu = {nu} must be positive")));
        }
        Ok(SubWeibull { theta, nu })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Moment bound `nu * k^theta` on `||z||_k`.
    pub fn moment_bound(&self, k: f64) -> f64 {
        self.nu * k.powf(self.theta)
    }

    /// Scale of the tail characterization, `nu * (2e / theta)^theta`.
    pub fn tail_scale(&self) -> f64 {
        self.nu * (2.0 * E / self.theta).powf(self.theta)
    }
}

/// `z + y` for possibly dependent `z`, `y`.
pub fn sw_sum(a: SubWeibull, b: SubWeibull) -> SubWeibull {
    SubWeibull {
        theta: a.theta.max(b.theta),
        nu: a.nu + b.nu,
    }
}

/// `psi(t1, t2) = (t1 + t2)^(t1 + t2) / (t1^t1 t2^t2)`
pub fn product_constant(theta1: f64, theta2: f64) -> f64 {
    let s = theta1 + theta2;
    (s * s.ln() - theta1 * theta1.ln() - theta2 * theta2.ln()).exp()
}

/// `z * y` for possibly dependent `z`, `y`.
pub fn sw_product(a: SubWeibull, b: SubWeibull) -> SubWeibull {
    SubWeibull {
        theta: a.theta + b.theta,
        nu: product_constant(a.theta, b.theta) * a.nu * b.nu,
    }
}

/// `scale * z + shift`.
pub fn sw_affine(a: SubWeibull, scale: f64, shift: f64) -> Result<SubWeibull> {
    if !scale.is_finite() || !shift.is_finite() {
        return Err(Error::NonFinite("affine coefficients"));
    }
    SubWeibull::new(a.theta, scale.abs() * a.nu + shift.abs())
}

/// Upper bound on `P(|z| >= epsilon)`, clamped to 1.
pub fn tail_bound(a: SubWeibull, epsilon: f64) -> f64 {
    if !(epsilon > 0.0) {
        return 1.0;
    }
    let raw = 2.0 * (-(a.theta / (2.0 * E)) * (epsilon / a.nu).powf(1.0 / a.theta)).exp();
    raw.min(1.0)
}

/// `(2e / theta)^theta * log^theta(2 / delta)`: the factor turning a proxy
/// variance into a level-`delta` threshold.
pub fn hp_factor(theta: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::ProbabilityOutOfRange(delta));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta = {theta} must be positive")));
    }
    Ok((2.0 * E / theta).powf(theta) * (2.0 / delta).ln().powf(theta))
}

/// Threshold `eps` with `tail_bound(a, eps) = delta`.
pub fn hp_quantile(a: SubWeibull, delta: f64) -> Result<f64> {
    Ok(hp_factor(a.theta, delta)? * a.nu)
}

/// Euclidean norm of a `d`-vector whose entries are each `SW(theta, nu)`.
pub fn sw_vector_norm(d: usize, per_coordinate: SubWeibull) -> Result<SubWeibull> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let theta = per_coordinate.theta;
    SubWeibull::new(theta, 2f64.powf(theta) * (d as f64).sqrt() * per_coordinate.nu)
}

/// Descriptor of `xi - E[xi]` for `xi` supported on `[lo, hi]`.
pub fn sw_bounded(lo: f64, hi: f64) -> Result<SubWeibull> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    SubWeibull::new(0.5, (hi - lo) / SQRT_2)
}

/// Descriptor of a centered Gaussian with standard deviation `sigma`:
/// `SW(1/2, constant * sigma)`. The absolute constant has no published
/// value; pass 1.0 when nothing better is known.
pub fn sw_gaussian(sigma: f64, constant: f64) -> Result<SubWeibull> {
    SubWeibull::new(0.5, constant * sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub theta: f64,
    pub nu: f64,
    /// Every sample was zero, so `nu = 0` and no descriptor exists.
    pub degenerate: bool,
}

impl TailFit {
    pub fn descriptor(&self) -> Result<SubWeibull> {
        SubWeibull::new(self.theta, self.nu)
    }
}

/// Empirical proxy variance for a fixed `theta`:
/// `max_{1 <= k <= max_moment} m_k / k^theta` with `m_k` the empirical
/// `k`-th absolute moment root.
pub fn fit_subweibull(samples: &[f64], theta: f64, max_moment: usize) -> Result<TailFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta = {theta} must be positive")));
    }
    if max_moment == 0 {
        return Err(Error::InvalidArgument("max_moment must be at least 1".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tail samples"));
    }
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(TailFit {
            theta,
            nu: 0.0,
            degenerate: true,
        });
    }
    let n = samples.len() as f64;
    let mut nu = 0.0f64;
    for k in 1..=max_moment {
        let kf = k as f64;
        // normalize by the max to keep high powers in range
        let mean_pow = samples.iter().map(|v| (v.abs() / scale).powi(k as i32)).sum::<f64>() / n;
        let root = scale * mean_pow.powf(1.0 / kf);
        nu = nu.max(root / kf.powf(theta));
    }
    Ok(TailFit {
        theta,
        nu,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sw(theta: f64, nu: f64) -> SubWeibull {
        SubWeibull::new(theta, nu).unwrap()
    }

    #[test]
    fn sum_rule() {
        assert_eq!(sw_sum(sw(0.5, 1.0), sw(1.0, 2.0)), sw(1.0, 3.0));
        assert_eq!(sw_sum(sw(1.0, 1.0), sw(1.0, 1.0)), sw(1.0, 2.0));
        let tiny = sw_sum(sw(0.7, 2.0), sw(0.7, 1e-300));
        assert_eq!(tiny.nu(), 2.0);
    }

    #[test]
    fn product_rule() {
        // psi(1, 1) = 2^2 / (1 * 1) = 4
        let p = sw_product(sw(1.0, 1.0), sw(1.0, 1.0));
        assert_eq!(p.theta(), 2.0);
        assert!((p.nu() - 4.0).abs() < 1e-14);
        // psi(1/2, 1/2) = 1 / (sqrt(1/2) sqrt(1/2)) = 2
        let p = sw_product(sw(0.5, 1.0), sw(0.5, 1.0));
        assert_eq!(p.theta(), 1.0);
        assert!((p.nu() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn affine_rule() {
        assert_eq!(sw_affine(sw(1.0, 2.0), 3.0, 0.0).unwrap(), sw(1.0, 6.0));
        assert_eq!(sw_affine(sw(1.0, 2.0), 1.0, -5.0).unwrap(), sw(1.0, 7.0));
        assert_eq!(sw_affine(sw(0.3, 1.7), 1.0, 0.0).unwrap(), sw(0.3, 1.7));
        assert!(matches!(
            sw_affine(sw(1.0, 2.0), 0.0, 0.0),
            Err(Error::DegenerateDescriptor)
        ));
    }

    #[test]
    fn tail_bound_values() {
        let a = sw(1.0, 1.0);
        let eps = 2.0 * E * 2f64.ln();
        assert!((tail_bound(a, eps) - 1.0).abs() < 1e-14);
        assert!((tail_bound(a, 2.0 * eps) - 0.5).abs() < 1e-14);
        assert_eq!(tail_bound(a, 1e-9), 1.0);
        assert!(tail_bound(a, 1e4) < 1e-300);
    }

    #[test]
    fn quantile_values() {
        let a = sw(1.0, 1.0);
        let delta = 2.0 * (-2.0f64).exp();
        assert!((hp_quantile(a, delta).unwrap() - 4.0 * E).abs() < 1e-12);
        assert!(matches!(hp_quantile(a, 1.0), Err(Error::ProbabilityOutOfRange(_))));
        assert!(hp_quantile(a, 0.0).is_err());
    }

    #[test]
    fn vector_norm_and_bounded() {
        let v = sw_vector_norm(1, sw(0.5, 1.0)).unwrap();
        assert!((v.nu() - SQRT_2).abs() < 1e-15);
        let v = sw_vector_norm(4, sw(0.5, 1.0)).unwrap();
        assert!((v.nu() - 2.0 * SQRT_2).abs() < 1e-14);
        assert!(sw_vector_norm(0, sw(0.5, 1.0)).is_err());

        let b = sw_bounded(0.0, 1.0).unwrap();
        assert_eq!(b.theta(), 0.5);
        assert!((b.nu() - 1.0 / SQRT_2).abs() < 1e-15);
        assert!((sw_bounded(-1.0, 1.0).unwrap().nu() - SQRT_2).abs() < 1e-15);
        assert!(sw_bounded(1.0, 1.0).is_err());
    }

    #[test]
    fn fit_zero_and_constant_samples() {
        let f = fit_subweibull(&[0.0; 100], 0.5, DEFAULT_MAX_MOMENT).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.nu, 0.0);
        assert!(f.descriptor().is_err());

        let f = fit_subweibull(&[-3.0; 200], 1.0, DEFAULT_MAX_MOMENT).unwrap();
        assert!(!f.degenerate);
        assert!((f.nu - 3.0).abs() < 1e-12);

        assert!(matches!(
            fit_subweibull(&[1.0; 99], 1.0, DEFAULT_MAX_MOMENT),
            Err(Error::TooFewSamples { needed: 100, got: 99 })
        ));
    }

    /// `||z||_k` for a standard Gaussian: `(2^(k/2) Gamma((k+1)/2) / sqrt(pi))^(1/k)`.
    fn gaussian_moment_root(k: usize) -> f64 {
        let kf = k as f64;
        let m = 2f64.powf(kf / 2.0) * statrs::function::gamma::gamma((kf + 1.0) / 2.0)
            / std::f64::consts::PI.sqrt();
        m.powf(1.0 / kf)
    }

    #[test]
    fn fit_gaussian_matches_gamma_oracle() {
        let exact = (1..=DEFAULT_MAX_MOMENT)
            .map(|k| gaussian_moment_root(k) / (k as f64).sqrt())
            .fold(0.0, f64::max);
        // the maximum sits at k = 1: E|z| = sqrt(2 / pi)
        assert!((exact - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = fit_subweibull(&samples, 0.5, DEFAULT_MAX_MOMENT).unwrap();
        assert!((f.nu - exact).abs() < 0.01, "fit {} vs exact {}", f.nu, exact);
    }

    proptest! {
        #[test]
        fn quantile_round_trip(theta in 0.25f64..2.0, nu in 0.1f64..10.0, delta in 1e-4f64..0.99) {
            let a = sw(theta, nu);
            let eps = hp_quantile(a, delta).unwrap();
            let back = tail_bound(a, eps);
            prop_assert!((back - delta).abs() <= 1e-10 * delta);
        }

        #[test]
        fn quantile_monotonicity(theta in 0.25f64..2.0, nu in 0.1f64..10.0, d1 in 1e-4f64..0.5, dd in 1e-3f64..0.4, dn in 1e-3f64..5.0) {
            let a = sw(theta, nu);
            prop_assert!(hp_quantile(a, d1).unwrap() > hp_quantile(a, d1 + dd).unwrap());
            prop_assert!(hp_quantile(sw(theta, nu + dn), d1).unwrap() > hp_quantile(a, d1).unwrap());
        }

        #[test]
        fn tail_bound_is_probability_and_nonincreasing(theta in 0.25f64..2.0, nu in 0.1f64..10.0, e1 in 1e-6f64..50.0, de in 0.0f64..50.0) {
            let a = sw(theta, nu);
            let p1 = tail_bound(a, e1);
            let p2 = tail_bound(a, e1 + de);
            prop_assert!(p1 > 0.0 || e1 > 1.0);
            prop_assert!(p1 <= 1.0);
            prop_assert!(p2 <= p1);
        }

        #[test]
        fn product_is_symmetric(t1 in 0.1f64..3.0, n1 in 0.1f64..5.0, t2 in 0.1f64..3.0, n2 in 0.1f64..5.0) {
            let p = sw_product(sw(t1, n1), sw(t2, n2));
            let q = sw_product(sw(t2, n2), sw(t1, n1));
            prop_assert!((p.nu() - q.nu()).abs() <= 1e-12 * p.nu());
            prop_assert_eq!(p.theta(), q.theta());
        }

        #[test]
        fn vector_norm_grows_with_dimension(theta in 0.1f64..2.0, nu in 0.1f64..5.0, d in 1usize..100) {
            let a = sw(theta, nu);
            prop_assert!(sw_vector_norm(d + 1, a).unwrap().nu() > sw_vector_norm(d, a).unwrap().nu());
        }
    }
}
