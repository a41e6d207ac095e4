//! Theoretical tracking-error envelopes.
//!
//! Every envelope has the form `a_t e_0 + sum_{i=0}^{t} b_i w_i` with
//! `a_t = prod_{i=0}^{t} lambda_i`, `b_t = 1` and
//! `b_i = prod_{k=i+1}^{t} lambda_k` for `i < t`, evaluated for different
//! per-step forcing terms `w_i`:
//!
//! | envelope            | forcing `w_i`                | scale                     |
//! |---------------------|------------------------------|---------------------------|
//! | exact gradients     | `phi_i`                      | 1                         |
//! | expectation         | `phi_i + eta_i E[xi_i]`      | 1                         |
//! | high probability    | `phi_i + eta_i nu_i`         | `(2e/theta)^theta log^theta(2/delta)` |
//! | Markov              | `phi_i + eta_i E[xi_i]`      | `1/delta`                 |
//!
//! Sequences returned here are indexed by time: entry `0` is the (scaled)
//! initial error and entry `t + 1` bounds `e_{t+1}`, so a horizon of `T`
//! contraction factors yields `T + 1` values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subweibull::hp_factor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Contraction factors `lambda_t`.
    pub lambda: Vec<f64>,
    /// Drift of the stable points `phi_t`.
    pub phi: Vec<f64>,
    pub e0: f64,
    pub eta: Vec<f64>,
    /// `E[xi_t]`, measured or modeled.
    pub xi_mean: Vec<f64>,
    /// Tail exponent shared by all gradient errors.
    pub theta: f64,
    /// Per-step proxy variances `nu_t`.
    pub nu: Vec<f64>,
    pub delta: f64,
}

impl BoundInputs {
    /// Constant inputs repeated over `steps` steps.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(
        steps: usize,
        lambda: f64,
        phi: f64,
        e0: f64,
        eta: f64,
        xi_mean: f64,
        theta: f64,
        nu: f64,
        delta: f64,
    ) -> Self {
        BoundInputs {
            lambda: vec![lambda; steps],
            phi: vec![phi; steps],
            e0,
            eta: vec![eta; steps],
            xi_mean: vec![xi_mean; steps],
            theta,
            nu: vec![nu; steps],
            delta,
        }
    }

    pub fn steps(&self) -> usize {
        self.lambda.len()
    }

    fn check(&self, needs_noise: bool) -> Result<()> {
        let t = self.lambda.len();
        let mut lens = vec![("phi", self.phi.len())];
        if needs_noise {
            lens.extend([
                ("eta", self.eta.len()),
                ("xi_mean", self.xi_mean.len()),
                ("nu", self.nu.len()),
            ]);
        }
        for (what, got) in lens {
            if got < t {
                return Err(Error::HorizonMismatch { what, expected: t, got });
            }
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidArgument("contraction factors must be nonnegative".into()));
        }
        if self.phi[..t].iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument("drift must be nonnegative".into()));
        }
        if !(self.e0 >= 0.0) {
            return Err(Error::InvalidArgument(format!("initial error {} must be nonnegative", self.e0)));
        }
        Ok(())
    }

    fn forcing(&self, noise: &[f64]) -> Vec<f64> {
        (0..self.steps())
            .map(|i| self.phi[i] + self.eta[i] * noise[i])
            .collect()
    }
}

/// `a_t = prod_{i=0}^{t} lambda_i` for every `t`.
pub fn initial_error_weights(lambda: &[f64]) -> Vec<f64> {
    let mut prod = 1.0;
    lambda
        .iter()
        .map(|l| {
            prod *= l;
            prod
        })
        .collect()
}

/// `b_i` for `i = 0..=t`: `b_t = 1`, `b_i = prod_{k=i+1}^{t} lambda_k`.
pub fn forcing_weights(lambda: &[f64], t: usize) -> Vec<f64> {
    let mut b = vec![1.0; t + 1];
    for i in (0..t).rev() {
        b[i] = b[i + 1] * lambda[i + 1];
    }
    b
}

/// `[e0, a_0 e0 + b.w, ..., a_{T-1} e0 + sum_i b_i w_i]`
pub fn envelope(lambda: &[f64], forcing: &[f64], e0: f64) -> Vec<f64> {
    let a = initial_error_weights(lambda);
    let mut out = Vec::with_capacity(lambda.len() + 1);
    out.push(e0);
    for (t, a_t) in a.iter().enumerate() {
        let b = forcing_weights(lambda, t);
        let driven: f64 = b.iter().zip(forcing).map(|(bi, wi)| bi * wi).sum();
        out.push(a_t * e0 + driven);
    }
    out
}

/// Exact-gradient tracking bound.
pub fn opgd_envelope(inputs: &BoundInputs) -> Result<Vec<f64>> {
    inputs.check(false)?;
    Ok(envelope(&inputs.lambda, &inputs.phi[..inputs.steps()], inputs.e0))
}

/// `phi / (1 - lambda)`, the asymptotic tracking bound.
pub fn limsup_bound(lambda_tilde: f64, phi_tilde: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda_tilde) {
        return Err(Error::NonContractive(format!(
            "sup lambda = {lambda_tilde} must lie in [0, 1)"
        )));
    }
    if !(phi_tilde >= 0.0) {
        return Err(Error::InvalidArgument(format!("sup drift {phi_tilde} must be nonnegative")));
    }
    Ok(phi_tilde / (1.0 - lambda_tilde))
}

/// Bound on `E[e_t]` for the mini-batch method.
pub fn ospgd_expectation_envelope(inputs: &BoundInputs) -> Result<Vec<f64>> {
    inputs.check(true)?;
    if inputs.xi_mean[..inputs.steps()].iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidArgument("E[xi] must be nonnegative".into()));
    }
    Ok(envelope(&inputs.lambda, &inputs.forcing(&inputs.xi_mean), inputs.e0))
}

/// Bound on `e_t` holding with probability `1 - delta` at each step.
pub fn ospgd_hp_envelope(inputs: &BoundInputs) -> Result<Vec<f64>> {
    inputs.check(true)?;
    let factor = hp_factor(inputs.theta, inputs.delta)?;
    if inputs.nu[..inputs.steps()].iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidArgument("nu must be nonnegative".into()));
    }
    Ok(envelope(&inputs.lambda, &inputs.forcing(&inputs.nu), inputs.e0)
        .into_iter()
        .map(|v| factor * v)
        .collect())
}

/// Markov-inequality alternative to [`ospgd_hp_envelope`]: the expectation
/// envelope divided by `delta`.
pub fn markov_envelope(inputs: &BoundInputs) -> Result<Vec<f64>> {
    if !(inputs.delta > 0.0 && inputs.delta < 1.0) {
        return Err(Error::ProbabilityOutOfRange(inputs.delta));
    }
    Ok(ospgd_expectation_envelope(inputs)?
        .into_iter()
        .map(|v| v / inputs.delta)
        .collect())
}

/// Distance bound `2 eps gamma / alpha` between the stable point and the
/// performative optimum.
pub fn stable_optimum_gap(eps: f64, gamma_lip: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be positive")));
    }
    Ok(2.0 * eps * gamma_lip / alpha)
}
