//! Online projected gradient descent (exact and mini-batch), step-size
//! selection, contraction factors, and performatively stable point solvers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distmap::{batch_gradient, expected_gradient, GaussianLocationMap, SampleBatch};
use crate::error::{Error, Result};
use crate::problem::{ConstraintSet, LossFamily, ProblemInstance};
use crate::projection::{project, water_filling_threshold};
use crate::vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact expected gradients (OPGD).
    Exact,
    /// One sample per step.
    Greedy,
    /// Several samples per step.
    Lazy,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Greedy => "greedy",
            Mode::Lazy => "lazy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    step_sizes: Vec<f64>,
    batch_sizes: Vec<usize>,
    mode: Mode,
}

impl AlgorithmConfig {
    pub fn new(step_sizes: Vec<f64>, batch_sizes: Vec<usize>, mode: Mode) -> Result<Self> {
        if step_sizes.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidArgument("step sizes must be positive".into()));
        }
        match mode {
            Mode::Exact => {}
            Mode::Greedy => {
                if batch_sizes.iter().any(|&n| n != 1) {
                    return Err(Error::InvalidArgument("greedy mode uses one sample per step".into()));
                }
            }
            Mode::Lazy => {
                if batch_sizes.iter().any(|&n| n < 2) {
                    return Err(Error::InvalidArgument("lazy mode needs batches of at least two".into()));
                }
            }
        }
        if mode != Mode::Exact && batch_sizes.len() != step_sizes.len() {
            return Err(Error::HorizonMismatch {
                what: "batch sizes",
                expected: step_sizes.len(),
                got: batch_sizes.len(),
            });
        }
        Ok(AlgorithmConfig {
            step_sizes,
            batch_sizes,
            mode,
        })
    }

    pub fn exact(step_sizes: Vec<f64>) -> Result<Self> {
        Self::new(step_sizes, Vec::new(), Mode::Exact)
    }

    pub fn stochastic(step_sizes: Vec<f64>, batch: usize) -> Result<Self> {
        let mode = if batch == 1 { Mode::Greedy } else { Mode::Lazy };
        let n = step_sizes.len();
        Self::new(step_sizes, vec![batch; n], mode)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn step_sizes(&self) -> &[f64] {
        &self.step_sizes
    }

    pub fn batch_sizes(&self) -> &[usize] {
        &self.batch_sizes
    }
}

/// One algorithm run against a known stable-point sequence.
///
/// All per-step vectors have the horizon's length. The drift entry of the
/// final step is zero because there is no successor stable point, and
/// `grad_errors` is empty for exact runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub mode: Mode,
    pub iterates: Vec<Vec<f64>>,
    pub tracking_error: Vec<f64>,
    pub drift: Vec<f64>,
    pub grad_errors: Vec<f64>,
    pub seed: Option<u64>,
}

/// `proj_C(x - eta * grad)`.
pub fn opgd_step(x: &[f64], grad_at_induced: &[f64], set: &ConstraintSet, eta: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("step size {eta} must be positive")));
    }
    if x.len() != grad_at_induced.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: grad_at_induced.len(),
        });
    }
    project(set, &vector::descend(x, grad_at_induced, eta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OspgdStep {
    pub x_next: Vec<f64>,
    /// `||g(x) - grad f(x, D(x))||`, the gradient error against the
    /// distribution induced by the current iterate.
    pub xi: f64,
}

/// Mini-batch step with a batch drawn from `D(x)`.
pub fn ospgd_step(
    x: &[f64],
    batch: &SampleBatch,
    loss: &LossFamily,
    map: &GaussianLocationMap,
    set: &ConstraintSet,
    eta: f64,
) -> Result<OspgdStep> {
    let g = batch_gradient(loss, x, batch)?;
    let exact = expected_gradient(map, loss, x, x)?;
    let xi = vector::dist(&g, &exact);
    let x_next = opgd_step(x, &g, set, eta)?;
    Ok(OspgdStep { x_next, xi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInterval {
    pub lo: f64,
    pub hi: f64,
}

impl StepInterval {
    pub fn contains(&self, eta: f64) -> bool {
        eta >= self.lo && eta <= self.hi
    }
}

/// The step-size interval `[(1 - r) / (alpha + beta eps), (1 + r) / (beta (1 + eps))]`
/// associated with a target rate `r`.
///
/// The upper end is exact, but the lower end does not account for the
/// sensitivity term pushing `lambda` up, so near it `lambda` can exceed `r`
/// (e.g. `alpha = beta = 2`, `eps = 0.5`, `r = 0.5`, `eta = 1/6` gives
/// `lambda = 5/6`). Use
/// [`certified_step_interval`] when `lambda <= r` must hold.
pub fn step_size_interval(alpha: f64, beta: f64, eps: f64, r: f64) -> Result<StepInterval> {
    check_rate_inputs(alpha, beta, eps, r)?;
    let lo = (1.0 - r) / (alpha + beta * eps);
    let hi = (1.0 + r) / (beta * (1.0 + eps));
    if lo > hi {
        return Err(Error::InfeasibleRate { r, lo, hi });
    }
    Ok(StepInterval { lo, hi })
}

/// Exact set of step sizes with `rho + eta beta eps <= r`:
/// `[(1 - r) / (alpha - beta eps), (1 + r) / (beta (1 + eps))]`.
/// Requires `beta eps < alpha`.
pub fn certified_step_interval(alpha: f64, beta: f64, eps: f64, r: f64) -> Result<StepInterval> {
    check_rate_inputs(alpha, beta, eps, r)?;
    let margin = alpha - beta * eps;
    if !(margin > 0.0) {
        return Err(Error::NonContractive(format!(
            "eps * beta / alpha = {} >= 1",
            eps * beta / alpha
        )));
    }
    let lo = (1.0 - r) / margin;
    let hi = (1.0 + r) / (beta * (1.0 + eps));
    if lo > hi {
        return Err(Error::InfeasibleRate { r, lo, hi });
    }
    Ok(StepInterval { lo, hi })
}

fn check_rate_inputs(alpha: f64, beta: f64, eps: f64, r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("rate r = {r} must lie in (0, 1)")));
    }
    if !(alpha > 0.0) || !(beta >= alpha) || !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < alpha <= beta and eps >= 0, got alpha = {alpha}, beta = {beta}, eps = {eps}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contraction {
    /// `max(|1 - eta alpha|, |1 - eta beta|)`
    pub rho: f64,
    /// `rho + eta beta eps`
    pub lambda: f64,
    pub contractive: bool,
}

pub fn contraction_factor(alpha: f64, beta: f64, eps: f64, eta: f64) -> Contraction {
    let rho = (1.0 - eta * alpha).abs().max((1.0 - eta * beta).abs());
    let lambda = rho + eta * beta * eps;
    Contraction {
        rho,
        lambda,
        contractive: lambda < 1.0,
    }
}

/// Per-step contraction factors of an instance under the given step sizes.
pub fn contraction_sequence(instance: &ProblemInstance, step_sizes: &[f64]) -> Result<Vec<Contraction>> {
    if step_sizes.len() < instance.horizon() {
        return Err(Error::HorizonMismatch {
            what: "step sizes",
            expected: instance.horizon(),
            got: step_sizes.len(),
        });
    }
    let c = instance.constants();
    Ok((0..instance.horizon())
        .map(|t| contraction_factor(c.alpha[t], c.beta[t], c.eps[t], step_sizes[t]))
        .collect())
}

/// `G_t(x, D_t(x))`: one exact step of the frozen step-`t` problem.
pub fn algorithmic_map(instance: &ProblemInstance, t: usize, x: &[f64], eta: f64) -> Result<Vec<f64>> {
    let step = instance.step(t);
    let g = expected_gradient(step.map, step.loss, x, x)?;
    opgd_step(x, &g, step.set, eta)
}

/// Performatively stable point of step `t` by repeated application of the
/// exact algorithmic map with `t` frozen.
pub fn solve_stable_point(
    instance: &ProblemInstance,
    t: usize,
    eta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let step = instance.step(t);
    let c = contraction_factor(step.alpha, step.beta, step.eps, eta);
    if !c.contractive {
        return Err(Error::NonContractive(format!(
            "lambda = {} at step {t} with eta = {eta}",
            c.lambda
        )));
    }
    let mut x = project(step.set, &vec![0.0; instance.dim()])?;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = algorithmic_map(instance, t, &x, eta)?;
        residual = vector::dist(&next, &x);
        x = next;
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(Error::MaxIterations {
        tol,
        max_iter,
        residual,
    })
}

/// Closed-form stable point of the separable quadratic family
/// `l(x, z) = sum z_i x_i - gamma_i x_i + kappa x_i^2`, `z_i ~ N(mu x_i, .)`,
/// over a budget set.
///
/// Stationarity gives `x_i = (gamma_i - lambda) / (mu + 2 kappa)` with the
/// budget multiplier `lambda >= 0`. On the half-space the multiplier is
/// linear in the capacity; with nonnegativity the coordinates are clipped at
/// zero and `lambda` is the water-filling threshold of the scaled demands.
/// Full space is accepted and means no multiplier.
pub fn kkt_stable_point_ev(gamma: &[f64], kappa: f64, mu: f64, set: &ConstraintSet) -> Result<Vec<f64>> {
    if gamma.is_empty() {
        return Err(Error::EmptyInput("gamma"));
    }
    if !(kappa > 0.0) || !(mu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need kappa > 0 and mu >= 0, got kappa = {kappa}, mu = {mu}"
        )));
    }
    let denom = mu + 2.0 * kappa;
    let free: Vec<f64> = gamma.iter().map(|g| g / denom).collect();
    match set {
        ConstraintSet::FullSpace => Ok(free),
        ConstraintSet::BudgetHalfspace { capacity } => {
            if !(*capacity > 0.0) {
                return Err(Error::InvalidArgument(format!("capacity {capacity} must be positive")));
            }
            let total: f64 = free.iter().sum();
            if total <= *capacity {
                return Ok(free);
            }
            let d = gamma.len() as f64;
            let lambda = (gamma.iter().sum::<f64>() - capacity * denom) / d;
            Ok(gamma.iter().map(|g| (g - lambda) / denom).collect())
        }
        ConstraintSet::NonnegBudget { capacity } => {
            if !(*capacity > 0.0) {
                return Err(Error::InvalidArgument(format!("capacity {capacity} must be positive")));
            }
            let clipped: f64 = free.iter().map(|v| v.max(0.0)).sum();
            if clipped <= *capacity {
                return Ok(free.iter().map(|v| v.max(0.0)).collect());
            }
            // sum max(0, (gamma_i - lambda) / denom) = c  <=>  water filling on gamma / denom
            let shift = water_filling_threshold(&free, *capacity);
            Ok(free.iter().map(|v| (v - shift).max(0.0)).collect())
        }
        other => Err(Error::InvalidArgument(format!(
            "closed-form stable point needs a budget set, got {other:?}"
        ))),
    }
}

/// `phi_t = ||xbar_{t+1} - xbar_t||`, with a trailing zero for the last step.
pub fn drift_sequence(stable_points: &[Vec<f64>]) -> Vec<f64> {
    let mut phi: Vec<f64> = stable_points
        .windows(2)
        .map(|w| vector::dist(&w[1], &w[0]))
        .collect();
    if !stable_points.is_empty() {
        phi.push(0.0);
    }
    phi
}

fn check_run_inputs(instance: &ProblemInstance, stable_points: &[Vec<f64>], config: &AlgorithmConfig, x0: &[f64]) -> Result<()> {
    let horizon = instance.horizon();
    if stable_points.len() != horizon {
        return Err(Error::HorizonMismatch {
            what: "stable points",
            expected: horizon,
            got: stable_points.len(),
        });
    }
    if config.step_sizes.len() < horizon {
        return Err(Error::HorizonMismatch {
            what: "step sizes",
            expected: horizon,
            got: config.step_sizes.len(),
        });
    }
    if x0.len() != instance.dim() {
        return Err(Error::DimensionMismatch {
            expected: instance.dim(),
            got: x0.len(),
        });
    }
    Ok(())
}

/// Exact-gradient run over the full horizon starting from `x0`.
pub fn run_opgd(
    instance: &ProblemInstance,
    stable_points: &[Vec<f64>],
    config: &AlgorithmConfig,
    x0: &[f64],
) -> Result<RunRecord> {
    check_run_inputs(instance, stable_points, config, x0)?;
    let horizon = instance.horizon();
    let mut iterates = Vec::with_capacity(horizon);
    let mut tracking_error = Vec::with_capacity(horizon);
    let mut x = x0.to_vec();
    for (t, xbar) in stable_points.iter().enumerate() {
        tracking_error.push(vector::dist(&x, xbar));
        let next = algorithmic_map(instance, t, &x, config.step_sizes[t])?;
        iterates.push(std::mem::replace(&mut x, next));
    }
    Ok(RunRecord {
        mode: Mode::Exact,
        iterates,
        tracking_error,
        drift: drift_sequence(stable_points),
        grad_errors: Vec::new(),
        seed: None,
    })
}

/// Mini-batch run: at each step a fresh batch is drawn from `D_t(x_t)`.
pub fn run_ospgd<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    stable_points: &[Vec<f64>],
    config: &AlgorithmConfig,
    x0: &[f64],
    rng: &mut R,
) -> Result<RunRecord> {
    check_run_inputs(instance, stable_points, config, x0)?;
    if config.mode == Mode::Exact {
        return Err(Error::InvalidArgument("stochastic run needs greedy or lazy mode".into()));
    }
    let horizon = instance.horizon();
    let mut iterates = Vec::with_capacity(horizon);
    let mut tracking_error = Vec::with_capacity(horizon);
    let mut grad_errors = Vec::with_capacity(horizon);
    let mut x = x0.to_vec();
    for (t, xbar) in stable_points.iter().enumerate() {
        tracking_error.push(vector::dist(&x, xbar));
        let step = instance.step(t);
        let batch = step.map.sample(&x, config.batch_sizes[t], t, rng)?;
        let out = ospgd_step(&x, &batch, step.loss, step.map, step.set, config.step_sizes[t])?;
        grad_errors.push(out.xi);
        iterates.push(std::mem::replace(&mut x, out.x_next));
    }
    Ok(RunRecord {
        mode: config.mode,
        iterates,
        tracking_error,
        drift: drift_sequence(stable_points),
        grad_errors,
        seed: None,
    })
}
