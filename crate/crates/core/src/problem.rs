//! Time-varying problem instances, their regularity constants, and the
//! scalar decision-dependent example used as closed-form ground truth.

use serde::{Deserialize, Serialize};

use crate::distmap::GaussianLocationMap;
use crate::error::{Error, Result};

/// Per-step regularity constants.
///
/// `alpha` is the strong-convexity modulus of `x -> l_t(x, z)`, `beta` the
/// Lipschitz constant of the gradient in both `x` and `z`, `eps` the
/// Wasserstein-1 sensitivity of the distributional map and `gamma_lip` the
/// Lipschitz constant of `z -> l_t(x, z)` (only used for the optimum gap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: Vec<f64>,
    pub gamma_lip: Vec<f64>,
}

impl RegularityConstants {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, eps: Vec<f64>, gamma_lip: Vec<f64>) -> Result<Self> {
        let c = RegularityConstants {
            alpha,
            beta,
            eps,
            gamma_lip,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn constant(horizon: usize, alpha: f64, beta: f64, eps: f64, gamma_lip: f64) -> Result<Self> {
        Self::new(
            vec![alpha; horizon],
            vec![beta; horizon],
            vec![eps; horizon],
            vec![gamma_lip; horizon],
        )
    }

    pub fn horizon(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.alpha.len();
        if t == 0 {
            return Err(Error::EmptyInput("regularity constants"));
        }
        for (what, len) in [
            ("beta", self.beta.len()),
            ("eps", self.eps.len()),
            ("gamma_lip", self.gamma_lip.len()),
        ] {
            if len != t {
                return Err(Error::HorizonMismatch {
                    what,
                    expected: t,
                    got: len,
                });
            }
        }
        for step in 0..t {
            let (a, b, e, g) = (self.alpha[step], self.beta[step], self.eps[step], self.gamma_lip[step]);
            let reason = if !(a > 0.0) || !a.is_finite() {
                Some(format!("alpha = {a} must be positive and finite"))
            } else if !(b > 0.0) || !b.is_finite() {
                Some(format!("beta = {b} must be positive and finite"))
            } else if b < a {
                Some(format!("beta = {b} is smaller than alpha = {a}"))
            } else if !(e >= 0.0) || !e.is_finite() {
                Some(format!("eps = {e} must be nonnegative and finite"))
            } else if !(g >= 0.0) {
                Some(format!("gamma_lip = {g} must be nonnegative"))
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::InvalidConstants { step, reason });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepContraction {
    /// `eps * beta / alpha`
    pub ratio: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub steps: Vec<StepContraction>,
    pub all_ok: bool,
}

impl ContractionReport {
    pub fn violations(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.ok)
            .map(|(t, _)| t)
            .collect()
    }
}

/// Checks the existence/uniqueness condition `eps_t * beta_t / alpha_t < 1`
/// for every step.
pub fn validate_contraction(constants: &RegularityConstants) -> Result<ContractionReport> {
    let t = constants.alpha.len();
    if constants.beta.len() != t || constants.eps.len() != t {
        return Err(Error::HorizonMismatch {
            what: "beta/eps",
            expected: t,
            got: constants.beta.len().min(constants.eps.len()),
        });
    }
    let mut steps = Vec::with_capacity(t);
    for step in 0..t {
        let (a, b, e) = (constants.alpha[step], constants.beta[step], constants.eps[step]);
        if !(a > 0.0) {
            return Err(Error::InvalidConstants {
                step,
                reason: format!("alpha = {a} must be positive"),
            });
        }
        if !(b > 0.0) {
            return Err(Error::InvalidConstants {
                step,
                reason: format!("beta = {b} must be positive"),
            });
        }
        let ratio = e * b / a;
        steps.push(StepContraction { ratio, ok: ratio < 1.0 });
    }
    let all_ok = steps.iter().all(|s| s.ok);
    Ok(ContractionReport { steps, all_ok })
}

/// Closed forms for the scalar family `l(x, z) = x^2 + z`, `z ~ N(mu x, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1ClosedForms {
    pub performative_optimum: f64,
    pub stable_point: f64,
    /// `2 eps gamma / alpha` with `eps = mu`, `gamma = 1`, `alpha = 2`.
    pub gap_bound: f64,
}

pub fn example1_closed_forms(mu: f64) -> Result<Example1ClosedForms> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu = {mu} must be nonnegative")));
    }
    Ok(Example1ClosedForms {
        performative_optimum: -mu / 2.0,
        stable_point: 0.0,
        gap_bound: crate::bounds::stable_optimum_gap(mu, 1.0, 2.0)?,
    })
}

/// Closed convex constraint sets with exact projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstraintSet {
    FullSpace,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    EuclideanBall { center: Vec<f64>, radius: f64 },
    /// `{x : sum_i x_i <= capacity}`
    BudgetHalfspace { capacity: f64 },
    /// `{x : x >= 0, sum_i x_i <= capacity}`
    NonnegBudget { capacity: f64 },
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConstraintSet::FullSpace => Ok(()),
            ConstraintSet::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        got: hi.len(),
                    });
                }
                if lo.iter().zip(hi).any(|(l, h)| !(h >= l) || l.is_nan() || h.is_nan()) {
                    return Err(Error::InvalidArgument("box requires hi >= lo coordinatewise".into()));
                }
                Ok(())
            }
            ConstraintSet::EuclideanBall { center, radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidArgument(format!("ball radius {radius} must be positive")));
                }
                if !crate::vector::all_finite(center) {
                    return Err(Error::NonFinite("ball center"));
                }
                Ok(())
            }
            ConstraintSet::BudgetHalfspace { capacity } => {
                if !capacity.is_finite() {
                    return Err(Error::NonFinite("budget capacity"));
                }
                Ok(())
            }
            ConstraintSet::NonnegBudget { capacity } => {
                if !capacity.is_finite() || *capacity < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "nonnegative budget needs a finite capacity >= 0, got {capacity}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Dimension fixed by the set, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConstraintSet::Box { lo, .. } => Some(lo.len()),
            ConstraintSet::EuclideanBall { center, .. } => Some(center.len()),
            _ => None,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            ConstraintSet::FullSpace => true,
            ConstraintSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            ConstraintSet::EuclideanBall { center, radius } => {
                crate::vector::dist(x, center) <= radius + tol
            }
            ConstraintSet::BudgetHalfspace { capacity } => x.iter().sum::<f64>() <= capacity + tol,
            ConstraintSet::NonnegBudget { capacity } => {
                x.iter().all(|v| *v >= -tol) && x.iter().sum::<f64>() <= capacity + tol
            }
        }
    }
}

/// Loss families with closed-form gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossFamily {
    /// `l(x, z) = ||x||^2 + sum_i z_i`; gradient `2x`, independent of `z`.
    Example1,
    /// `l(x, z) = sum_i z_i x_i - gamma_i x_i + kappa_i x_i^2`.
    QuadraticSeparable { gamma: Vec<f64>, kappa: Vec<f64> },
}

impl LossFamily {
    pub fn dim(&self) -> Option<usize> {
        match self {
            LossFamily::Example1 => None,
            LossFamily::QuadraticSeparable { gamma, .. } => Some(gamma.len()),
        }
    }

    pub fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        match self {
            LossFamily::Example1 => crate::vector::dot(x, x) + z.iter().sum::<f64>(),
            LossFamily::QuadraticSeparable { gamma, kappa } => (0..x.len())
                .map(|i| z[i] * x[i] - gamma[i] * x[i] + kappa[i] * x[i] * x[i])
                .sum(),
        }
    }

    /// Gradient in `x` of `l(x, z)`.
    pub fn gradient(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        match self {
            LossFamily::Example1 => x.iter().map(|v| 2.0 * v).collect(),
            LossFamily::QuadraticSeparable { gamma, kappa } => (0..x.len())
                .map(|i| z[i] - gamma[i] + 2.0 * kappa[i] * x[i])
                .collect(),
        }
    }

    /// Diagonal of the (constant) Hessian in `x`.
    pub fn hessian_diagonal(&self, dim: usize) -> Vec<f64> {
        match self {
            LossFamily::Example1 => vec![2.0; dim],
            LossFamily::QuadraticSeparable { kappa, .. } => kappa.iter().map(|k| 2.0 * k).collect(),
        }
    }

    /// Lipschitz constant of `z -> grad_x l(x, z)`.
    pub fn gradient_z_lipschitz(&self) -> f64 {
        match self {
            LossFamily::Example1 => 0.0,
            LossFamily::QuadraticSeparable { .. } => 1.0,
        }
    }

    /// Lipschitz constant of `z -> l(x, z)` uniformly in `x`; infinite when
    /// the loss is bilinear in `(x, z)` on an unbounded domain.
    pub fn value_z_lipschitz(&self, dim: usize) -> f64 {
        match self {
            LossFamily::Example1 => (dim as f64).sqrt(),
            LossFamily::QuadraticSeparable { .. } => f64::INFINITY,
        }
    }

    fn validate(&self) -> Result<()> {
        if let LossFamily::QuadraticSeparable { gamma, kappa } = self {
            if gamma.len() != kappa.len() {
                return Err(Error::DimensionMismatch {
                    expected: gamma.len(),
                    got: kappa.len(),
                });
            }
            if kappa.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
                return Err(Error::InvalidArgument("kappa must be positive".into()));
            }
            if !crate::vector::all_finite(gamma) {
                return Err(Error::NonFinite("gamma"));
            }
        }
        Ok(())
    }
}

/// A user-supplied constant that differs from the one implied by the loss
/// family and distributional map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantMismatch {
    pub step: usize,
    pub name: &'static str,
    pub supplied: f64,
    pub derived: f64,
}

/// One frozen time step of a [`ProblemInstance`].
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub t: usize,
    pub loss: &'a LossFamily,
    pub set: &'a ConstraintSet,
    pub map: &'a GaussianLocationMap,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
}

/// An immutable time-varying problem: one loss, constraint set and
/// distributional map per step plus the regularity constants used by the
/// bounds.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    dim: usize,
    losses: Vec<LossFamily>,
    constraints: Vec<ConstraintSet>,
    maps: Vec<GaussianLocationMap>,
    constants: RegularityConstants,
}

impl ProblemInstance {
    pub fn new(
        losses: Vec<LossFamily>,
        constraints: Vec<ConstraintSet>,
        maps: Vec<GaussianLocationMap>,
        constants: RegularityConstants,
    ) -> Result<Self> {
        let horizon = losses.len();
        if horizon == 0 {
            return Err(Error::EmptyInput("problem horizon"));
        }
        for (what, len) in [
            ("constraints", constraints.len()),
            ("maps", maps.len()),
            ("constants", constants.horizon()),
        ] {
            if len != horizon {
                return Err(Error::HorizonMismatch {
                    what,
                    expected: horizon,
                    got: len,
                });
            }
        }
        constants.validate()?;
        let dim = maps[0].dim();
        for t in 0..horizon {
            losses[t].validate()?;
            constraints[t].validate()?;
            for d in [losses[t].dim(), constraints[t].dim(), Some(maps[t].dim())]
                .into_iter()
                .flatten()
            {
                if d != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: d });
                }
            }
        }
        let instance = ProblemInstance {
            dim,
            losses,
            constraints,
            maps,
            constants,
        };
        for m in instance.constant_mismatches() {
            log::warn!(
                "step {}: supplied {} = {} differs from derived {}",
                m.step,
                m.name,
                m.supplied,
                m.derived
            );
        }
        Ok(instance)
    }

    /// The scalar example family over `mu.len()` steps with the derived
    /// constants `alpha = beta = 2`, `eps = mu`, `gamma = 1`.
    pub fn example1(mu: &[f64], sigma: &[f64]) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::HorizonMismatch {
                what: "sigma",
                expected: mu.len(),
                got: sigma.len(),
            });
        }
        let horizon = mu.len();
        let maps = mu
            .iter()
            .zip(sigma)
            .map(|(&m, &s)| GaussianLocationMap::new(m, s, 1))
            .collect::<Result<Vec<_>>>()?;
        let constants = RegularityConstants::new(
            vec![2.0; horizon],
            vec![2.0; horizon],
            mu.to_vec(),
            vec![1.0; horizon],
        )?;
        Self::new(
            vec![LossFamily::Example1; horizon],
            vec![ConstraintSet::FullSpace; horizon],
            maps,
            constants,
        )
    }

    /// Builds an instance whose regularity constants are the derived ones.
    pub fn with_derived_constants(
        losses: Vec<LossFamily>,
        constraints: Vec<ConstraintSet>,
        maps: Vec<GaussianLocationMap>,
    ) -> Result<Self> {
        let dim = maps.first().ok_or(Error::EmptyInput("problem horizon"))?.dim();
        if losses.len() != maps.len() {
            return Err(Error::HorizonMismatch {
                what: "maps",
                expected: losses.len(),
                got: maps.len(),
            });
        }
        let draft = ProblemInstance {
            dim,
            losses,
            constraints,
            maps,
            constants: RegularityConstants {
                alpha: Vec::new(),
                beta: Vec::new(),
                eps: Vec::new(),
                gamma_lip: Vec::new(),
            },
        };
        let derived = draft.derived_constants();
        Self::new(draft.losses, draft.constraints, draft.maps, derived)
    }

    pub fn horizon(&self) -> usize {
        self.losses.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> &RegularityConstants {
        &self.constants
    }

    pub fn losses(&self) -> &[LossFamily] {
        &self.losses
    }

    pub fn constraints(&self) -> &[ConstraintSet] {
        &self.constraints
    }

    pub fn maps(&self) -> &[GaussianLocationMap] {
        &self.maps
    }

    /// Returns a copy of this instance with different regularity constants.
    pub fn with_constants(&self, constants: RegularityConstants) -> Result<Self> {
        Self::new(
            self.losses.clone(),
            self.constraints.clone(),
            self.maps.clone(),
            constants,
        )
    }

    pub fn step(&self, t: usize) -> StepView<'_> {
        StepView {
            t,
            loss: &self.losses[t],
            set: &self.constraints[t],
            map: &self.maps[t],
            alpha: self.constants.alpha[t],
            beta: self.constants.beta[t],
            eps: self.constants.eps[t],
        }
    }

    /// Constants recomputed from the loss Hessian and the map: `alpha` is the
    /// smallest Hessian eigenvalue, `beta` the larger of the largest Hessian
    /// eigenvalue and the gradient's Lipschitz constant in `z`, `eps` the
    /// map's location slope.
    pub fn derived_constants(&self) -> RegularityConstants {
        let mut alpha = Vec::with_capacity(self.horizon());
        let mut beta = Vec::with_capacity(self.horizon());
        let mut eps = Vec::with_capacity(self.horizon());
        let mut gamma_lip = Vec::with_capacity(self.horizon());
        for (loss, map) in self.losses.iter().zip(&self.maps) {
            let h = loss.hessian_diagonal(self.dim);
            let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            alpha.push(lo);
            beta.push(hi.max(loss.gradient_z_lipschitz()));
            eps.push(map.sensitivity());
            gamma_lip.push(loss.value_z_lipschitz(self.dim));
        }
        RegularityConstants {
            alpha,
            beta,
            eps,
            gamma_lip,
        }
    }

    pub fn constant_mismatches(&self) -> Vec<ConstantMismatch> {
        let derived = self.derived_constants();
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        let mut out = Vec::new();
        for t in 0..self.horizon() {
            for (name, supplied, derived) in [
                ("alpha", self.constants.alpha[t], derived.alpha[t]),
                ("beta", self.constants.beta[t], derived.beta[t]),
                ("eps", self.constants.eps[t], derived.eps[t]),
            ] {
                if !close(supplied, derived) {
                    out.push(ConstantMismatch {
                        step: t,
                        name,
                        supplied,
                        derived,
                    });
                }
            }
        }
        out
    }
}
