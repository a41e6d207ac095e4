use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BudgetKind, ConstantsChoice, PriceSource, ScenarioConfig};
use super::prices::{load_price_series, sample_sphere, synth_price_series};
use crate::algorithms::{
    contraction_sequence, drift_sequence, kkt_stable_point_ev, run_opgd, run_ospgd, solve_stable_point,
    AlgorithmConfig, Contraction, Mode,
};
use crate::bounds::{markov_envelope, opgd_envelope, ospgd_expectation_envelope, ospgd_hp_envelope, BoundInputs};
use crate::distmap::GaussianLocationMap;
use crate::error::{Error, Result};
use crate::problem::{ConstraintSet, LossFamily, ProblemInstance, RegularityConstants};
use crate::subweibull::{fit_subweibull, DEFAULT_MAX_MOMENT, MIN_FIT_SAMPLES};
use crate::vector;

/// Tolerance for the pathwise domination check of exact runs.
pub const DOMINATION_TOL: f64 = 1e-9;
/// Budget residual allowed for iterates.
pub const FEASIBILITY_RESIDUAL: f64 = 1e-10;
/// Number of trailing steps averaged for the steady-state ordering report.
const STEADY_STATE_WINDOW: usize = 20;

/// A fully materialized scenario: per-step data, the problem instance with the
/// chosen regularity constants, and the stable points.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub prices: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kappa: Vec<f64>,
    pub capacity: Vec<f64>,
    pub sigma: Vec<f64>,
    pub eta: Vec<f64>,
    pub instance: ProblemInstance,
    pub derived_constants: RegularityConstants,
    pub stated_constants: RegularityConstants,
    pub stable_points: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub contraction: Vec<Contraction>,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let steps = config.steps;
        let d = config.stations;
        let prices = match &config.prices {
            PriceSource::Synthetic { seed } => synth_price_series(steps, seed.unwrap_or(config.seed)),
            PriceSource::File { path } => load_price_series(path, steps)?,
            PriceSource::Values { values } => values.evaluate(steps)?,
        };
        if prices.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config("prices must be nonnegative".into()));
        }
        let gamma = config.gamma.evaluate(steps)?;
        let kappa = config.kappa.evaluate(steps)?;
        let capacity = config.capacity.evaluate(steps)?;
        let sigma = config.sigma.evaluate(steps)?;
        let eta = config.eta.evaluate(steps)?;

        let losses: Vec<LossFamily> = (0..steps)
            .map(|t| LossFamily::QuadraticSeparable {
                gamma: vec![gamma[t]; d],
                kappa: vec![kappa[t]; d],
            })
            .collect();
        let constraints: Vec<ConstraintSet> = capacity
            .iter()
            .map(|&c| match config.constraint {
                BudgetKind::BudgetHalfspace => ConstraintSet::BudgetHalfspace { capacity: c },
                BudgetKind::NonnegBudget => ConstraintSet::NonnegBudget { capacity: c },
            })
            .collect();
        let maps = prices
            .iter()
            .zip(&sigma)
            .map(|(&mu, &s)| GaussianLocationMap::new(mu, s, d))
            .collect::<Result<Vec<_>>>()?;

        let derived = ProblemInstance::with_derived_constants(losses, constraints, maps)?;
        let derived_constants = derived.constants().clone();
        let stated_constants = RegularityConstants::new(
            vec![2.0; steps],
            vec![2.0; steps],
            prices.clone(),
            derived_constants.gamma_lip.clone(),
        )?;
        let instance = match config.bounds.constants {
            ConstantsChoice::Derived => derived,
            ConstantsChoice::Nominal => derived.with_constants(stated_constants.clone())?,
        };

        let stable_points = (0..steps)
            .map(|t| {
                let set = &instance.constraints()[t];
                kkt_stable_point_ev(&vec![gamma[t]; d], kappa[t], prices[t], set)
                    .or_else(|_| solve_stable_point(&instance, t, eta[t], 1e-10, 100_000))
            })
            .collect::<Result<Vec<_>>>()?;
        let phi = drift_sequence(&stable_points);
        let contraction = contraction_sequence(&instance, &eta)?;
        for (t, c) in contraction.iter().enumerate() {
            if !c.contractive {
                log::warn!("step {t}: contraction factor {} >= 1, envelopes invalid", c.lambda);
            }
        }
        Ok(Scenario {
            config: config.clone(),
            prices,
            gamma,
            kappa,
            capacity,
            sigma,
            eta,
            instance,
            derived_constants,
            stated_constants,
            stable_points,
            phi,
            contraction,
        })
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    /// Generator of replication `r`: the master seed with stream `r + 1`
    /// (stream 0 is reserved for the synthetic price series).
    pub fn replication_rng(&self, r: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(r as u64 + 1);
        rng
    }

    /// One replication: draw `x0`, then run exact, greedy and lazy from it.
    pub fn replicate(&self, r: usize) -> Result<Replication> {
        let mut rng = self.replication_rng(r);
        let x0 = sample_sphere(self.config.x0_radius, self.config.stations, &mut rng);
        let steps = self.steps();
        let exact = run_opgd(
            &self.instance,
            &self.stable_points,
            &AlgorithmConfig::exact(self.eta.clone())?,
            &x0,
        )?;
        let greedy = run_ospgd(
            &self.instance,
            &self.stable_points,
            &AlgorithmConfig::new(self.eta.clone(), vec![1; steps], Mode::Greedy)?,
            &x0,
            &mut rng,
        )?;
        let lazy = run_ospgd(
            &self.instance,
            &self.stable_points,
            &AlgorithmConfig::new(self.eta.clone(), vec![self.config.lazy_batch; steps], Mode::Lazy)?,
            &x0,
            &mut rng,
        )?;
        let infeasible = [&exact, &greedy, &lazy]
            .iter()
            .map(|run| {
                // x_{t} is the projection onto C_{t-1}
                run.iterates
                    .iter()
                    .skip(1)
                    .zip(self.instance.constraints())
                    .filter(|(x, set)| !set.contains(x, FEASIBILITY_RESIDUAL))
                    .count()
            })
            .sum();
        Ok(Replication {
            e0: exact.tracking_error[0],
            exact: exact.tracking_error,
            greedy: greedy.tracking_error,
            lazy: lazy.tracking_error,
            xi_greedy: greedy.grad_errors,
            xi_lazy: lazy.grad_errors,
            infeasible,
        })
    }

    /// Envelope inputs for the first `steps - 1` transitions with the given
    /// initial error and noise statistics.
    fn bound_inputs(&self, e0: f64, xi_mean: &[f64], nu: &[f64]) -> BoundInputs {
        let n = self.steps() - 1;
        BoundInputs {
            lambda: self.contraction[..n].iter().map(|c| c.lambda).collect(),
            phi: self.phi[..n].to_vec(),
            e0,
            eta: self.eta[..n].to_vec(),
            xi_mean: xi_mean[..n].to_vec(),
            theta: self.config.bounds.theta,
            nu: nu[..n].to_vec(),
            delta: self.config.bounds.delta,
        }
    }
}

/// Per-replication tracking errors and gradient errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub e0: f64,
    pub exact: Vec<f64>,
    pub greedy: Vec<f64>,
    pub lazy: Vec<f64>,
    pub xi_greedy: Vec<f64>,
    pub xi_lazy: Vec<f64>,
    /// Iterates outside their constraint set across all three modes.
    pub infeasible: usize,
}

/// Measured gradient-error statistics of one stochastic mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseStats {
    /// Monte Carlo mean of `xi_t`.
    pub mean: Vec<f64>,
    /// Proxy variance `nu_t` fitted at the configured `theta`; absent with
    /// fewer than the minimum number of replications.
    pub nu: Option<Vec<f64>>,
}

/// Aggregates of one stochastic mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mean_err: Vec<f64>,
    pub se_err: Vec<f64>,
    pub xi: NoiseStats,
    pub env_exp: Vec<f64>,
    /// All `NaN` when `nu` could not be fitted.
    pub env_hp: Vec<f64>,
    pub env_markov: Vec<f64>,
    /// Fraction of replications under their own high-probability envelope.
    pub hp_coverage: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub seed: u64,
    pub replications: usize,
    pub prices: Vec<f64>,
    pub stable_points: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mean_err_exact: Vec<f64>,
    pub se_err_exact: Vec<f64>,
    /// Deterministic envelope started from the mean initial error.
    pub env_opgd: Vec<f64>,
    pub greedy: ModeSummary,
    pub lazy: ModeSummary,
    /// Exact-run steps exceeding their own envelope, over all replications.
    pub exact_domination_violations: usize,
    pub infeasible_iterates: usize,
    /// Steps whose contraction factor is not below one.
    pub envelope_invalid_steps: Vec<usize>,
    /// Steady-state ordering exact <= lazy <= greedy of mean errors.
    pub steady_state_ordering: bool,
    #[serde(skip)]
    pub wall_time_secs: f64,
    #[serde(skip)]
    pub runs: Vec<Replication>,
}

impl ExperimentResult {
    pub fn steps(&self) -> usize {
        self.mean_err_exact.len()
    }
}

/// Runs all replications of a scenario. With `workers = Some(n)` a dedicated
/// pool of `n` threads is used, otherwise the global pool. Aggregation
/// happens in replication order, so the numeric result does not depend on
/// the worker count.
pub fn run_experiment(config: &ScenarioConfig, workers: Option<usize>) -> Result<ExperimentResult> {
    let start = Instant::now();
    let scenario = Scenario::build(config)?;
    let m = config.replications;
    let simulate = || (0..m).into_par_iter().map(|r| scenario.replicate(r)).collect::<Result<Vec<_>>>();
    let runs = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?
            .install(simulate)?,
        None => simulate()?,
    };
    let mut result = aggregate(&scenario, runs)?;
    result.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(result)
}

fn column(runs: &[Replication], t: usize, pick: impl Fn(&Replication) -> &[f64]) -> Vec<f64> {
    runs.iter().map(|r| pick(r)[t]).collect()
}

fn mean_se(runs: &[Replication], steps: usize, pick: impl Fn(&Replication) -> &[f64] + Copy) -> (Vec<f64>, Vec<f64>) {
    (0..steps)
        .map(|t| vector::mean_and_stderr(&column(runs, t, pick)))
        .unzip()
}

fn summarize_mode(
    scenario: &Scenario,
    runs: &[Replication],
    e0_mean: f64,
    err: impl Fn(&Replication) -> &[f64] + Copy,
    xi: impl Fn(&Replication) -> &[f64] + Copy,
) -> Result<ModeSummary> {
    let steps = scenario.steps();
    let (mean_err, se_err) = mean_se(runs, steps, err);
    let xi_mean: Vec<f64> = (0..steps).map(|t| vector::mean(&column(runs, t, xi))).collect();
    let nu = if runs.len() >= MIN_FIT_SAMPLES {
        Some(
            (0..steps)
                .map(|t| {
                    fit_subweibull(&column(runs, t, xi), scenario.config.bounds.theta, DEFAULT_MAX_MOMENT)
                        .map(|f| f.nu)
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        log::warn!(
            "{} replications < {MIN_FIT_SAMPLES}: high-probability envelope not computed",
            runs.len()
        );
        None
    };
    let nan = vec![f64::NAN; steps];
    let inputs = scenario.bound_inputs(e0_mean, &xi_mean, nu.as_deref().unwrap_or(&nan));
    let env_exp = ospgd_expectation_envelope(&inputs)?;
    let env_markov = markov_envelope(&inputs)?;
    let (env_hp, hp_coverage) = match &nu {
        Some(nu) => {
            let env_hp = ospgd_hp_envelope(&inputs)?;
            let mut covered = vec![0usize; steps];
            for run in runs {
                let own = ospgd_hp_envelope(&scenario.bound_inputs(run.e0, &xi_mean, nu))?;
                for (c, (e, b)) in covered.iter_mut().zip(err(run).iter().zip(&own)) {
                    if e <= b {
                        *c += 1;
                    }
                }
            }
            let frac = covered.iter().map(|&c| c as f64 / runs.len() as f64).collect();
            (env_hp, Some(frac))
        }
        None => (nan, None),
    };
    Ok(ModeSummary {
        mean_err,
        se_err,
        xi: NoiseStats { mean: xi_mean, nu },
        env_exp,
        env_hp,
        env_markov,
        hp_coverage,
    })
}

fn aggregate(scenario: &Scenario, runs: Vec<Replication>) -> Result<ExperimentResult> {
    let steps = scenario.steps();
    let e0_mean = vector::mean(&runs.iter().map(|r| r.e0).collect::<Vec<_>>());
    let (mean_err_exact, se_err_exact) = mean_se(&runs, steps, |r| &r.exact);
    let zeros = vec![0.0; steps];
    let env_opgd = opgd_envelope(&scenario.bound_inputs(e0_mean, &zeros, &zeros))?;

    let mut exact_domination_violations = 0;
    for run in &runs {
        let own = opgd_envelope(&scenario.bound_inputs(run.e0, &zeros, &zeros))?;
        exact_domination_violations += run
            .exact
            .iter()
            .zip(&own)
            .filter(|(e, b)| **e > **b + DOMINATION_TOL)
            .count();
    }
    if exact_domination_violations > 0 {
        log::warn!("{exact_domination_violations} exact-run steps exceed their envelope");
    }

    let greedy = summarize_mode(scenario, &runs, e0_mean, |r| &r.greedy, |r| &r.xi_greedy)?;
    let lazy = summarize_mode(scenario, &runs, e0_mean, |r| &r.lazy, |r| &r.xi_lazy)?;

    let window = STEADY_STATE_WINDOW.min(steps);
    let tail = |v: &[f64]| vector::mean(&v[steps - window..]);
    let (ss_exact, ss_lazy, ss_greedy) = (tail(&mean_err_exact), tail(&lazy.mean_err), tail(&greedy.mean_err));
    let steady_state_ordering = ss_exact <= ss_lazy && ss_lazy <= ss_greedy;
    if !steady_state_ordering {
        log::info!(
            "steady-state ordering not observed: exact {ss_exact:.3e}, lazy {ss_lazy:.3e}, greedy {ss_greedy:.3e}"
        );
    }
    let envelope_invalid_steps = scenario
        .contraction
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.contractive)
        .map(|(t, _)| t)
        .collect();

    Ok(ExperimentResult {
        config: scenario.config.clone(),
        config_hash: scenario.config.hash(),
        seed: scenario.config.seed,
        replications: runs.len(),
        prices: scenario.prices.clone(),
        stable_points: scenario.stable_points.clone(),
        phi: scenario.phi.clone(),
        lambda: scenario.contraction.iter().map(|c| c.lambda).collect(),
        mean_err_exact,
        se_err_exact,
        env_opgd,
        greedy,
        lazy,
        exact_domination_violations,
        infeasible_iterates: runs.iter().map(|r| r.infeasible).sum(),
        envelope_invalid_steps,
        steady_state_ordering,
        wall_time_secs: 0.0,
        runs,
    })
}
