use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sequence::SequenceSpec;

/// Where the per-step price slopes `mu_t` come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriceSource {
    /// Seeded synthetic series; falls back to the scenario seed.
    Synthetic {
        #[serde(default)]
        seed: Option<u64>,
    },
    /// CSV file with one price per line.
    File { path: PathBuf },
    /// Inline sequence.
    Values { values: SequenceSpec },
}

impl Default for PriceSource {
    fn default() -> Self {
        PriceSource::Synthetic { seed: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetKind {
    /// `sum x_i <= c`
    #[default]
    BudgetHalfspace,
    /// `x >= 0, sum x_i <= c`
    NonnegBudget,
}

/// Which regularity constants feed the envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantsChoice {
    /// From the loss: `alpha = 2 kappa`, `beta = max(2 kappa, 1)`, `eps = mu`.
    #[default]
    Derived,
    /// `alpha = beta = 2`, `eps = mu`.
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSettings {
    pub constants: ConstantsChoice,
    /// Tail exponent used when fitting the gradient errors.
    pub theta: f64,
    /// Confidence level of the high-probability and Markov envelopes.
    pub delta: f64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            constants: ConstantsChoice::Derived,
            theta: 0.5,
            delta: 0.1,
        }
    }
}

/// The fleet-charging scenario: `stations` homogeneous stations with loss
/// `sum_i z_i x_i - gamma_t x_i + kappa_t x_i^2`, prices
/// `z_i ~ N(mu_t x_i, sigma_t^2)` and a shared energy budget `capacity_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub stations: usize,
    pub steps: usize,
    pub capacity: SequenceSpec,
    pub kappa: SequenceSpec,
    pub gamma: SequenceSpec,
    pub sigma: SequenceSpec,
    pub eta: SequenceSpec,
    pub constraint: BudgetKind,
    pub x0_radius: f64,
    pub replications: usize,
    pub lazy_batch: usize,
    pub seed: u64,
    pub prices: PriceSource,
    pub bounds: BoundSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            stations: 10,
            steps: 100,
            capacity: SequenceSpec::Scalar(10.0),
            kappa: SequenceSpec::Scalar(2.0),
            // gamma_t = 1 - |t - 50| / 100
            gamma: SequenceSpec::piecewise_linear(vec![[0.0, 0.5], [50.0, 1.0], [100.0, 0.5]]),
            sigma: SequenceSpec::Scalar(1.0),
            eta: SequenceSpec::Scalar(0.3),
            constraint: BudgetKind::BudgetHalfspace,
            x0_radius: 5.0,
            replications: 1000,
            lazy_batch: 10,
            seed: 0,
            prices: PriceSource::default(),
            bounds: BoundSettings::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML scenario; relative price-file paths resolve against the
    /// config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&src)?;
        if let PriceSource::File { path: p } = &mut cfg.prices {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive")))
            }
        };
        positive("stations", self.stations > 0)?;
        positive("steps", self.steps > 0)?;
        positive("replications", self.replications > 0)?;
        positive("x0_radius", self.x0_radius > 0.0 && self.x0_radius.is_finite())?;
        if self.lazy_batch < 2 {
            return Err(Error::Config("lazy_batch must be at least 2".into()));
        }
        if !(self.bounds.theta > 0.0) {
            return Err(Error::Config("bounds.theta must be positive".into()));
        }
        if !(self.bounds.delta > 0.0 && self.bounds.delta < 1.0) {
            return Err(Error::Config("bounds.delta must lie in (0, 1)".into()));
        }
        for (name, seq) in [
            ("capacity", &self.capacity),
            ("kappa", &self.kappa),
            ("sigma", &self.sigma),
            ("eta", &self.eta),
        ] {
            let values = seq.evaluate(self.steps)?;
            if values.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config(format!("{name} must be positive at every step")));
            }
        }
        let gamma = self.gamma.evaluate(self.steps)?;
        if gamma.iter().any(|v| *v < 0.0) {
            return Err(Error::Config("gamma must be nonnegative".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
