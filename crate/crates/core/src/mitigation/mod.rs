//! Mitigation strategies: configuration, phase plans and the training engine.
//!
//! Ensemble sizes count every member, including the unperturbed model, so a
//! delayed ensemble of size 10 is the trained model plus 9 perturbed copies.

mod engine;
mod plan;

use serde::{Deserialize, Serialize};

pub use engine::{run_strategy, RunOutput, TrainData};
pub use plan::{build_phase_plan, Event, PhasePlan, Variant};

use crate::error::{Error, Result};
use crate::noise::NoiseTarget;
use crate::optim::{OptimizerKind, ScheduleKind};

/// The Default fine-tuning recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: ScheduleKind,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 8,
            lr: 1e-3,
            schedule: ScheduleKind::Constant,
            optimizer: OptimizerKind::default(),
        }
    }
}

impl TrainConfig {
    /// Learning rate used for 110M-parameter transformers; far too small for
    /// the desk-scale models trained here.
    pub fn paper_preset() -> Self {
        TrainConfig { lr: 1e-5, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, train_size: usize) -> u64 {
        train_size.div_ceil(self.batch_size) as u64
    }

    /// Optimizer steps of the Default strategy on `train_size` samples.
    pub fn total_steps(&self, train_size: usize) -> u64 {
        self.epochs as u64 * self.steps_per_epoch(train_size)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeniConfig {
    /// Variance (not std) of the raw Gaussian draws.
    pub var_noise: f64,
    pub noise_start_frac: f64,
    pub noise_end_frac: f64,
    pub ensemble_start_frac: f64,
    pub steps_noisy: u64,
    pub steps_regular: u64,
    /// Total member count of the ensembles, the unperturbed model included.
    pub ensemble_size: usize,
    pub target: NoiseTarget,
    /// When set, `steps_noisy` and `steps_regular` are lengths for a run of
    /// this many steps and are scaled proportionally to the actual run.
    pub reference_steps: Option<u64>,
}

impl Default for DeniConfig {
    fn default() -> Self {
        DeniConfig {
            var_noise: 0.15,
            noise_start_frac: 0.3,
            noise_end_frac: 0.6,
            ensemble_start_frac: 0.9,
            steps_noisy: 125,
            steps_regular: 125,
            ensemble_size: 10,
            target: NoiseTarget::default(),
            reference_steps: None,
        }
    }
}

impl DeniConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.var_noise >= 0.0) || !self.var_noise.is_finite() {
            return Err(Error::config(format!("var_noise must be >= 0, got {}", self.var_noise)));
        }
        let (a, b, c) = (self.noise_start_frac, self.noise_end_frac, self.ensemble_start_frac);
        if !(0.0 < a && a < b && b <= c && c < 1.0) {
            return Err(Error::config(format!(
                "need 0 < noise_start_frac < noise_end_frac <= ensemble_start_frac < 1, got {a}, {b}, {c}"
            )));
        }
        if self.steps_noisy == 0 || self.steps_regular == 0 {
            return Err(Error::config("steps_noisy and steps_regular must be positive"));
        }
        if self.ensemble_size < 2 {
            return Err(Error::config(format!("ensemble_size must be >= 2, got {}", self.ensemble_size)));
        }
        if self.reference_steps == Some(0) {
            return Err(Error::config("reference_steps must be positive"));
        }
        Ok(())
    }
}

fn default_noise_var() -> f64 {
    0.15
}
fn default_every() -> u64 {
    25
}
fn default_swa_start() -> f64 {
    0.25
}
fn default_mixout_p() -> f64 {
    0.9
}
fn default_ensemble_size() -> usize {
    10
}
fn one() -> usize {
    1
}

/// One mitigation strategy with its hyperparameters. In JSON, unit
/// variants are plain strings (`"default"`) and the others are single-key
/// objects (`{"ensemble": {"size": 10}}`); omitted fields take defaults.
/// Config files go through [`strategy_from_json`], which also accepts a
/// bare name (`"deni"`) for any variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyConfig {
    Default,
    BestPractices,
    Ensemble {
        #[serde(default = "default_ensemble_size")]
        size: usize,
    },
    NoiseInput {
        #[serde(default = "default_noise_var")]
        var: f64,
        #[serde(default = "default_every")]
        every: u64,
    },
    NoiseWeights {
        #[serde(default = "default_noise_var")]
        var: f64,
        #[serde(default = "default_every")]
        every: u64,
    },
    Swa {
        #[serde(default = "default_swa_start")]
        start_frac: f64,
    },
    Mixout {
        #[serde(default = "default_mixout_p")]
        p: f64,
    },
    Augment {
        #[serde(default = "one")]
        n: usize,
    },
    De(#[serde(default)] DeniConfig),
    Ni(#[serde(default)] DeniConfig),
    Deni(#[serde(default)] DeniConfig),
    Denials {
        #[serde(default)]
        deni: DeniConfig,
        #[serde(default = "one")]
        n: usize,
    },
}

/// Epoch multiplier of the augmentation baseline (12 epochs instead of 10).
pub const AUGMENT_EPOCH_FACTOR: f64 = 1.2;

impl StrategyConfig {
    pub fn ensemble(size: usize) -> Self {
        StrategyConfig::Ensemble { size }
    }

    pub fn deni() -> Self {
        StrategyConfig::Deni(DeniConfig::default())
    }

    /// Stable identifier used for file names and report rows.
    pub fn id(&self) -> String {
        match self {
            StrategyConfig::Default => "default".into(),
            StrategyConfig::BestPractices => "best_practices".into(),
            StrategyConfig::Ensemble { size } => format!("ensemble-{size}"),
            StrategyConfig::NoiseInput { .. } => "noise_input".into(),
            StrategyConfig::NoiseWeights { .. } => "noise_weights".into(),
            StrategyConfig::Swa { .. } => "swa".into(),
            StrategyConfig::Mixout { .. } => "mixout".into(),
            StrategyConfig::Augment { n } => format!("augment-{n}"),
            StrategyConfig::De(_) => "de".into(),
            StrategyConfig::Ni(_) => "ni".into(),
            StrategyConfig::Deni(_) => "deni".into(),
            StrategyConfig::Denials { n, .. } => format!("denials-{n}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StrategyConfig::Default | StrategyConfig::BestPractices => Ok(()),
            StrategyConfig::Ensemble { size } if *size == 0 => Err(Error::config("ensemble size must be >= 1")),
            StrategyConfig::Ensemble { .. } => Ok(()),
            StrategyConfig::NoiseInput { var, every } | StrategyConfig::NoiseWeights { var, every } => {
                if !(*var >= 0.0) || *every == 0 {
                    return Err(Error::config("noise baselines need var >= 0 and every >= 1"));
                }
                Ok(())
            }
            StrategyConfig::Swa { start_frac } if !(0.0..1.0).contains(start_frac) => {
                Err(Error::config(format!("SWA start_frac must be in [0, 1), got {start_frac}")))
            }
            StrategyConfig::Swa { .. } => Ok(()),
            StrategyConfig::Mixout { p } if !(0.0..1.0).contains(p) => {
                Err(Error::config(format!("mixout p must be in [0, 1), got {p}")))
            }
            StrategyConfig::Mixout { .. } => Ok(()),
            StrategyConfig::Augment { n } if *n == 0 => Err(Error::config("augment n must be >= 1")),
            StrategyConfig::Augment { .. } => Ok(()),
            StrategyConfig::De(c) | StrategyConfig::Ni(c) | StrategyConfig::Deni(c) => c.validate(),
            StrategyConfig::Denials { n, .. } if *n == 0 => Err(Error::config("denials n must be >= 1")),
            StrategyConfig::Denials { deni, .. } => deni.validate(),
        }
    }

    /// Paraphrases per sample this strategy needs.
    pub fn augmentations(&self) -> usize {
        match self {
            StrategyConfig::Augment { n } | StrategyConfig::Denials { n, .. } => *n,
            _ => 0,
        }
    }
}

/// Parse a strategy, reading a bare variant name as that variant with all
/// defaults.
pub fn strategy_from_json(value: serde_json::Value) -> serde_json::Result<StrategyConfig> {
    match value {
        serde_json::Value::String(name) => serde_json::from_value(serde_json::Value::String(name.clone()))
            .or_else(|_| serde_json::from_value(serde_json::json!({ name: {} }))),
        other => serde_json::from_value(other),
    }
}

pub(crate) mod lenient {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer};

    use super::{strategy_from_json, StrategyConfig};

    pub fn one<'de, D: Deserializer<'de>>(d: D) -> Result<StrategyConfig, D::Error> {
        strategy_from_json(serde_json::Value::deserialize(d)?).map_err(D::Error::custom)
    }

    pub fn many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<StrategyConfig>, D::Error> {
        Vec::<serde_json::Value>::deserialize(d)?
            .into_iter()
            .map(|v| strategy_from_json(v).map_err(D::Error::custom))
            .collect()
    }
}

/// Optimizer steps for the augmentation baseline on `expanded_size` samples.
pub fn augment_steps(cfg: &TrainConfig, expanded_size: usize) -> u64 {
    (AUGMENT_EPOCH_FACTOR * cfg.total_steps(expanded_size) as f64).round() as u64
}

/// The DENI configuration actually used by DENIALS after expanding the data
/// `n + 1` fold: cycle lengths grow with the data so the schedule covers the
/// same fraction of training.
pub fn denials_config(deni: &DeniConfig, n: usize) -> DeniConfig {
    let mut cfg = deni.clone();
    // proportional scaling already follows the longer run
    if cfg.reference_steps.is_none() {
        cfg.steps_noisy *= (n + 1) as u64;
        cfg.steps_regular *= (n + 1) as u64;
    }
    cfg
}
