use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{EnvId, EnvOptions};
use crate::error::{Error, Result};
use crate::targets::MedianScope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ppo,
    Pome,
    PpoModelBased,
}

impl Mode {
    pub fn uses_bonus(self) -> bool {
        self == Mode::Pome
    }
}

/// Mode names accepted on the command line and in config files.
/// `pome_nondecay` is POME with a constant α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModeArg {
    Ppo,
    Pome,
    PomeNondecay,
    PpoModelBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ScheduleKind {
    LinearToZero,
    Constant,
}

/// `value₀·f` for [`ScheduleKind::LinearToZero`], `value₀` otherwise.
pub fn schedule(initial: f64, progress: f64, kind: ScheduleKind) -> f64 {
    debug_assert!((0.0..=1.0).contains(&progress));
    match kind {
        ScheduleKind::LinearToZero => initial * progress,
        ScheduleKind::Constant => initial,
    }
}

/// Fully resolved hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub env: EnvId,
    pub sparse_reward: bool,
    pub mode: Mode,
    pub gamma: f64,
    pub lambda: f64,
    pub k: usize,
    pub workers: usize,
    pub clip_ratio: f64,
    pub clip_schedule: ScheduleKind,
    pub alpha0: f64,
    pub alpha_schedule: ScheduleKind,
    pub bonus_clip: bool,
    pub beta: f64,
    pub cv: f64,
    pub ct: f64,
    pub cr: f64,
    pub entropy_coef: f64,
    pub lr0: f64,
    pub lr_schedule: ScheduleKind,
    pub epochs: usize,
    pub minibatches: usize,
    pub adv_norm: bool,
    pub median_scope: MedianScope,
    pub total_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvId::Chain(20),
            sparse_reward: false,
            mode: Mode::Pome,
            gamma: 0.99,
            lambda: 0.95,
            k: 128,
            workers: 8,
            clip_ratio: 0.2,
            clip_schedule: ScheduleKind::Constant,
            alpha0: 0.1,
            alpha_schedule: ScheduleKind::LinearToZero,
            bonus_clip: true,
            beta: 0.0,
            cv: 1.0,
            ct: 2.0,
            cr: 2.0,
            entropy_coef: 0.0,
            lr0: 2.5e-4,
            lr_schedule: ScheduleKind::LinearToZero,
            epochs: 4,
            minibatches: 1,
            adv_norm: true,
            median_scope: MedianScope::Worker,
            total_steps: 300_000,
            seed: 0,
        }
    }
}

/// Partial config: one layer of file values or command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub env: Option<EnvId>,
    pub sparse_reward: Option<bool>,
    pub mode: Option<ModeArg>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub workers: Option<usize>,
    pub clip_ratio: Option<f64>,
    pub clip_schedule: Option<ScheduleKind>,
    pub alpha0: Option<f64>,
    pub alpha_schedule: Option<ScheduleKind>,
    pub bonus_clip: Option<bool>,
    pub beta: Option<f64>,
    pub cv: Option<f64>,
    pub ct: Option<f64>,
    pub cr: Option<f64>,
    pub entropy_coef: Option<f64>,
    pub lr0: Option<f64>,
    pub lr_schedule: Option<ScheduleKind>,
    pub epochs: Option<usize>,
    pub minibatches: Option<usize>,
    pub adv_norm: Option<bool>,
    pub median_scope: Option<MedianScope>,
    pub total_steps: Option<usize>,
    pub seed: Option<u64>,
}

macro_rules! layer_fields {
    ($dst:ident, $src:ident; $($field:ident),*) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field; } )*
    };
}

impl ConfigOverrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(field_of(&e), e.message().to_owned()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// `other` wins wherever it sets a value.
    pub fn layered(mut self, other: &ConfigOverrides) -> Self {
        layer_fields!(self, other; env, sparse_reward, mode, gamma, lambda, k, workers, clip_ratio,
            clip_schedule, alpha0, alpha_schedule, bonus_clip, beta, cv, ct, cr, entropy_coef, lr0,
            lr_schedule, epochs, minibatches, adv_norm, median_scope, total_steps, seed);
        self
    }

    /// Fills every unset field from the defaults and validates the result.
    pub fn resolve(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let mode_arg = self.mode.unwrap_or(ModeArg::Pome);
        let mode = match mode_arg {
            ModeArg::Ppo => Mode::Ppo,
            ModeArg::Pome | ModeArg::PomeNondecay => Mode::Pome,
            ModeArg::PpoModelBased => Mode::PpoModelBased,
        };

        let alpha0 = match (mode, self.alpha0) {
            (Mode::Pome, a) => a.unwrap_or(d.alpha0),
            (_, Some(a)) if a != 0.0 => {
                return Err(Error::config(
                    "alpha0",
                    format!("exploration coefficient {a} has no effect in mode {mode:?}"),
                ))
            }
            _ => 0.0,
        };

        let alpha_schedule = match (mode_arg, self.alpha_schedule) {
            (ModeArg::PomeNondecay, Some(ScheduleKind::LinearToZero)) => {
                return Err(Error::config("alpha_schedule", "pome_nondecay keeps alpha constant"))
            }
            (ModeArg::PomeNondecay, _) => ScheduleKind::Constant,
            (_, s) => s.unwrap_or(d.alpha_schedule),
        };

        let cfg = TrainConfig {
            env: self.env.unwrap_or(d.env),
            sparse_reward: self.sparse_reward.unwrap_or(d.sparse_reward),
            mode,
            gamma: self.gamma.unwrap_or(d.gamma),
            lambda: self.lambda.unwrap_or(d.lambda),
            k: self.k.unwrap_or(d.k),
            workers: self.workers.unwrap_or(d.workers),
            clip_ratio: self.clip_ratio.unwrap_or(d.clip_ratio),
            clip_schedule: self.clip_schedule.unwrap_or(d.clip_schedule),
            alpha0,
            alpha_schedule,
            bonus_clip: self.bonus_clip.unwrap_or(d.bonus_clip),
            beta: self.beta.unwrap_or(d.beta),
            cv: self.cv.unwrap_or(d.cv),
            ct: self.ct.unwrap_or(d.ct),
            cr: self.cr.unwrap_or(d.cr),
            entropy_coef: self.entropy_coef.unwrap_or(d.entropy_coef),
            lr0: self.lr0.unwrap_or(d.lr0),
            lr_schedule: self.lr_schedule.unwrap_or(d.lr_schedule),
            epochs: self.epochs.unwrap_or(d.epochs),
            minibatches: self.minibatches.unwrap_or(d.minibatches),
            adv_norm: self.adv_norm.unwrap_or(d.adv_norm),
            median_scope: self.median_scope.unwrap_or(d.median_scope),
            total_steps: self.total_steps.unwrap_or(d.total_steps),
            seed: self.seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn field_of(e: &toml::de::Error) -> String {
    // toml reports unknown keys as "unknown field `x`, expected ..."
    let msg = e.message();
    msg.split('`').nth(1).unwrap_or("config").to_owned()
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |field: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("{v} must lie in (0, 1]")))
            }
        };
        let non_negative = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("{v} must be finite and non-negative")))
            }
        };
        let positive = |field: &str, v: usize| {
            if v > 0 {
                Ok(())
            } else {
                Err(Error::config(field, "must be positive"))
            }
        };
        unit("gamma", self.gamma)?;
        unit("lambda", self.lambda)?;
        non_negative("alpha0", self.alpha0)?;
        non_negative("beta", self.beta)?;
        non_negative("cv", self.cv)?;
        non_negative("ct", self.ct)?;
        non_negative("cr", self.cr)?;
        non_negative("entropy_coef", self.entropy_coef)?;
        if !(self.clip_ratio > 0.0 && self.clip_ratio.is_finite()) {
            return Err(Error::config("clip_ratio", "must be positive"));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::config("lr0", "must be positive"));
        }
        positive("k", self.k)?;
        positive("workers", self.workers)?;
        positive("epochs", self.epochs)?;
        positive("minibatches", self.minibatches)?;
        if (self.k * self.workers) % self.minibatches != 0 {
            return Err(Error::config(
                "minibatches",
                format!("k·workers = {} is not divisible by {}", self.k * self.workers, self.minibatches),
            ));
        }
        if self.total_steps < self.batch_size() {
            return Err(Error::config(
                "total_steps",
                format!("{} is below one iteration ({} steps)", self.total_steps, self.batch_size()),
            ));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed", format!("{} exceeds the TOML integer range", self.seed)));
        }
        if self.mode != Mode::Pome && self.alpha0 != 0.0 {
            return Err(Error::config("alpha0", "only POME uses the exploration coefficient"));
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.k * self.workers
    }

    pub fn iterations(&self) -> usize {
        self.total_steps / self.batch_size()
    }

    pub fn env_options(&self) -> EnvOptions {
        EnvOptions {
            sparse_reward: self.sparse_reward,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
