use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::discrepancy::{Bandwidth, CmdConfig, Kernel, MmdConfig};
use crate::models::ModelKind;
use crate::ppr::{PprConfig, PprMode};
use crate::{Error, Result};

/// Which nodes the regularizers compare the training nodes against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegTarget {
    /// Every node outside the training set, validation and test included.
    AllUnlabeled,
    TestOnly,
}

/// Representation the regularizers see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegSpace {
    /// Row-softmaxed logits; bounded in `[0, 1]`.
    Probabilities,
    Logits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Free-form dataset reference, recorded in reports.
    pub dataset: String,
    pub model: ModelKind,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    pub propagation_steps: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Base seed: fixes the validation/test split, and trial `i` uses `seed + i`.
    pub seed: u64,
    pub epsilon: f64,
    pub per_class_train: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub reg_target: RegTarget,
    pub reg_space: RegSpace,
    pub cmd: CmdConfig,
    pub mmd: MmdConfig,
    pub ppr: PprConfig,
    pub trials: usize,
    /// Worker threads for trials; results do not depend on it.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dataset: String::new(),
            model: ModelKind::Appnp,
            lambda: 0.0,
            beta: 0.0,
            alpha: 0.1,
            propagation_steps: 10,
            hidden: 64,
            dropout: 0.5,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            max_epochs: 1000,
            patience: 100,
            seed: 0,
            epsilon: 0.0,
            per_class_train: 20,
            val_size: 500,
            test_size: 1000,
            reg_target: RegTarget::AllUnlabeled,
            reg_space: RegSpace::Probabilities,
            cmd: CmdConfig::default(),
            mmd: MmdConfig::default(),
            ppr: PprConfig::default(),
            trials: 10,
            jobs: 1,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`], in snapshot order.
pub const CONFIG_KEYS: &[&str] = &[
    "dataset",
    "model",
    "lambda",
    "beta",
    "alpha",
    "propagation_steps",
    "hidden",
    "dropout",
    "learning_rate",
    "weight_decay",
    "max_epochs",
    "patience",
    "seed",
    "epsilon",
    "per_class_train",
    "val_size",
    "test_size",
    "reg_target",
    "reg_space",
    "cmd_moments",
    "cmd_support_lo",
    "cmd_support_hi",
    "mmd_kernel",
    "mmd_bandwidth",
    "ppr_alpha",
    "ppr_mode",
    "ppr_max_iters",
    "ppr_tolerance",
    "trials",
    "jobs",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::input(format!("invalid value `{value}` for `{key}`")))
}

impl TrainConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = v.to_string(),
            "model" => self.model = v.parse()?,
            "lambda" => self.lambda = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "propagation_steps" => self.propagation_steps = parse(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "dropout" => self.dropout = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "weight_decay" => self.weight_decay = parse(key, v)?,
            "max_epochs" => self.max_epochs = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "per_class_train" => self.per_class_train = parse(key, v)?,
            "val_size" => self.val_size = parse(key, v)?,
            "test_size" => self.test_size = parse(key, v)?,
            "reg_target" => {
                self.reg_target = match v {
                    "all" | "all_unlabeled" => RegTarget::AllUnlabeled,
                    "test" | "test_only" => RegTarget::TestOnly,
                    _ => return Err(Error::input(format!("invalid value `{v}` for `{key}`"))),
                }
            }
            "reg_space" => {
                self.reg_space = match v {
                    "probabilities" => RegSpace::Probabilities,
                    "logits" => RegSpace::Logits,
                    _ => return Err(Error::input(format!("invalid value `{v}` for `{key}`"))),
                }
            }
            "cmd_moments" => self.cmd.num_moments = parse(key, v)?,
            "cmd_support_lo" => self.cmd.support_lo = parse(key, v)?,
            "cmd_support_hi" => self.cmd.support_hi = parse(key, v)?,
            "mmd_kernel" => {
                self.mmd.kernel = match v {
                    "rbf" => Kernel::Rbf,
                    "linear" => Kernel::Linear,
                    _ => return Err(Error::input(format!("invalid value `{v}` for `{key}`"))),
                }
            }
            "mmd_bandwidth" => {
                self.mmd.bandwidth = match v {
                    "median" => Bandwidth::Median,
                    _ => Bandwidth::Fixed(parse(key, v)?),
                }
            }
            "ppr_alpha" => self.ppr.alpha = parse(key, v)?,
            "ppr_mode" => {
                self.ppr.mode = match v {
                    "power" | "power_iteration" => PprMode::PowerIteration,
                    "exact" | "exact_solve" => PprMode::ExactSolve,
                    _ => return Err(Error::input(format!("invalid value `{v}` for `{key}`"))),
                }
            }
            "ppr_max_iters" => self.ppr.max_iters = parse(key, v)?,
            "ppr_tolerance" => self.ppr.tolerance = parse(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "jobs" => self.jobs = parse(key, v)?,
            _ => return Err(Error::input(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Textual value of one key, in the form [`TrainConfig::set`] accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "dataset" => self.dataset.clone(),
            "model" => match self.model {
                ModelKind::Appnp => "appnp".into(),
                ModelKind::Gcn => "gcn".into(),
            },
            "lambda" => self.lambda.to_string(),
            "beta" => self.beta.to_string(),
            "alpha" => self.alpha.to_string(),
            "propagation_steps" => self.propagation_steps.to_string(),
            "hidden" => self.hidden.to_string(),
            "dropout" => self.dropout.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "seed" => self.seed.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "per_class_train" => self.per_class_train.to_string(),
            "val_size" => self.val_size.to_string(),
            "test_size" => self.test_size.to_string(),
            "reg_target" => match self.reg_target {
                RegTarget::AllUnlabeled => "all_unlabeled".into(),
                RegTarget::TestOnly => "test_only".into(),
            },
            "reg_space" => match self.reg_space {
                RegSpace::Probabilities => "probabilities".into(),
                RegSpace::Logits => "logits".into(),
            },
            "cmd_moments" => self.cmd.num_moments.to_string(),
            "cmd_support_lo" => self.cmd.support_lo.to_string(),
            "cmd_support_hi" => self.cmd.support_hi.to_string(),
            "mmd_kernel" => match self.mmd.kernel {
                Kernel::Rbf => "rbf".into(),
                Kernel::Linear => "linear".into(),
            },
            "mmd_bandwidth" => match self.mmd.bandwidth {
                Bandwidth::Median => "median".into(),
                Bandwidth::Fixed(s) => s.to_string(),
            },
            "ppr_alpha" => self.ppr.alpha.to_string(),
            "ppr_mode" => match self.ppr.mode {
                PprMode::PowerIteration => "power_iteration".into(),
                PprMode::ExactSolve => "exact_solve".into(),
            },
            "ppr_max_iters" => self.ppr.max_iters.to_string(),
            "ppr_tolerance" => self.ppr.tolerance.to_string(),
            "trials" => self.trials.to_string(),
            "jobs" => self.jobs.to_string(),
            _ => return None,
        })
    }

    /// Every key as `key=value`, one per line. Feeding the text back through
    /// [`TrainConfig::from_key_values`] reproduces the configuration.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).expect("listed key"));
        }
        out
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored; unknown keys are errors.
    pub fn apply_key_values(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::input(format!("config line {}: expected key=value", n + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::input(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_key_values(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::input(format!(
                    "{name} must be a finite value ≥ 0, got {v}"
                )))
            }
        };
        nonneg("lambda", self.lambda)?;
        nonneg("beta", self.beta)?;
        nonneg("weight_decay", self.weight_decay)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::input(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::input(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::input(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning_rate must be positive"));
        }
        if self.hidden == 0 || self.per_class_train == 0 || self.max_epochs == 0 {
            return Err(Error::input(
                "hidden, per_class_train and max_epochs must be at least 1",
            ));
        }
        if self.val_size == 0 || self.test_size == 0 {
            return Err(Error::input("val_size and test_size must be at least 1"));
        }
        if self.patience > self.max_epochs {
            return Err(Error::input(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if self.trials == 0 || self.jobs == 0 {
            return Err(Error::input("trials and jobs must be at least 1"));
        }
        if self.seed.checked_add(self.trials as u64).is_none() {
            return Err(Error::input("seed + trials overflows"));
        }
        self.cmd.validate()?;
        self.mmd.validate()?;
        self.ppr.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_round_trip() {
        let mut cfg = TrainConfig {
            dataset: "cora".into(),
            lambda: 0.5,
            beta: 1.0,
            epsilon: 0.75,
            reg_target: RegTarget::TestOnly,
            model: ModelKind::Gcn,
            ..TrainConfig::default()
        };
        cfg.mmd.bandwidth = Bandwidth::Fixed(0.3);
        cfg.ppr.tolerance = 1e-12;
        let text = cfg.to_key_values();
        assert_eq!(TrainConfig::from_key_values(&text).unwrap(), cfg);
        assert_eq!(text.lines().count(), CONFIG_KEYS.len());
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        assert!(TrainConfig::from_key_values("lamda=0.5").is_err());
        assert!(TrainConfig::from_key_values("lambda").is_err());
        assert!(TrainConfig::from_key_values("lambda=abc").is_err());
        let cfg = TrainConfig::from_key_values("# comment\n\nlambda = 0.5\n").unwrap();
        assert_eq!(cfg.lambda, 0.5);
    }

    #[test]
    fn validation() {
        TrainConfig::default().validate().unwrap();
        let bad = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.lambda = -1.0));
        assert!(bad(|c| c.beta = f64::NAN));
        assert!(bad(|c| c.alpha = 0.0));
        assert!(bad(|c| c.epsilon = 1.5));
        assert!(bad(|c| c.patience = 2000));
        assert!(bad(|c| c.trials = 0));
    }
}
