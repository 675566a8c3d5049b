use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Entropy-augmented policy gradient.
    Soft,
    /// Plain policy gradient; the temperature term is dropped.
    Vanilla,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Entropy temperature α.
    pub alpha: f64,
    /// Trajectories sampled per starting state.
    pub k: usize,
    /// Starting states per update.
    pub batch_episodes: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub iterations: usize,
    pub seed: u64,
    pub eval_every: usize,
    /// Size of the fixed held-out set used for greedy evaluation.
    pub eval_episodes: usize,
    pub preset: Preset,
}

impl TrainConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self {
                mode: Mode::Soft,
                alpha: 0.01,
                k: 5,
                batch_episodes: 16,
                lr: 3e-3,
                adam_beta1: 0.9,
                adam_beta2: 0.999,
                adam_eps: 1e-8,
                iterations: 2000,
                seed: 0,
                eval_every: 50,
                eval_episodes: 20,
                preset,
            },
            Preset::Paper => Self {
                lr: 1e-5,
                iterations: 20_000,
                eval_every: 500,
                eval_episodes: 80,
                preset,
                ..Self::preset(Preset::Desk)
            },
        }
    }

    /// Temperature actually applied: zero in vanilla mode.
    pub fn effective_alpha(&self) -> f64 {
        match self.mode {
            Mode::Soft => self.alpha,
            Mode::Vanilla => 0.0,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be non-negative".into()));
        }
        if self.k < 2 {
            return Err(Error::BaselineUndefined(self.k));
        }
        if self.batch_episodes == 0 || self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::Config(
                "batch_episodes, eval_every and eval_episodes must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("lr must be positive".into()));
        }
        for (n, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{n} must lie in [0, 1)")));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps < 0.0 {
            return Err(Error::Config("adam_eps must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let d = TrainConfig::preset(Preset::Desk);
        assert_eq!((d.alpha, d.k, d.batch_episodes, d.lr), (0.01, 5, 16, 3e-3));
        let p = TrainConfig::preset(Preset::Paper);
        assert_eq!((p.lr, p.iterations), (1e-5, 20_000));
        assert_eq!(p.k * p.batch_episodes, 80);
        d.validate().unwrap();
        p.validate().unwrap();
    }

    #[test]
    fn vanilla_drops_temperature() {
        let mut c = TrainConfig::default();
        assert_eq!(c.effective_alpha(), 0.01);
        c.mode = Mode::Vanilla;
        assert_eq!(c.effective_alpha(), 0.0);
    }

    #[test]
    fn validation() {
        let c = TrainConfig {
            k: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::BaselineUndefined(1))));
        let c = TrainConfig {
            alpha: -0.1,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
