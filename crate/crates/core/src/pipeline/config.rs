use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffusion::{make_schedule, DiffusionSchedule, RefinerConfig};
use crate::error::{Error, Result};
use crate::model::InteractionConfig;
use crate::predictor::SamplingStrategy;

/// Which part of the model a training run fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Noise estimator and its context encoder.
    Refiner,
    /// Interaction stage through a frozen refiner, min-over-K loss.
    Interaction,
    /// Interaction stage alone with the likelihood loss.
    #[serde(alias = "interaction_standalone")]
    InteractionStandalone,
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "refiner" => Ok(Self::Refiner),
            "interaction" => Ok(Self::Interaction),
            "interaction-standalone" | "interaction_standalone" => Ok(Self::InteractionStandalone),
            _ => Err(Error::Config(format!("unknown stage `{s}`"))),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Refiner => "refiner",
            Self::Interaction => "interaction",
            Self::InteractionStandalone => "interaction-standalone",
        })
    }
}

/// Every knob of a training run. Serialized as a flat key/value document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub stage: Stage,
    pub epochs: usize,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_period: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Samples drawn per scene (best-of-K loss and evaluation).
    pub k: usize,
    /// Reverse diffusion steps at inference and in the interaction stage.
    pub tau: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    pub sampling: SamplingStrategy,
    /// Use at most this many training scenes; 0 keeps all.
    pub max_train_scenes: usize,

    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Squared instead of plain Euclidean norm in the noise loss.
    pub squared_noise_loss: bool,

    pub history: usize,
    pub future: usize,
    pub hidden: usize,
    pub embed: usize,
    pub heads: usize,
    pub context: usize,
    pub decoder_hidden: usize,
    pub position_scale: f64,
    pub use_pooling: bool,
    pub use_reweighting: bool,

    pub refiner_width: usize,
    pub refiner_heads: usize,
    pub refiner_feedforward: usize,
    pub refiner_context: usize,
    pub refiner_hidden: usize,
    pub step_embedding: usize,
    pub refiner_state_scale: f64,
}

impl TrainConfig {
    pub fn defaults(stage: Stage) -> Self {
        let (epochs, decay_factor, decay_period) = match stage {
            Stage::Refiner => (100, 0.5, 32),
            Stage::Interaction => (20, 0.5, 6),
            Stage::InteractionStandalone => (100, 0.6, 16),
        };
        let ic = InteractionConfig::default();
        let rc = RefinerConfig::default();
        Self {
            stage,
            epochs,
            learning_rate: 0.001,
            decay_factor,
            decay_period,
            batch_size: 128,
            seed: 0,
            k: 20,
            tau: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            grad_clip: 10.0,
            sampling: SamplingStrategy::MaxMode,
            max_train_scenes: 0,
            diffusion_steps: 100,
            beta_start: 1e-4,
            beta_end: 5e-2,
            squared_noise_loss: false,
            history: ic.history,
            future: ic.future,
            hidden: ic.hidden,
            embed: ic.embed,
            heads: ic.heads,
            context: ic.context,
            decoder_hidden: ic.decoder_hidden,
            position_scale: ic.position_scale,
            use_pooling: ic.use_pooling,
            use_reweighting: ic.use_reweighting,
            refiner_width: rc.width,
            refiner_heads: rc.heads,
            refiner_feedforward: rc.feedforward,
            refiner_context: rc.context,
            refiner_hidden: rc.hidden,
            step_embedding: rc.step_embedding,
            refiner_state_scale: rc.state_scale,
        }
    }

    /// Parses a flat TOML document over the defaults of its stage. The
    /// stage comes from `stage` or, failing that, the document's own `stage`
    /// key (they must agree when both are given). Unknown keys are rejected.
    pub fn parse(text: &str, stage: Option<Stage>) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let declared = match table.get("stage") {
            Some(v) => Some(
                v.as_str()
                    .ok_or_else(|| Error::Config("stage must be a string".into()))?
                    .parse::<Stage>()?,
            ),
            None => None,
        };
        let stage = match (stage, declared) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config declares stage {b} but {a} was requested")))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(Error::Config("no training stage given".into())),
        };
        let mut merged = toml::Table::try_from(Self::defaults(stage)).map_err(|e| Error::Config(e.to_string()))?;
        for (key, value) in table {
            if !merged.contains_key(&key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            merged.insert(key, value);
        }
        merged.insert("stage".into(), toml::Value::String(stage.to_string()));
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config("decay_factor must lie in (0, 1]".into()));
        }
        if self.decay_period == 0 {
            return Err(Error::Config("decay_period must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_epsilon > 0.0) {
            return Err(Error::Config("adam moments must lie in [0, 1) and epsilon be positive".into()));
        }
        self.interaction().validate()?;
        self.refiner().validate()?;
        self.schedule()?;
        Ok(())
    }

    /// `lr₀ · decay^⌊epoch / period⌋` for a zero-based epoch.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay_factor.powi((epoch / self.decay_period) as i32)
    }

    pub fn interaction(&self) -> InteractionConfig {
        InteractionConfig {
            history: self.history,
            future: self.future,
            hidden: self.hidden,
            embed: self.embed,
            heads: self.heads,
            context: self.context,
            decoder_hidden: self.decoder_hidden,
            position_scale: self.position_scale,
            use_pooling: self.use_pooling,
            use_reweighting: self.use_reweighting,
        }
    }

    pub fn refiner(&self) -> RefinerConfig {
        RefinerConfig {
            history: self.history,
            future: self.future,
            width: self.refiner_width,
            heads: self.refiner_heads,
            feedforward: self.refiner_feedforward,
            context: self.refiner_context,
            hidden: self.refiner_hidden,
            step_embedding: self.step_embedding,
            position_scale: self.position_scale,
            state_scale: self.refiner_state_scale,
        }
    }

    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        make_schedule(self.diffusion_steps, self.beta_start, self.beta_end, self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_defaults() {
        let s = TrainConfig::defaults(Stage::InteractionStandalone);
        assert_eq!((s.epochs, s.decay_factor, s.decay_period), (100, 0.6, 16));
        let i = TrainConfig::defaults(Stage::Interaction);
        assert_eq!((i.epochs, i.decay_factor, i.decay_period), (20, 0.5, 6));
        assert_eq!(i.learning_rate, 0.001);
        assert_eq!(i.batch_size, 128);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = TrainConfig::defaults(Stage::Refiner);
        let back = TrainConfig::parse(&c.to_toml(), None).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overlay_and_rejections() {
        let c = TrainConfig::parse("epochs = 3\nlearning_rate = 0.01\n", Some(Stage::Interaction)).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.decay_period, 6);
        assert!(matches!(TrainConfig::parse("epoch = 3", Some(Stage::Refiner)), Err(Error::Config(_))));
        assert!(TrainConfig::parse("stage = \"refiner\"", Some(Stage::Interaction)).is_err());
        assert!(TrainConfig::parse("", None).is_err());
        assert!(TrainConfig::parse("heads = 5", Some(Stage::Refiner)).is_err());
        assert!(TrainConfig::parse("tau = 101", Some(Stage::Refiner)).is_err());
        assert!(TrainConfig::parse("decay_factor = 0.0", Some(Stage::Refiner)).is_err());
    }

    #[test]
    fn step_decay() {
        let c = TrainConfig::defaults(Stage::Interaction);
        assert_eq!(c.learning_rate_at(0), 0.001);
        assert_eq!(c.learning_rate_at(5), 0.001);
        assert_eq!(c.learning_rate_at(6), 0.001 * 0.5);
        assert_eq!(c.learning_rate_at(13), 0.001 * 0.25);
    }
}
