use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use crate::diffusion::{DiffusionSchedule, Refiner, RefinerConfig};
use crate::error::{Error, Result};
use crate::model::{InteractionConfig, InteractionModel};
use crate::nn::{ParamSet, TensorRecord};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &str = "c2ftp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionBlock {
    pub config: InteractionConfig,
    pub params: Vec<TensorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinerBlock {
    pub config: RefinerConfig,
    pub schedule: DiffusionSchedule,
    pub params: Vec<TensorRecord>,
}

/// Losses of one epoch. Epoch 0 is the evaluation before any update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub version: u32,
    /// Scalar type the parameters were trained in.
    pub scalar: String,
    pub interaction: Option<InteractionBlock>,
    pub refiner: Option<RefinerBlock>,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters this checkpoint holds.
    pub epoch: usize,
}

impl ModelCheckpoint {
    pub fn new<T: Scalar>(config: TrainConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            scalar: T::NAME.to_string(),
            interaction: None,
            refiner: None,
            config,
            history: Vec::new(),
            epoch: 0,
        }
    }

    pub fn set_interaction<T: Scalar>(&mut self, model: &InteractionModel, params: &ParamSet<T>) {
        self.interaction = Some(InteractionBlock {
            config: model.cfg,
            params: params.to_records(),
        });
    }

    pub fn set_refiner<T: Scalar>(&mut self, refiner: &Refiner, params: &ParamSet<T>, schedule: &DiffusionSchedule) {
        self.refiner = Some(RefinerBlock {
            config: refiner.cfg,
            schedule: schedule.clone(),
            params: params.to_records(),
        });
    }

    fn expect_scalar<T: Scalar>(&self) -> Result<()> {
        if self.scalar != T::NAME {
            return Err(Error::Config(format!(
                "checkpoint holds {} parameters, {} requested",
                self.scalar,
                T::NAME
            )));
        }
        Ok(())
    }

    pub fn interaction_model<T: Scalar>(&self) -> Result<(InteractionModel, ParamSet<T>)> {
        self.expect_scalar::<T>()?;
        let block = self
            .interaction
            .as_ref()
            .ok_or_else(|| Error::Config("checkpoint has no interaction parameters".into()))?;
        let (model, mut ps) = InteractionModel::init::<T>(block.config, 0)?;
        ps.load_records(&block.params)?;
        Ok((model, ps))
    }

    pub fn refiner_model<T: Scalar>(&self) -> Result<(Refiner, ParamSet<T>, DiffusionSchedule)> {
        self.expect_scalar::<T>()?;
        let block = self
            .refiner
            .as_ref()
            .ok_or_else(|| Error::Config("checkpoint has no refiner parameters".into()))?;
        let (refiner, mut ps) = Refiner::init::<T>(block.config, 0)?;
        ps.load_records(&block.params)?;
        Ok((refiner, ps, block.schedule.clone()))
    }

    /// Short content id: the first 12 hex digits of the body checksum.
    pub fn id(&self) -> String {
        let body = serde_json::to_vec(self).expect("checkpoint serializes");
        hex::encode(Sha256::digest(&body))[..12].to_string()
    }

    /// Header line `magic version sha256` followed by the JSON body.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.interaction.is_none() && self.refiner.is_none() {
            return Err(Error::Checkpoint("checkpoint holds no parameter block".into()));
        }
        let body = serde_json::to_vec(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = format!("{CHECKPOINT_MAGIC} {} {}\n", self.version, hex::encode(Sha256::digest(&body))).into_bytes();
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Integrity("missing checkpoint header".into()))?;
        let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| Error::Integrity("unreadable header".into()))?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 3 || parts[0] != CHECKPOINT_MAGIC {
            return Err(Error::Integrity("not a checkpoint file".into()));
        }
        let version: u32 = parts[1]
            .parse()
            .map_err(|_| Error::Integrity(format!("bad version field `{}`", parts[1])))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let body = &bytes[newline + 1..];
        if hex::encode(Sha256::digest(body)) != parts[2] {
            return Err(Error::Integrity("checksum mismatch (truncated or corrupt file)".into()));
        }
        let ckpt: Self = serde_json::from_slice(body).map_err(|e| Error::Integrity(e.to_string()))?;
        if ckpt.version != version {
            return Err(Error::Integrity("header and body versions differ".into()));
        }
        if ckpt.interaction.is_none() && ckpt.refiner.is_none() {
            return Err(Error::Checkpoint("checkpoint holds no parameter block".into()));
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint(ckpt: &ModelCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelCheckpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelCheckpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::Stage;

    fn small() -> ModelCheckpoint {
        let mut cfg = TrainConfig::defaults(Stage::Refiner);
        cfg.refiner_hidden = 8;
        let (r, ps) = Refiner::init::<f64>(cfg.refiner(), 3).unwrap();
        let mut c = ModelCheckpoint::new::<f64>(cfg.clone());
        c.set_refiner(&r, &ps, &cfg.schedule().unwrap());
        c
    }

    #[test]
    fn bytes_are_stable() {
        let c = small();
        let a = c.to_bytes().unwrap();
        let back = ModelCheckpoint::from_bytes(&a).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), a);
    }

    #[test]
    fn truncation_and_version() {
        let a = small().to_bytes().unwrap();
        assert!(matches!(ModelCheckpoint::from_bytes(&a[..a.len() - 10]), Err(Error::Integrity(_))));
        let text = String::from_utf8(a).unwrap().replacen(" 1 ", " 7 ", 1);
        assert!(matches!(
            ModelCheckpoint::from_bytes(text.as_bytes()),
            Err(Error::Version { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn empty_checkpoint_is_rejected() {
        let c = ModelCheckpoint::new::<f64>(TrainConfig::defaults(Stage::Refiner));
        assert!(c.to_bytes().is_err());
        assert!(c.interaction_model::<f64>().is_err());
    }
}
