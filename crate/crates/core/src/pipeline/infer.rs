use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::checkpoint::ModelCheckpoint;
use crate::diffusion::{DiffusionSchedule, Refiner};
use crate::error::{Error, Result};
use crate::model::{InteractionModel, SceneInput};
use crate::nn::ParamSet;
use crate::predictor::{sample_coarse, ManeuverProbs, MultimodalDistribution, SamplingStrategy};
use crate::scalar::Scalar;
use crate::traj::Trajectory;

/// Output of the full pipeline for one scene (relative meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    /// Refined futures, `K × T_f × 2`.
    pub trajectories: Vec<Trajectory<T>>,
    /// Coarse samples before refinement.
    pub coarse: Vec<Trajectory<T>>,
    pub probs: ManeuverProbs<T>,
    /// Mode the samples were drawn from.
    pub mode: usize,
    /// Mean of the most probable mode.
    pub mean: Trajectory<T>,
    pub distribution: MultimodalDistribution<T>,
}

/// A loaded model ready for inference.
#[derive(Debug, Clone)]
pub struct Pipeline<T: Scalar> {
    pub interaction: InteractionModel,
    pub interaction_params: ParamSet<T>,
    pub refiner: Option<(Refiner, ParamSet<T>, DiffusionSchedule)>,
    pub sampling: SamplingStrategy,
}

impl<T: Scalar> Pipeline<T> {
    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        let (interaction, interaction_params) = ckpt.interaction_model()?;
        let refiner = if ckpt.refiner.is_some() {
            Some(ckpt.refiner_model()?)
        } else {
            None
        };
        Ok(Self {
            interaction,
            interaction_params,
            refiner,
            sampling: ckpt.config.sampling,
        })
    }

    /// Distribution, K coarse samples from the most probable mode, then τ
    /// refinement steps. `τ = 0` returns the coarse samples.
    pub fn predict(&self, scene: &SceneInput<T>, k: usize, tau: usize, seed: u64) -> Result<Prediction<T>> {
        let distribution = self.interaction.distribution(&self.interaction_params, scene)?;
        let coarse = sample_coarse(&distribution, k, seed, self.sampling)?;
        let trajectories = if tau == 0 {
            coarse.trajectories.clone()
        } else {
            let (refiner, params, schedule) = self
                .refiner
                .as_ref()
                .ok_or_else(|| Error::Config("refinement requested but the checkpoint has no refiner".into()))?;
            let chi: Array2<T> = refiner.context_values(params, scene);
            refiner.refine(params, &coarse.trajectories, &scene.prior, &chi, schedule, tau, seed)?
        };
        Ok(Prediction {
            trajectories,
            mean: distribution.modes[coarse.mode].mu.clone(),
            coarse: coarse.trajectories,
            probs: distribution.probs,
            mode: coarse.mode,
            distribution,
        })
    }
}

/// Algorithm-level entry point: loads both blocks from `ckpt` and predicts.
pub fn infer<T: Scalar>(
    scene: &SceneInput<T>,
    ckpt: &ModelCheckpoint,
    k: usize,
    tau: usize,
    seed: u64,
) -> Result<Prediction<T>> {
    let pipeline = Pipeline::from_checkpoint(ckpt)?;
    if let Some((_, _, s)) = &pipeline.refiner {
        if tau > s.steps() {
            return Err(Error::Config(format!("tau {tau} exceeds the {} diffusion steps", s.steps())));
        }
    }
    pipeline.predict(scene, k, tau, seed)
}
