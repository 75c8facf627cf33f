//! Two-stage training, checkpoints and end-to-end inference.

mod checkpoint;
mod config;
mod infer;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, EpochRecord, InteractionBlock, ModelCheckpoint, RefinerBlock, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{Stage, TrainConfig};
pub use infer::{infer, Pipeline, Prediction};
pub use train::{
    interaction_scene_loss, min_over_k_loss, scene_inputs, train_interaction, train_interaction_standalone,
    train_refiner, RefinementStage, TrainOutcome,
};
