//! Diffusion schedule, the history-conditioned noise estimator and the
//! reverse refinement loop.

mod refiner;
mod schedule;

pub use refiner::{ContextEncoder, NoiseDraw, NoiseEstimator, Refiner, RefinerConfig};
pub use schedule::{denoise_step, forward_diffuse, make_schedule, DiffusionSchedule, ScheduleRecord};
