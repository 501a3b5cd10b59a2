//! Noise synthesis, patch extraction, optimization and image metrics.

mod adam;
pub mod metrics;
mod noise;
mod patches;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use metrics::{mse, psnr, psnr_from_mse, ssim};
pub use noise::{sample_noise, NoiseDistribution, NoiseSpec};
pub use patches::{bilinear_resize, flip_horizontal, make_patches, rot90, Augment, PatchSet, DOWNSAMPLE_FACTORS};
pub use train::{train, Dataset, Schedule, TrainConfig, TrainLog, TrainOutcome, TrainRow};
