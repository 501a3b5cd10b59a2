//! Files: PGM images, synthetic datasets, experiment configs and CSV tables.

pub mod config;
pub mod csv;
pub mod pgm;
pub mod synth;

pub use config::{AnalysisConfig, ExperimentConfig, CONFIG_SCHEMA};
pub use pgm::{load_pgm, save_pgm, PgmImage};
pub use synth::{synth_dataset, synth_image, synth_images, DatasetManifest, ManifestEntry, Split};
