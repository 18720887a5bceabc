//! Dataset generation, augmentation, the experiment driver and file formats.

pub mod augment;
pub mod config;
pub mod experiment;
pub mod io;
pub mod synthetic;

pub use augment::{augment_erasing, augment_manifool, augment_random, AugmentMode, Augmented, CraftOutcome, Provenance};
pub use config::ExperimentConfig;
pub use experiment::{run_and_write, run_experiment, ExperimentReport, ModeReport};
pub use synthetic::{generate_synthetic_dataset, generate_synthetic_test_set, SyntheticSpec};
