//! Experiment harness around the `tenkrylov` library: tensor file formats,
//! seeded generators and single-run drivers that emit CSV and JSON reports.

pub mod experiment;
pub mod formats;
pub mod generate;

pub use experiment::{csv, run_experiment, summary_json, Algorithm, Experiment, ExperimentConfig};
pub use formats::{load_tensor, save_tensor, Format, Tensor};
pub use generate::{generate, GeneratorSpec};
