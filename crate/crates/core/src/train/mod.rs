//! Batch-1 training loops and evaluation for the reconstruction tasks.

mod aft_fit;
mod mri;
mod mrs;
mod trainer;

pub use aft_fit::{dft_pairs, fit_aft, AftFit, AftFitConfig};
pub use mri::{
    evaluate_mri, image_report, mean_metric, median_metric, phantom_examples, reconstruct, zero_fill_reports,
    MriExample, ZERO_FILL,
};
pub use mrs::{evaluate_mrs, MrsExample, GLB, RAW_DFT};
pub use trainer::{draw_seed, eval_seed, load_model, save_model, CurveRow, Example, TrainConfig, Trainer};
