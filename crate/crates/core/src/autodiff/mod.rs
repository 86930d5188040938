//! Reverse-mode differentiation, parameters, Adam and the cosine schedule.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;

pub use checkpoint::{load_checkpoint, read_manifest, save_checkpoint, CheckpointManifest, ParamEntry, MANIFEST};
pub use gradcheck::{check_input_grad, check_param_grads, GradCheck};
pub use optim::{adam_step, cosine_lr, AdamConfig, OptimState};
pub use params::{ComplexParam, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};

pub(crate) use tape::{rss_channels, select_columns};
