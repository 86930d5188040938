//! Acquisition simulation: undersampling masks, centred transforms, coil
//! combination, data consistency, phantom and FID synthesis, datasets.
//!
//! k-space is stored with DC at index `(H / 2, W / 2)`; the phase-encoding
//! axis is the trailing one (`W`).

mod dataset;
mod mask;
mod mrs;
mod phantom;
mod transform;

pub use dataset::*;
pub use mask::*;
pub use mrs::*;
pub use phantom::*;
pub use transform::*;
