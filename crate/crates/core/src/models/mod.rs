//! Complex residual attention UNet, the four transform/UNet variants and the
//! training losses.

mod cunet;
mod layers;
mod loss;
mod variant;

pub use cunet::*;
pub use layers::*;
pub use loss::*;
pub use variant::*;
