//! Complex-valued neural network kernels and the learnable Fourier transform
//! (AFT) block, assembled into AFTNet reconstruction models for undersampled
//! MR k-space and noisy MR spectroscopy FIDs.
//!
//! The crate is organised bottom-up:
//!
//! - [`ctensor`]: split-plane complex tensors and the complex operators
//!   (linear, convolution, transposed convolution, activations, group
//!   normalisation with 2x2 whitening, modulus max-pooling), plus the CXT1
//!   binary format.
//! - [`autodiff`]: a reverse-mode tape over those operators, parameter
//!   storage, Adam and the cosine learning-rate schedule.
//! - [`aft`]: the exact DFT oracle, DFT matrices and the three-layer AFT block.
//! - [`kspace`]: sampling masks, zero-filling, RSS coil combination, data
//!   consistency, synthetic phantoms and FIDs, Gaussian line broadening.
//! - [`models`]: the complex residual attention UNet, the four AFTNet
//!   variants and the training losses.
//! - [`metrics`]: SSIM, PSNR, NRMSE, GFC, PCC, SCC and paired t-tests.
//! - [`train`]: training loops and dataset handling shared by the CLI and the
//!   acceptance suite.
//! - [`verify`]: self-contained oracle checks runnable from the CLI.

pub mod aft;
pub mod autodiff;
pub mod ctensor;
pub mod error;
pub mod kspace;
pub mod metrics;
pub mod models;
pub mod scalar;
pub mod train;
pub mod verify;

pub use ctensor::ComplexTensor;
pub use error::{Error, Result};
pub use scalar::Real;
