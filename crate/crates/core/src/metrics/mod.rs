//! Image and spectral quality metrics, per-sample reports, aggregation and
//! paired significance tests.

mod image;
mod report;
mod spectra;

pub use image::*;
pub use report::*;
pub use spectra::*;
