use std::sync::Arc;

use crate::autodiff::{Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::Result;
use crate::kspace::{
    apply_mask, equispaced_mask, phantom, rss, sample_seed, zero_fill_recon, CoilKSpace, MaskSpec, MriSample,
    SamplingMask,
};
use crate::metrics::{nrmse, psnr, ssim, MetricsReport, RealImage};
use crate::models::{acc_on_tape, AccTarget, Acquisition, Model};
use crate::scalar::Real;

use super::Example;

/// One undersampled multi-coil acquisition with its ground truth.
#[derive(Clone, Debug)]
pub struct MriExample<T> {
    pub id: String,
    pub mask: SamplingMask,
    /// Masked k-space `[1, C, H, W]`, also the data-consistency reference.
    pub acq: Acquisition<T>,
    pub target: AccTarget<T>,
    pub truth_rss: RealImage,
}

impl<T: Real> MriExample<T> {
    /// `kspace` and `target` are fully sampled `[C, H, W]` k-space and coil images.
    pub fn new(id: impl Into<String>, kspace: &ComplexTensor<f64>, target: &ComplexTensor<f64>, mask: SamplingMask) -> Result<Self> {
        let k = CoilKSpace::new(kspace.clone())?;
        let masked = apply_mask(&k, &mask)?.data;
        let s = masked.shape().to_vec();
        let b = [1, s[0], s[1], s[2]];
        let truth_rss = rss(target)?;
        Ok(Self {
            id: id.into(),
            acq: Model::acquisition(masked.cast::<T>().reshape(&b)?, &mask),
            target: AccTarget::new(target.cast::<T>().reshape(&b)?)?,
            truth_rss,
            mask,
        })
    }

    pub fn from_sample(s: &MriSample, fallback: MaskSpec) -> Result<Self> {
        let spec = s.mask.unwrap_or(fallback);
        let mask = spec.build(s.kspace.shape()[2])?;
        Self::new(s.id.clone(), &s.kspace, &s.target, mask)
    }

    pub fn acceleration(&self) -> u32 {
        self.mask.acceleration
    }

    fn input(&self, tape: &mut Tape<T>) -> Var {
        tape.constant_arc(Arc::clone(&self.acq.kspace))
    }
}

impl<T: Real> Example<T> for MriExample<T> {
    fn loss(&self, model: &Model<T>, tape: &mut Tape<T>, _draw: u64) -> Result<Var> {
        let x = self.input(tape);
        let out = model.forward(tape, x, Some(&self.acq))?;
        acc_on_tape(tape, out.image, &self.target)
    }
}

/// Phantom examples with per-sample seeds and masks.
pub fn phantom_examples<T: Real>(
    n: usize,
    size: (usize, usize),
    coils: usize,
    acceleration: u32,
    seed: u64,
) -> Result<Vec<MriExample<T>>> {
    (0..n)
        .map(|i| {
            let s = sample_seed(seed, i);
            let p = phantom(size.0, size.1, coils, s)?;
            let mask = equispaced_mask(size.1, acceleration, sample_seed(s, 1))?;
            MriExample::new(format!("p{:04}", i), &p.kspace.data, &p.coil_images, mask)
        })
        .collect()
}

/// Coil images `[C, H, W]` and final k-space of `model` on `ex`.
pub fn reconstruct<T: Real>(model: &Model<T>, ex: &MriExample<T>) -> Result<(ComplexTensor<T>, ComplexTensor<T>)> {
    let mut tape = Tape::new();
    let x = ex.input(&mut tape);
    let out = model.forward(&mut tape, x, Some(&ex.acq))?;
    let s = ex.acq.kspace.shape()[1..].to_vec();
    let img = tape.value(out.image).clone().reshape(&s)?;
    let k = match out.kspace {
        Some(k) => tape.value(k).clone().reshape(&s)?,
        None => ComplexTensor::zeros(&s),
    };
    Ok((img, k))
}

/// SSIM, PSNR (peak 1) and NRMSE of a magnitude image against the truth.
pub fn image_report(id: &str, variant: &str, pred: &RealImage, truth: &RealImage) -> Result<MetricsReport> {
    Ok(MetricsReport {
        part: Some("magnitude".into()),
        ssim: Some(ssim(pred, truth)?),
        psnr_db: Some(psnr(&pred.data, &truth.data, 1.0)?),
        nrmse: Some(nrmse(&pred.data, &truth.data)?),
        ..MetricsReport::new(id, variant)
    })
}

pub fn evaluate_mri<T: Real>(model: &Model<T>, set: &[MriExample<T>]) -> Result<Vec<MetricsReport>> {
    set.iter()
        .map(|ex| {
            let (img, _) = reconstruct(model, ex)?;
            let mut r = image_report(&ex.id, model.spec.variant.label(), &rss(&img)?, &ex.truth_rss)?;
            r.acceleration = Some(ex.acceleration());
            Ok(r)
        })
        .collect()
}

pub const ZERO_FILL: &str = "zero-fill";

/// Metrics of the zero-filled baseline.
pub fn zero_fill_reports<T: Real>(set: &[MriExample<T>]) -> Result<Vec<MetricsReport>> {
    set.iter()
        .map(|ex| {
            let s = ex.acq.kspace.shape()[1..].to_vec();
            let k = CoilKSpace::new(ex.acq.kspace.as_ref().clone().reshape(&s)?)?;
            let img = zero_fill_recon(&k)?;
            let mut r = image_report(&ex.id, ZERO_FILL, &rss(&img)?, &ex.truth_rss)?;
            r.acceleration = Some(ex.acceleration());
            Ok(r)
        })
        .collect()
}

/// Median of a metric over reports.
pub fn median_metric(reports: &[MetricsReport], name: &str) -> Option<f64> {
    let mut v: Vec<f64> = reports.iter().filter_map(|r| r.metric(name)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn mean_metric(reports: &[MetricsReport], name: &str) -> Option<f64> {
    let v: Vec<f64> = reports.iter().filter_map(|r| r.metric(name)).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
