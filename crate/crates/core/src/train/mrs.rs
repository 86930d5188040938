use std::sync::Arc;

use crate::autodiff::{Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::Result;
use crate::kspace::{average_transients, gaussian_line_broadening, spectrum, EditState, FidRecord, MrsSubject};
use crate::metrics::{phased_real, spectral_report, zero_order_phase, MetricsReport};
use crate::models::{denoise_forward, denoise_on_tape, Model};
use crate::scalar::Real;

use super::{eval_seed, Example};

pub const RAW_DFT: &str = "DFT";
pub const GLB: &str = "DFT+GLB";

/// One subject and edit state; each visit averages a fresh random subset
/// of transients.
#[derive(Clone, Debug)]
pub struct MrsExample<T> {
    pub id: String,
    pub record: FidRecord,
    pub reduction: usize,
    /// Spectrum of the full mean, `[1, 1, 1, N]`.
    pub target: Arc<ComplexTensor<T>>,
}

impl<T: Real> MrsExample<T> {
    pub fn new(id: impl Into<String>, record: FidRecord, truth: &ComplexTensor<f64>, reduction: usize) -> Result<Self> {
        let n = truth.numel();
        Ok(Self {
            id: id.into(),
            target: Arc::new(spectrum(truth).cast::<T>().reshape(&[1, 1, 1, n])?),
            record,
            reduction,
        })
    }

    /// ON and OFF examples of every subject.
    pub fn from_subjects(subjects: &[MrsSubject], reduction: usize) -> Result<Vec<Self>> {
        let mut out = Vec::with_capacity(2 * subjects.len());
        for s in subjects {
            for st in [EditState::On, EditState::Off] {
                out.push(Self::new(format!("{}-{:?}", s.id, st), s.record(st).clone(), s.truth(st), reduction)?);
            }
        }
        Ok(out)
    }

    pub fn noisy(&self, draw: u64) -> Result<ComplexTensor<f64>> {
        average_transients(&self.record, self.reduction, draw)
    }
}

impl<T: Real> Example<T> for MrsExample<T> {
    fn loss(&self, model: &Model<T>, tape: &mut Tape<T>, draw: u64) -> Result<Var> {
        let fid = self.noisy(draw)?;
        let n = fid.numel();
        let x = tape.constant(fid.cast::<T>().reshape(&[1, 1, 1, n])?);
        let out = model.forward(tape, x, None)?;
        denoise_on_tape(tape, out.image, Arc::clone(&self.target))
    }
}

/// ON and OFF spectra of one method for one subject.
struct Pair {
    on: ComplexTensor<f64>,
    off: ComplexTensor<f64>,
}

impl Pair {
    /// Phased real ON, OFF and DIFF spectra, all rotated by the phase of
    /// the summed ON and OFF spectra.
    fn parts(&self) -> [(&'static str, Vec<f64>); 3] {
        let sum = self.on.add(&self.off).expect("same shape");
        let phi = zero_order_phase(&sum);
        let on = phased_real(&self.on, phi);
        let off = phased_real(&self.off, phi);
        let diff = on.iter().zip(&off).map(|(a, b)| a - b).collect();
        [("ON", on), ("OFF", off), ("DIFF", diff)]
    }
}

/// GFC, PCC, SCC and NRMSE of the raw DFT, the GLB baseline and `model` on
/// each subject, for ON, OFF and DIFF spectra. Inputs use the fixed
/// evaluation draw of subject index `i`.
pub fn evaluate_mrs<T: Real>(
    model: Option<&Model<T>>,
    subjects: &[MrsSubject],
    reduction: usize,
    glb_hz: f64,
) -> Result<Vec<MetricsReport>> {
    let mut out = Vec::new();
    for (i, s) in subjects.iter().enumerate() {
        let truth = Pair {
            on: spectrum(&s.on_mean),
            off: spectrum(&s.off_mean),
        };
        let on = average_transients(&s.on, reduction, eval_seed(2 * i))?;
        let off = average_transients(&s.off, reduction, eval_seed(2 * i + 1))?;
        let dwell = s.on.dwell_s;
        let mut methods = vec![
            (RAW_DFT.to_string(), Pair { on: spectrum(&on), off: spectrum(&off) }),
            (
                GLB.to_string(),
                Pair {
                    on: spectrum(&gaussian_line_broadening(&on, glb_hz, dwell)),
                    off: spectrum(&gaussian_line_broadening(&off, glb_hz, dwell)),
                },
            ),
        ];
        if let Some(m) = model {
            let run = |f: &ComplexTensor<f64>| denoise_forward(m, &f.cast::<T>()).map(|s| s.cast::<f64>());
            methods.push((m.spec.variant.label().to_string(), Pair { on: run(&on)?, off: run(&off)? }));
        }
        let tparts = truth.parts();
        for (name, pair) in &methods {
            for ((part, t), (_, p)) in tparts.iter().zip(pair.parts().iter()) {
                let mut r = spectral_report(&s.id, name, part, t, p)?;
                r.acceleration = Some(reduction as u32);
                out.push(r);
            }
        }
    }
    Ok(out)
}
