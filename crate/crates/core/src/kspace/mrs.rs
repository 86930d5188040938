use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aft::{dft_oracle_1d_with, Direction, Normalization};
use crate::ctensor::ComplexTensor;
use crate::error::{config_err, Result};
use crate::scalar::Real;

pub const FID_POINTS: usize = 2048;
pub const FULL_TRANSIENTS: usize = 160;
/// 2 kHz spectral width over 2048 points.
pub const DEFAULT_DWELL_S: f64 = 1.0 / 2000.0;
pub const DEFAULT_GLB_HZ: f64 = 3.0;

/// One damped complex exponential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq_hz: f64,
    pub amp: f64,
    /// Exponential damping rate in 1/s (Lorentzian FWHM = decay / pi).
    pub decay: f64,
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EditState {
    On,
    Off,
}

/// Raw transients `[n_transients, points]` of one acquisition.
#[derive(Clone, Debug, PartialEq)]
pub struct FidRecord {
    pub transients: ComplexTensor<f64>,
    pub edit_state: EditState,
    pub dwell_s: f64,
}

impl FidRecord {
    pub fn n_transients(&self) -> usize {
        self.transients.shape()[0]
    }

    pub fn points(&self) -> usize {
        self.transients.shape()[1]
    }

    /// Mean over all transients.
    pub fn mean(&self) -> ComplexTensor<f64> {
        mean_rows(&self.transients, &(0..self.n_transients()).collect::<Vec<_>>())
    }
}

fn mean_rows(t: &ComplexTensor<f64>, rows: &[usize]) -> ComplexTensor<f64> {
    let n = t.shape()[1];
    let inv = 1.0 / rows.len() as f64;
    let mut out = ComplexTensor::zeros(&[n]);
    let (or, oi) = out.planes_mut();
    for &r in rows {
        for j in 0..n {
            or[j] += t.re()[r * n + j];
            oi[j] += t.im()[r * n + j];
        }
    }
    or.iter_mut().chain(oi.iter_mut()).for_each(|v| *v *= inv);
    out
}

/// Sum of damped complex exponentials sampled at `n * dwell_s`.
pub fn noiseless_fid(peaks: &[Peak], points: usize, dwell_s: f64) -> ComplexTensor<f64> {
    ComplexTensor::from_fn(&[points], |n| {
        let t = n as f64 * dwell_s;
        peaks.iter().fold((0.0, 0.0), |(re, im), p| {
            let env = p.amp * (-p.decay * t).exp();
            let ph = 2.0 * PI * p.freq_hz * t + p.phase;
            (re + env * ph.cos(), im + env * ph.sin())
        })
    })
}

/// `n_transients` copies of the noiseless FID plus independent white complex
/// noise (standard deviation `noise_sigma` per component), 2048 points at the
/// default dwell time.
pub fn synth_fid(peaks: &[Peak], noise_sigma: f64, n_transients: usize, seed: u64) -> FidRecord {
    synth_fid_with(peaks, noise_sigma, n_transients, FID_POINTS, DEFAULT_DWELL_S, EditState::Off, seed)
}

pub fn synth_fid_with(
    peaks: &[Peak],
    noise_sigma: f64,
    n_transients: usize,
    points: usize,
    dwell_s: f64,
    edit_state: EditState,
    seed: u64,
) -> FidRecord {
    let clean = noiseless_fid(peaks, points, dwell_s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    let mut transients = ComplexTensor::zeros(&[n_transients, points]);
    let (re, im) = transients.planes_mut();
    for i in 0..n_transients * points {
        let (a, b) = clean.get(i % points);
        if noise_sigma > 0.0 {
            re[i] = a + normal.sample(&mut rng);
            im[i] = b + normal.sample(&mut rng);
        } else {
            re[i] = a;
            im[i] = b;
        }
    }
    FidRecord {
        transients,
        edit_state,
        dwell_s,
    }
}

/// Mean of `n / r` transients drawn without replacement, where `n` is the
/// number of transients in the record. `r = 1` is the full mean.
pub fn average_transients(f: &FidRecord, r: usize, seed: u64) -> Result<ComplexTensor<f64>> {
    let n = f.n_transients();
    if r == 0 || n % r != 0 {
        return config_err(format!("reduction rate {} does not divide {} transients", r, n));
    }
    let k = n / r;
    if k == n {
        return Ok(f.mean());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = sample(&mut rng, n, k).into_vec();
    rows.sort_unstable();
    Ok(mean_rows(&f.transients, &rows))
}

/// Gaussian apodisation `exp(-(pi w n dt)^2 / (4 ln 2))`.
pub fn gaussian_line_broadening<T: Real>(fid: &ComplexTensor<T>, width_hz: f64, dwell_s: f64) -> ComplexTensor<T> {
    let n = fid.last_dim();
    let c = 4.0 * std::f64::consts::LN_2;
    let env: Vec<T> = (0..n)
        .map(|i| T::of((-(PI * width_hz * i as f64 * dwell_s).powi(2) / c).exp()))
        .collect();
    let mut out = fid.clone();
    let (re, im) = out.planes_mut();
    for i in 0..re.len() {
        re[i] *= env[i % n];
        im[i] *= env[i % n];
    }
    out
}

/// Spectrum with 0 Hz at index `N / 2` (FID time origin at index 0).
pub fn spectrum<T: Real>(fid: &ComplexTensor<T>) -> ComplexTensor<T> {
    let ax = fid.ndim() - 1;
    super::fftshift(&dft_oracle_1d_with(fid, Direction::Forward, Normalization::None), ax)
}

/// Frequency in Hz of spectrum bin `k`.
pub fn bin_frequency(k: usize, points: usize, dwell_s: f64) -> f64 {
    (k as f64 - (points / 2) as f64) / (points as f64 * dwell_s)
}

/// Inverse of [`spectrum`].
pub fn fid_from_spectrum<T: Real>(spec: &ComplexTensor<T>) -> ComplexTensor<T> {
    let ax = spec.ndim() - 1;
    dft_oracle_1d_with(&super::ifftshift(spec, ax), Direction::Inverse, Normalization::OneOverN)
}

/// Randomised edited MEGA-style scenario: shared metabolite peaks plus one
/// edited peak present only in the ON acquisition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EditedScenario {
    pub shared: Vec<Peak>,
    pub edited: Vec<Peak>,
    pub noise_sigma: f64,
    pub n_transients: usize,
    pub dwell_s: f64,
    pub points: usize,
}

/// Transmitter-relative resonance positions in Hz at 3 T (water at 0 Hz).
const SHARED_HZ: [(f64, f64); 4] = [(-346.0, 1.0), (-218.0, 0.55), (-192.0, 0.45), (-122.0, 0.3)];
const EDITED_HZ: [(f64, f64); 2] = [(-225.0, 0.18), (-211.0, 0.18)];

impl EditedScenario {
    /// Per-subject variation in amplitudes, linewidths, small frequency shifts
    /// and a common zero-order phase.
    pub fn random(noise_sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phase = rng.gen_range(-0.3..0.3);
        let shift = rng.gen_range(-3.0..3.0);
        let decay = rng.gen_range(18.0..30.0);
        let mut mk = |(f, a): (f64, f64)| Peak {
            freq_hz: f + shift,
            amp: a * rng.gen_range(0.8..1.2),
            decay,
            phase,
        };
        let shared = SHARED_HZ.iter().copied().map(&mut mk).collect();
        let edited = EDITED_HZ.iter().copied().map(&mut mk).collect();
        Self {
            shared,
            edited,
            noise_sigma,
            n_transients: FULL_TRANSIENTS,
            dwell_s: DEFAULT_DWELL_S,
            points: FID_POINTS,
        }
    }

    pub fn peaks(&self, state: EditState) -> Vec<Peak> {
        let mut p = self.shared.clone();
        if state == EditState::On {
            p.extend_from_slice(&self.edited);
        }
        p
    }

    /// ON and OFF records with independent noise.
    pub fn synth_pair(&self, seed: u64) -> (FidRecord, FidRecord) {
        let mk = |state, s| {
            synth_fid_with(&self.peaks(state), self.noise_sigma, self.n_transients, self.points, self.dwell_s, state, s)
        };
        (mk(EditState::On, seed), mk(EditState::Off, seed ^ 0x9e37_79b9_7f4a_7c15))
    }

    /// Noiseless OFF spectrum peak modulus, the per-subject normalisation scale.
    pub fn scale(&self) -> f64 {
        spectrum(&noiseless_fid(&self.peaks(EditState::Off), self.points, self.dwell_s)).max_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz() -> Vec<Peak> {
        vec![Peak { freq_hz: 100.0, amp: 1.0, decay: 20.0, phase: 0.0 }]
    }

    #[test]
    fn noise_free_transients_identical() {
        let f = synth_fid(&lorentz(), 0.0, 4, 1);
        assert_eq!(f.points(), 2048);
        assert_eq!(&f.transients.re()[..2048], &f.transients.re()[2048..4096]);
    }

    #[test]
    fn single_peak_lands_on_its_bin() {
        let s = spectrum(&noiseless_fid(&lorentz(), 2048, DEFAULT_DWELL_S));
        let mag = s.abs();
        let k = (0..2048).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        assert!((bin_frequency(k, 2048, DEFAULT_DWELL_S) - 100.0).abs() < 1.0);
        let back = fid_from_spectrum(&s);
        assert!(back.max_abs_diff(&noiseless_fid(&lorentz(), 2048, DEFAULT_DWELL_S)) < 1e-9);
    }

    #[test]
    fn averaging_rates() {
        let f = synth_fid(&lorentz(), 1.0, 160, 2);
        assert!(average_transients(&f, 1, 0).unwrap().max_abs_diff(&f.mean()) == 0.0);
        let one = average_transients(&f, 160, 5).unwrap();
        let n = 2048;
        assert!((0..160).any(|r| (0..n).all(|j| f.transients.get(r * n + j) == one.get(j))));
        assert!(average_transients(&f, 3, 0).is_err());
    }

    #[test]
    fn averaging_two_halves_variance() {
        let f = synth_fid(&[], 1.0, 160, 3);
        let mut acc = 0.0;
        let reps = 40;
        for s in 0..reps {
            let m = average_transients(&f, 80, s).unwrap();
            acc += m.re().iter().map(|v| v * v).sum::<f64>() / 2048.0;
        }
        let var = acc / reps as f64;
        assert!((var - 0.5).abs() < 0.05, "{}", var);
    }

    #[test]
    fn glb_envelope() {
        let flat = ComplexTensor::<f64>::from_fn(&[64], |_| (1.0, 0.0));
        assert!(gaussian_line_broadening(&flat, 1e-12, DEFAULT_DWELL_S).max_abs_diff(&flat) < 1e-12);
        let g = gaussian_line_broadening(&flat, 5.0, DEFAULT_DWELL_S);
        assert!(g.re().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn diff_isolates_edit() {
        let sc = EditedScenario::random(0.0, 7);
        let (on, off) = sc.synth_pair(1);
        let diff = on.mean().sub(&off.mean()).unwrap();
        let edited = noiseless_fid(&sc.edited, 2048, DEFAULT_DWELL_S);
        assert!(diff.max_abs_diff(&edited) < 1e-12);
    }
}
