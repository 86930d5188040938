//! The learnable Fourier transform block and the exact DFT it is checked
//! against.
//!
//! A DFT of length `N` is a complex linear map, so a stack of complex linear
//! layers with linear activations can represent it exactly. [`AftBlock`] is
//! three `N x N` complex linear layers joined by complex LeakyReLU(0.1); in
//! [`AftMode::Frozen`] the activations are bypassed and the block is a pure
//! linear composition.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::ctensor::{Activation, ComplexLinearWeights, ComplexTensor};
use crate::error::{dim_err, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    OneOverN,
    OneOverSqrtN,
}

impl Normalization {
    /// Forward unnormalised, inverse scaled by `1/N`.
    pub fn default_for(direction: Direction) -> Self {
        match direction {
            Direction::Forward => Normalization::None,
            Direction::Inverse => Normalization::OneOverN,
        }
    }

    pub fn factor(self, n: usize) -> f64 {
        match self {
            Normalization::None => 1.0,
            Normalization::OneOverN => 1.0 / n as f64,
            Normalization::OneOverSqrtN => 1.0 / (n as f64).sqrt(),
        }
    }
}

/// `(cos, sin)` of `2 pi m / n`, exact at multiples of a quarter turn.
fn twiddle(m: usize, n: usize) -> (f64, f64) {
    let m = m % n;
    if (4 * m) % n == 0 {
        return match 4 * m / n {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let a = 2.0 * PI * m as f64 / n as f64;
    (a.cos(), a.sin())
}

/// Direct O(N^2) evaluation of `Z_k = sum_n z_n (cos(2 pi k n / N) - i sin(2 pi k n / N))`
/// (sine sign flipped for the inverse), with the default normalisation.
pub fn dft_oracle_1d<T: Real>(z: &ComplexTensor<T>, direction: Direction) -> ComplexTensor<T> {
    dft_oracle_1d_with(z, direction, Normalization::default_for(direction))
}

/// As [`dft_oracle_1d`], applied along the trailing axis of any tensor.
pub fn dft_oracle_1d_with<T: Real>(
    z: &ComplexTensor<T>,
    direction: Direction,
    normalization: Normalization,
) -> ComplexTensor<T> {
    let n = z.last_dim();
    if n == 0 {
        return z.clone();
    }
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let scale = normalization.factor(n);
    let table: Vec<(f64, f64)> = (0..n).map(|m| twiddle(m, n)).collect();
    let rows = z.numel() / n;
    let mut out = ComplexTensor::zeros(z.shape());
    for r in 0..rows {
        for k in 0..n {
            let (mut sr, mut si) = (0.0f64, 0.0f64);
            for j in 0..n {
                let (c, s) = table[(k * j) % n];
                let s = sign * s;
                let (a, b) = z.get(r * n + j);
                let (a, b) = (a.f64(), b.f64());
                sr += a * c - b * s;
                si += a * s + b * c;
            }
            out.set(r * n + k, (T::of(sr * scale), T::of(si * scale)));
        }
    }
    out
}

/// 2-D DFT over the two trailing axes: rows first, then columns.
pub fn dft2_oracle<T: Real>(z: &ComplexTensor<T>, direction: Direction, normalization: Normalization) -> ComplexTensor<T> {
    let rows = dft_oracle_1d_with(z, direction, normalization);
    dft_oracle_1d_with(&rows.transpose_last2(), direction, normalization).transpose_last2()
}

/// Dense DFT matrix, `W_real[k][n] = sigma cos(2 pi k n / N)`,
/// `W_imag[k][n] = -/+ sigma sin(2 pi k n / N)`.
#[derive(Clone, Debug)]
pub struct DftMatrix<T> {
    pub n: usize,
    pub direction: Direction,
    pub normalization: Normalization,
    weights: Arc<ComplexTensor<T>>,
}

impl<T: Real> DftMatrix<T> {
    pub fn w_real(&self) -> &[T] {
        self.weights.re()
    }

    pub fn w_imag(&self) -> &[T] {
        self.weights.im()
    }

    /// The matrix as a complex weight tensor `W_real + i W_imag`.
    pub fn weights(&self) -> &Arc<ComplexTensor<T>> {
        &self.weights
    }

    pub fn linear_weights(&self) -> ComplexLinearWeights<T> {
        ComplexLinearWeights {
            weight: (*self.weights).clone(),
            bias: None,
        }
    }

    /// Applies the transform along the trailing axis.
    pub fn apply(&self, z: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        crate::ctensor::complex_linear(z, &self.linear_weights())
    }

    /// Records the transform on a tape as a constant linear map along the trailing axis.
    pub fn apply_on_tape(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let w = tape.constant_arc(Arc::clone(&self.weights));
        tape.linear(x, w, None)
    }
}

pub fn build_dft_matrix<T: Real>(n: usize, direction: Direction, normalization: Normalization) -> DftMatrix<T> {
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let sigma = normalization.factor(n.max(1));
    let weights = ComplexTensor::from_fn(&[n, n], |i| {
        let (k, j) = (i / n, i % n);
        let (c, s) = twiddle(k * j, n);
        (T::of(sigma * c), T::of(sigma * sign * s))
    });
    DftMatrix {
        n,
        direction,
        normalization,
        weights: Arc::new(weights),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AftMode {
    Trainable,
    Frozen,
}

impl std::str::FromStr for AftMode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trainable" => Ok(AftMode::Trainable),
            "frozen" => Ok(AftMode::Frozen),
            _ => crate::error::config_err(format!("unknown AFT mode {:?} (trainable, frozen)", s)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AftInit {
    /// Layer 1 set to the DFT matrix, layers 2 and 3 to the identity.
    ExactDft(Direction),
    /// Uniform weights in `+-1/sqrt(N)`.
    Random,
}

/// Layer-1 bias `offset (1 + i)` and layer-3 bias `-offset (1 + i)` used by a
/// trainable exact-DFT block: outputs whose components stay above `-offset`
/// pass both LeakyReLUs unchanged, so the block starts as the exact DFT.
pub const DEFAULT_ACTIVATION_OFFSET: f64 = 4.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AftConfig {
    pub n: usize,
    pub init: AftInit,
    pub mode: AftMode,
    pub direction: Direction,
    pub normalization: Normalization,
    pub activation_offset: f64,
}

impl AftConfig {
    pub fn exact(n: usize, direction: Direction, mode: AftMode) -> Self {
        Self {
            n,
            init: AftInit::ExactDft(direction),
            mode,
            direction,
            normalization: Normalization::default_for(direction),
            activation_offset: DEFAULT_ACTIVATION_OFFSET,
        }
    }

    pub fn random(n: usize, direction: Direction) -> Self {
        Self {
            n,
            init: AftInit::Random,
            mode: AftMode::Trainable,
            direction,
            normalization: Normalization::default_for(direction),
            activation_offset: DEFAULT_ACTIVATION_OFFSET,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }
}

/// Three complex `N x N` linear layers (weights and biases in a [`ParamStore`]).
#[derive(Clone, Debug)]
pub struct AftBlock {
    pub config: AftConfig,
    pub weights: [ParamId; 3],
    pub biases: [ParamId; 3],
}

impl AftBlock {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        config: AftConfig,
        rng: &mut R,
    ) -> Self {
        let n = config.n;
        let (ws, bs): (Vec<ComplexTensor<T>>, Vec<ComplexTensor<T>>) = match config.init {
            AftInit::ExactDft(direction) => {
                let dft = build_dft_matrix::<T>(n, direction, config.normalization);
                let id = ComplexLinearWeights::<T>::identity(n).weight;
                let off = if config.mode == AftMode::Trainable {
                    T::of(config.activation_offset)
                } else {
                    T::zero()
                };
                let shift = |s: T| ComplexTensor::new(vec![s; n], vec![s; n], &[n]).unwrap();
                (
                    vec![(**dft.weights()).clone(), id.clone(), id],
                    vec![shift(off), ComplexTensor::zeros(&[n]), shift(-off)],
                )
            }
            AftInit::Random => {
                let bound = 1.0 / (n.max(1) as f64).sqrt();
                let ws: Vec<ComplexTensor<T>> = (0..3).map(|_| ComplexTensor::rand_uniform(&[n, n], bound, rng)).collect();
                let off = if config.mode == AftMode::Trainable { config.activation_offset } else { 0.0 };
                // Hidden pre-activations sit at off(1+i) for a zero input and the
                // block maps zero to zero.
                let row_sums = |w: &ComplexTensor<T>| -> Vec<(f64, f64)> {
                    (0..n)
                        .map(|r| {
                            let re: f64 = w.re()[r * n..(r + 1) * n].iter().map(|v| v.f64()).sum();
                            let im: f64 = w.im()[r * n..(r + 1) * n].iter().map(|v| v.f64()).sum();
                            (off * (re - im), off * (re + im))
                        })
                        .collect()
                };
                let from = |v: Vec<(f64, f64)>| {
                    ComplexTensor::new(v.iter().map(|p| T::of(p.0)).collect(), v.iter().map(|p| T::of(p.1)).collect(), &[n]).unwrap()
                };
                let b1 = vec![(off, off); n];
                let b2 = row_sums(&ws[1]).into_iter().map(|(a, b)| (off - a, off - b)).collect();
                let b3 = row_sums(&ws[2]).into_iter().map(|(a, b)| (-a, -b)).collect();
                (ws, vec![from(b1), from(b2), from(b3)])
            }
        };
        let mut weights = [ParamId(0); 3];
        let mut biases = [ParamId(0); 3];
        for (l, (w, b)) in ws.into_iter().zip(bs).enumerate() {
            weights[l] = store.add(format!("{}.layer{}.weight", name, l + 1), w);
            biases[l] = store.add(format!("{}.layer{}.bias", name, l + 1), b);
        }
        let block = AftBlock {
            config,
            weights,
            biases,
        };
        block.set_mode(store, block.config.mode);
        block
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    /// Frozen blocks record their weights as constants.
    pub fn set_mode<T: Real>(&self, store: &mut ParamStore<T>, mode: AftMode) {
        for id in self.weights.iter().chain(&self.biases) {
            store.set_trainable(*id, mode == AftMode::Trainable);
        }
    }

    pub fn mode<T: Real>(&self, store: &ParamStore<T>) -> AftMode {
        if store.is_trainable(self.weights[0]) {
            AftMode::Trainable
        } else {
            AftMode::Frozen
        }
    }

    pub fn layer_weights<T: Real>(&self, store: &ParamStore<T>) -> [ComplexLinearWeights<T>; 3] {
        let lw = |l: usize| ComplexLinearWeights {
            weight: store.value(self.weights[l]).clone(),
            bias: Some(store.value(self.biases[l]).clone()),
        };
        [lw(0), lw(1), lw(2)]
    }

    /// Applies the block along the trailing axis of `x`.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        if tape.value(x).last_dim() != self.n() {
            return dim_err(format!(
                "AFT block of size {} applied to trailing dim {}",
                self.n(),
                tape.value(x).last_dim()
            ));
        }
        let act = match self.mode(store) {
            AftMode::Trainable => Activation::leaky(),
            AftMode::Frozen => Activation::Identity,
        };
        let mut h = x;
        for l in 0..3 {
            let w = tape.param(store, self.weights[l]);
            let b = tape.param(store, self.biases[l]);
            h = tape.linear(h, w, Some(b))?;
            if l < 2 {
                h = tape.activation(h, act);
            }
        }
        Ok(h)
    }

    /// Applies the block along the second-to-last axis.
    pub fn forward_cols<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let t = tape.transpose_last2(x)?;
        let y = self.forward(tape, store, t)?;
        tape.transpose_last2(y)
    }
}

/// Spatial axis of a `[..., H, W]` tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis2 {
    H,
    W,
}

pub fn aft_forward_1d<T: Real>(block: &AftBlock, store: &ParamStore<T>, z: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    let mut tape = Tape::new();
    let x = tape.constant(z.clone());
    let y = block.forward(&mut tape, store, x)?;
    Ok(tape.value(y).clone())
}

/// `AFT_H(AFT_W(z)^T)^T` over the two trailing axes.
pub fn aft_forward_2d<T: Real>(
    block_w: &AftBlock,
    block_h: &AftBlock,
    store: &ParamStore<T>,
    z: &ComplexTensor<T>,
) -> Result<ComplexTensor<T>> {
    check_2d(z, block_h.n(), block_w.n())?;
    let mut tape = Tape::new();
    let x = tape.constant(z.clone());
    let y = block_w.forward(&mut tape, store, x)?;
    let y = block_h.forward_cols(&mut tape, store, y)?;
    Ok(tape.value(y).clone())
}

fn check_2d<T: Real>(z: &ComplexTensor<T>, h: usize, w: usize) -> Result<()> {
    let s = z.shape();
    if s.len() < 2 || s[s.len() - 2] != h || s[s.len() - 1] != w {
        return dim_err(format!("expected trailing dims [{}, {}], got {:?}", h, w, s));
    }
    Ok(())
}

/// Learnable transform along `axis`, exact DFT (same direction and
/// normalisation as the block) along the other spatial axis.
pub fn hybrid_on_tape<T: Real>(
    tape: &mut Tape<T>,
    block: &AftBlock,
    store: &ParamStore<T>,
    exact: &DftMatrix<T>,
    x: Var,
    axis: Axis2,
) -> Result<Var> {
    match axis {
        Axis2::W => {
            let t = tape.transpose_last2(x)?;
            let t = exact.apply_on_tape(tape, t)?;
            let t = tape.transpose_last2(t)?;
            block.forward(tape, store, t)
        }
        Axis2::H => {
            let t = exact.apply_on_tape(tape, x)?;
            block.forward_cols(tape, store, t)
        }
    }
}

pub fn aft_forward_phase_encode_only<T: Real>(
    block: &AftBlock,
    store: &ParamStore<T>,
    z: &ComplexTensor<T>,
    axis: Axis2,
) -> Result<ComplexTensor<T>> {
    let s = z.shape();
    if s.len() < 2 {
        return dim_err("phase-encode transform needs two trailing spatial axes");
    }
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    let (learn_n, exact_n) = match axis {
        Axis2::W => (w, h),
        Axis2::H => (h, w),
    };
    if block.n() != learn_n {
        return dim_err(format!("AFT block of size {} for axis of length {}", block.n(), learn_n));
    }
    let exact = build_dft_matrix::<T>(exact_n, block.config.direction, block.config.normalization);
    let mut tape = Tape::new();
    let x = tape.constant(z.clone());
    let y = hybrid_on_tape(&mut tape, block, store, &exact, x, axis)?;
    Ok(tape.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    #[test]
    fn impulse_and_constant() {
        let mut imp = ComplexTensor::<f64>::zeros(&[8]);
        imp.set(0, (1.0, 0.0));
        let s = dft_oracle_1d(&imp, Direction::Forward);
        assert!((0..8).all(|k| s.get(k) == (1.0, 0.0)));
        let ones = ComplexTensor::<f64>::from_fn(&[8], |_| (1.0, 0.0));
        let s = dft_oracle_1d(&ones, Direction::Forward);
        assert!((s.re()[0] - 8.0).abs() < 1e-12);
        assert!((1..8).all(|k| s.get(k).0.abs() < 1e-12 && s.get(k).1.abs() < 1e-12));
    }

    #[test]
    fn forward_inverse_round_trip() {
        let z = ComplexTensor::<f64>::randn(&[8], &mut rng(1));
        let back = dft_oracle_1d(&dft_oracle_1d(&z, Direction::Forward), Direction::Inverse);
        assert!(back.max_abs_diff(&z) < 1e-6);
    }

    #[test]
    fn small_matrices_are_exact() {
        let m = build_dft_matrix::<f64>(1, Direction::Forward, Normalization::None);
        assert_eq!((m.w_real(), m.w_imag()), (&[1.0][..], &[0.0][..]));
        let m = build_dft_matrix::<f64>(4, Direction::Forward, Normalization::None);
        assert_eq!(&m.w_real()[4..8], &[1.0, 0.0, -1.0, 0.0]);
        assert_eq!(&m.w_imag()[4..8], &[0.0, -1.0, 0.0, 1.0]);
    }

    #[test]
    fn matrix_matches_oracle() {
        let z = ComplexTensor::<f64>::randn(&[16], &mut rng(2));
        for dir in [Direction::Forward, Direction::Inverse] {
            let m = build_dft_matrix::<f64>(16, dir, Normalization::default_for(dir));
            assert!(m.apply(&z).unwrap().max_abs_diff(&dft_oracle_1d(&z, dir)) < 1e-6);
        }
    }

    #[test]
    fn exact_blocks_match_oracle() {
        let mut r = rng(3);
        for mode in [AftMode::Frozen, AftMode::Trainable] {
            let mut store = ParamStore::<f32>::new();
            let blk = AftBlock::new(&mut store, "aft", AftConfig::exact(12, Direction::Inverse, mode), &mut r);
            let z = ComplexTensor::<f32>::randn(&[3, 12], &mut r);
            let want = dft_oracle_1d(&z, Direction::Inverse);
            let got = aft_forward_1d(&blk, &store, &z).unwrap();
            assert!(got.max_abs_diff(&want) <= 1e-4 * want.max_abs(), "{:?}", mode);
        }
    }

    #[test]
    fn size_one_block_is_identity() {
        let mut store = ParamStore::<f64>::new();
        let blk = AftBlock::new(&mut store, "a", AftConfig::exact(1, Direction::Forward, AftMode::Frozen), &mut rng(4));
        let z = ComplexTensor::<f64>::randn(&[5, 1], &mut rng(5));
        assert_eq!(aft_forward_1d(&blk, &store, &z).unwrap(), z);
    }

    #[test]
    fn random_init_is_seeded() {
        let mut s1 = ParamStore::<f32>::new();
        let mut s2 = ParamStore::<f32>::new();
        let b1 = AftBlock::new(&mut s1, "a", AftConfig::random(8, Direction::Forward), &mut rng(6));
        let b2 = AftBlock::new(&mut s2, "a", AftConfig::random(8, Direction::Forward), &mut rng(6));
        for l in 0..3 {
            assert_eq!(s1.value(b1.weights[l]), s2.value(b2.weights[l]));
            let bound = 1.0 / 8f32.sqrt();
            assert!(s1.value(b1.weights[l]).re().iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn trailing_dim_mismatch() {
        let mut store = ParamStore::<f32>::new();
        let blk = AftBlock::new(&mut store, "a", AftConfig::exact(4, Direction::Forward, AftMode::Frozen), &mut rng(7));
        let z = ComplexTensor::<f32>::zeros(&[2, 5]);
        assert!(aft_forward_1d(&blk, &store, &z).is_err());
    }

    #[test]
    fn two_d_matches_oracle_and_commutes() {
        let mut r = rng(8);
        let mut store = ParamStore::<f64>::new();
        let bw = AftBlock::new(&mut store, "w", AftConfig::exact(6, Direction::Forward, AftMode::Frozen), &mut r);
        let bh = AftBlock::new(&mut store, "h", AftConfig::exact(5, Direction::Forward, AftMode::Frozen), &mut r);
        let z = ComplexTensor::<f64>::randn(&[2, 5, 6], &mut r);
        let got = aft_forward_2d(&bw, &bh, &store, &z).unwrap();
        let want = dft2_oracle(&z, Direction::Forward, Normalization::None);
        assert!(got.max_abs_diff(&want) < 1e-10);
        let cols_first = aft_forward_1d(&bh, &store, &z.transpose_last2()).unwrap().transpose_last2();
        let cols_first = aft_forward_1d(&bw, &store, &cols_first).unwrap();
        assert!(cols_first.max_abs_diff(&got) < 1e-10);
        let mut imp = ComplexTensor::<f64>::zeros(&[5, 6]);
        imp.set(0, (1.0, 0.0));
        let plane = aft_forward_2d(&bw, &bh, &store, &imp).unwrap();
        assert!((0..30).all(|i| (plane.re()[i] - 1.0).abs() < 1e-12 && plane.im()[i].abs() < 1e-12));
    }

    #[test]
    fn hybrid_with_exact_block_equals_full_oracle() {
        let mut r = rng(9);
        let mut store = ParamStore::<f64>::new();
        let blk = AftBlock::new(&mut store, "pe", AftConfig::exact(8, Direction::Inverse, AftMode::Frozen), &mut r);
        let z = ComplexTensor::<f64>::randn(&[1, 6, 8], &mut r);
        let got = aft_forward_phase_encode_only(&blk, &store, &z, Axis2::W).unwrap();
        let want = dft2_oracle(&z, Direction::Inverse, Normalization::OneOverN);
        assert!(got.max_abs_diff(&want) < 1e-12);
    }
}
