use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aft::{
    build_dft_matrix, hybrid_on_tape, AftBlock, AftConfig, AftMode, Axis2, DftMatrix, Direction,
    Normalization, DEFAULT_ACTIVATION_OFFSET,
};
use crate::autodiff::{ParamStore, Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{config_err, Error, Result};
use crate::kspace::{apply_mask, CoilKSpace, SamplingMask};
use crate::scalar::Real;

use super::{Cunet, CunetConfig, Spatial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "AFT")]
    Aft,
    #[serde(rename = "AFTNet-I")]
    I,
    #[serde(rename = "AFTNet-K")]
    K,
    #[serde(rename = "AFTNet-KI")]
    Ki,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Aft, Variant::I, Variant::K, Variant::Ki];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Aft => "AFT",
            Variant::I => "AFTNet-I",
            Variant::K => "AFTNet-K",
            Variant::Ki => "AFTNet-KI",
        }
    }

    pub fn has_kspace_net(self) -> bool {
        matches!(self, Variant::K | Variant::Ki)
    }

    pub fn has_image_net(self) -> bool {
        matches!(self, Variant::I | Variant::Ki)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("aftnet-").unwrap_or(&t);
        match t {
            "aft" => Ok(Variant::Aft),
            "i" => Ok(Variant::I),
            "k" => Ok(Variant::K),
            "ki" => Ok(Variant::Ki),
            _ => config_err(format!("unknown variant {:?} (AFT, AFTNet-I, AFTNet-K, AFTNet-KI)", s)),
        }
    }
}

/// What the model reconstructs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// Multi-coil Cartesian k-space `[coils, H, W]`, coils as channels.
    Mri { coils: usize, height: usize, width: usize },
    /// Single FID of `points` samples, denoised in the spectral domain.
    Mrs { points: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AftStart {
    Exact,
    Random,
}

impl std::str::FromStr for AftStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(AftStart::Exact),
            "random" => Ok(AftStart::Random),
            _ => config_err(format!("unknown AFT start {:?} (exact, random)", s)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub domain: Domain,
    pub widths: Vec<usize>,
    pub groups: usize,
    pub aft_start: AftStart,
    pub aft_mode: AftMode,
    pub activation_offset: f64,
    /// Learning-rate multiplier for the AFT block parameters.
    #[serde(default = "unit")]
    pub aft_lr_scale: f64,
    pub data_consistency: bool,
    pub seed: u64,
}

/// AFT learning-rate multiplier of spectral models. Full-rate Adam steps
/// on every entry of a 2048 x 2048 transform wreck it within a few updates.
pub const SPECTRAL_AFT_LR_SCALE: f64 = 1e-3;

fn unit() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn mri(variant: Variant, coils: usize, height: usize, width: usize) -> Self {
        Self {
            variant,
            domain: Domain::Mri { coils, height, width },
            widths: vec![16, 32, 64, 128],
            groups: 4,
            aft_start: AftStart::Exact,
            aft_mode: AftMode::Trainable,
            activation_offset: DEFAULT_ACTIVATION_OFFSET,
            aft_lr_scale: 1.0,
            data_consistency: true,
            seed: 0,
        }
    }

    /// Spectral denoising; data consistency does not apply.
    pub fn mrs(variant: Variant, points: usize) -> Self {
        Self {
            domain: Domain::Mrs { points },
            data_consistency: false,
            aft_lr_scale: SPECTRAL_AFT_LR_SCALE,
            ..Self::mri(variant, 1, 1, points)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.domain {
            Domain::Mri { coils, height, width } => {
                if coils == 0 || height == 0 || width == 0 {
                    return config_err("MRI dimensions must be positive");
                }
            }
            Domain::Mrs { points } => {
                if points == 0 {
                    return config_err("FID length must be positive");
                }
                if self.variant.has_kspace_net() {
                    return config_err(format!("{} has no spectral counterpart", self.variant));
                }
            }
        }
        if !(self.aft_lr_scale > 0.0) {
            return config_err("AFT learning-rate scale must be positive");
        }
        if !(self.activation_offset >= 0.0) {
            return config_err("activation offset must be non-negative");
        }
        Ok(())
    }

    fn channels(&self) -> usize {
        match self.domain {
            Domain::Mri { coils, .. } => coils,
            Domain::Mrs { .. } => 1,
        }
    }

    fn spatial(&self) -> Spatial {
        match self.domain {
            Domain::Mri { .. } => Spatial::TwoD,
            Domain::Mrs { .. } => Spatial::OneD,
        }
    }

    fn aft_config(&self) -> AftConfig {
        let (n, dir) = match self.domain {
            Domain::Mri { width, .. } => (width, Direction::Inverse),
            Domain::Mrs { points } => (points, Direction::Forward),
        };
        let mut cfg = match self.aft_start {
            AftStart::Exact => AftConfig::exact(n, dir, self.aft_mode),
            AftStart::Random => AftConfig::random(n, dir),
        };
        cfg.mode = self.aft_mode;
        cfg.activation_offset = self.activation_offset;
        cfg
    }
}

/// Fixed centred transforms used around the learnable block and for data consistency.
#[derive(Clone, Debug)]
struct Fixed<T> {
    inv_h: DftMatrix<T>,
    fwd_h: DftMatrix<T>,
    inv_w: DftMatrix<T>,
    fwd_w: DftMatrix<T>,
}

/// Parameters and structure of one model variant.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub store: ParamStore<T>,
    pub aft: AftBlock,
    pub kspace_net: Option<Cunet>,
    pub image_net: Option<Cunet>,
    fixed: Option<Fixed<T>>,
}

/// Measured data for data consistency: masked k-space `[B, C, H, W]` and its column mask.
#[derive(Clone, Debug)]
pub struct Acquisition<T> {
    pub kspace: Arc<ComplexTensor<T>>,
    pub mask: Arc<Vec<bool>>,
}

/// Output handles of [`Model::forward`].
#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    /// Image `[B, C, H, W]` (MRI) or spectrum `[B, 1, 1, N]` (MRS).
    pub image: Var,
    /// Final k-space estimate (MRI only).
    pub kspace: Option<Var>,
}

impl<T: Real> Model<T> {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut store = ParamStore::new();
        let aft = AftBlock::new(&mut store, "aft", spec.aft_config(), &mut rng);
        for id in aft.weights.into_iter().chain(aft.biases) {
            store.set_lr_scale(id, spec.aft_lr_scale);
        }
        let ucfg = CunetConfig {
            groups: spec.groups,
            ..CunetConfig::new(spec.channels(), spec.widths.clone(), spec.spatial())
        };
        let kspace_net = if spec.variant.has_kspace_net() {
            Some(Cunet::new(&mut store, "knet", ucfg.clone(), &mut rng)?)
        } else {
            None
        };
        let image_net = if spec.variant.has_image_net() {
            Some(Cunet::new(&mut store, "inet", ucfg, &mut rng)?)
        } else {
            None
        };
        let fixed = match spec.domain {
            Domain::Mri { height, width, .. } => Some(Fixed {
                inv_h: build_dft_matrix(height, Direction::Inverse, Normalization::OneOverN),
                fwd_h: build_dft_matrix(height, Direction::Forward, Normalization::None),
                inv_w: build_dft_matrix(width, Direction::Inverse, Normalization::OneOverN),
                fwd_w: build_dft_matrix(width, Direction::Forward, Normalization::None),
            }),
            Domain::Mrs { .. } => None,
        };
        Ok(Self {
            spec,
            store,
            aft,
            kspace_net,
            image_net,
            fixed,
        })
    }

    /// Copies every parameter whose name and shape match one in `other`;
    /// returns how many were copied.
    pub fn load_matching(&mut self, other: &ParamStore<T>) -> usize {
        let mut n = 0;
        for p in other.iter() {
            if let Some(id) = self.store.find(&p.name) {
                if self.store.value(id).shape() == p.value().shape() {
                    self.store.set_value(id, p.value().clone()).expect("shape checked");
                    n += 1;
                }
            }
        }
        n
    }

    /// Expected input shape `[1, C, H, W]`.
    pub fn input_shape(&self) -> [usize; 4] {
        match self.spec.domain {
            Domain::Mri { coils, height, width } => [1, coils, height, width],
            Domain::Mrs { points } => [1, 1, 1, points],
        }
    }

    fn shift2(&self, tape: &mut Tape<T>, x: Var, inverse: bool) -> Result<Var> {
        let s = tape.value(x).shape().to_vec();
        let nd = s.len();
        let mut v = x;
        for ax in [nd - 2, nd - 1] {
            let half = (s[ax] / 2) as isize;
            v = tape.roll(v, ax, if inverse { -half } else { half })?;
        }
        Ok(v)
    }

    fn fixed(&self) -> Result<&Fixed<T>> {
        self.fixed
            .as_ref()
            .ok_or_else(|| Error::Config("k-space transforms need an MRI model".into()))
    }

    /// DC-centred k-space to image through the learnable block (along `W`)
    /// and the exact inverse DFT (along `H`).
    pub fn transform_on_tape(&self, tape: &mut Tape<T>, k: Var) -> Result<Var> {
        let fx = self.fixed()?;
        let v = self.shift2(tape, k, true)?;
        let v = hybrid_on_tape(tape, &self.aft, &self.store, &fx.inv_h, v, Axis2::W)?;
        self.shift2(tape, v, false)
    }

    /// Exact centred 2-D DFT (forward or inverse) on the tape.
    pub fn oracle_on_tape(&self, tape: &mut Tape<T>, x: Var, dir: Direction) -> Result<Var> {
        let fx = self.fixed()?;
        let (mw, mh) = match dir {
            Direction::Forward => (&fx.fwd_w, &fx.fwd_h),
            Direction::Inverse => (&fx.inv_w, &fx.inv_h),
        };
        let v = self.shift2(tape, x, true)?;
        let v = mw.apply_on_tape(tape, v)?;
        let v = tape.transpose_last2(v)?;
        let v = mh.apply_on_tape(tape, v)?;
        let v = tape.transpose_last2(v)?;
        self.shift2(tape, v, false)
    }

    /// Image to k-space, measured columns restored, back to image.
    fn image_dc(&self, tape: &mut Tape<T>, img: Var, acq: &Acquisition<T>) -> Result<(Var, Var)> {
        let k = self.oracle_on_tape(tape, img, Direction::Forward)?;
        let k = tape.column_select(k, Arc::clone(&acq.kspace), Arc::clone(&acq.mask))?;
        let img = self.oracle_on_tape(tape, k, Direction::Inverse)?;
        Ok((img, k))
    }

    /// Records the variant pipeline on `tape`. `input` is masked k-space
    /// `[B, C, H, W]` (MRI) or an FID `[B, 1, 1, N]` (MRS).
    pub fn forward(&self, tape: &mut Tape<T>, input: Var, acq: Option<&Acquisition<T>>) -> Result<ForwardVars> {
        let s = tape.value(input).shape().to_vec();
        let want = self.input_shape();
        if s.len() != 4 || s[1..] != want[1..] {
            return config_err(format!("model expects [B, {}, {}, {}], got {:?}", want[1], want[2], want[3], s));
        }
        match self.spec.domain {
            Domain::Mrs { points } => {
                let spec = self.aft.forward(tape, &self.store, input)?;
                let mut spec = tape.roll(spec, 3, (points / 2) as isize)?;
                if let Some(net) = &self.image_net {
                    spec = net.forward(tape, &self.store, spec)?;
                }
                Ok(ForwardVars {
                    image: spec,
                    kspace: None,
                })
            }
            Domain::Mri { height, width, .. } => {
                let dc = if self.spec.data_consistency { acq } else { None };
                let mut k = input;
                if let Some(net) = &self.kspace_net {
                    let sc = 1.0 / ((height * width) as f64).sqrt();
                    let z = tape.scale(k, sc);
                    let z = net.forward(tape, &self.store, z)?;
                    k = tape.scale(z, 1.0 / sc);
                    if let Some(a) = dc {
                        k = tape.column_select(k, Arc::clone(&a.kspace), Arc::clone(&a.mask))?;
                    }
                }
                let mut img = self.transform_on_tape(tape, k)?;
                let mut kp = None;
                if let Some(a) = dc {
                    let (i2, k2) = self.image_dc(tape, img, a)?;
                    img = i2;
                    kp = Some(k2);
                }
                if let Some(net) = &self.image_net {
                    img = net.forward(tape, &self.store, img)?;
                    if let Some(a) = dc {
                        let (i2, k2) = self.image_dc(tape, img, a)?;
                        img = i2;
                        kp = Some(k2);
                    }
                }
                let kspace = match kp {
                    Some(k) => k,
                    None => self.oracle_on_tape(tape, img, Direction::Forward)?,
                };
                Ok(ForwardVars {
                    image: img,
                    kspace: Some(kspace),
                })
            }
        }
    }

    /// Builds the acquisition for masked k-space `[B, C, H, W]`.
    pub fn acquisition(masked: ComplexTensor<T>, mask: &SamplingMask) -> Acquisition<T> {
        Acquisition {
            kspace: Arc::new(masked),
            mask: Arc::new(mask.columns.clone()),
        }
    }
}

/// Runs an MRI model on fully or partially sampled k-space `[coils, H, W]`:
/// the mask is applied first, then the variant pipeline. Returns the coil
/// images and the final k-space estimate, both `[coils, H, W]`.
pub fn model_forward<T: Real>(
    model: &Model<T>,
    k: &CoilKSpace<T>,
    mask: &SamplingMask,
) -> Result<(ComplexTensor<T>, ComplexTensor<T>)> {
    if !matches!(model.spec.domain, Domain::Mri { .. }) {
        return config_err("model_forward needs an MRI model");
    }
    let masked = apply_mask(k, mask)?;
    let shape = masked.data.shape().to_vec();
    let batched = masked.data.clone().reshape(&[1, shape[0], shape[1], shape[2]])?;
    let acq = Model::acquisition(batched.clone(), mask);
    let mut tape = Tape::new();
    let x = tape.constant(batched);
    let out = model.forward(&mut tape, x, Some(&acq))?;
    let img = tape.value(out.image).clone().reshape(&shape)?;
    let kp = tape.value(out.kspace.expect("MRI output has k-space")).clone().reshape(&shape)?;
    Ok((img, kp))
}

/// Runs an MRS model on one FID `[N]`, returning the denoised spectrum `[N]`
/// (0 Hz at index `N / 2`).
pub fn denoise_forward<T: Real>(model: &Model<T>, fid: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    let n = fid.numel();
    let mut tape = Tape::new();
    let x = tape.constant(fid.clone().reshape(&[1, 1, 1, n])?);
    let out = model.forward(&mut tape, x, None)?;
    tape.value(out.image).clone().reshape(&[n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspace::{equispaced_mask, phantom, zero_fill_recon};

    fn small(variant: Variant) -> ModelSpec {
        ModelSpec {
            widths: vec![4, 8],
            ..ModelSpec::mri(variant, 2, 16, 16)
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
            let j = serde_json::to_string(&v).unwrap();
            assert_eq!(j, format!("\"{}\"", v.label()));
        }
        assert!("x".parse::<Variant>().is_err());
    }

    #[test]
    fn frozen_aft_full_mask_is_zero_fill() {
        let p = phantom(16, 16, 2, 1).unwrap();
        let k = CoilKSpace::new(p.kspace.data.clone()).unwrap();
        let spec = ModelSpec {
            aft_mode: AftMode::Frozen,
            ..small(Variant::Aft)
        };
        let m = Model::<f64>::new(spec).unwrap();
        let full = SamplingMask::full(16);
        let (img, _) = model_forward(&m, &k, &full).unwrap();
        assert!(img.max_abs_diff(&zero_fill_recon(&k).unwrap()) < 1e-10);
    }

    #[test]
    fn fresh_ki_matches_aft_and_keeps_acquired_columns() {
        let p = phantom(16, 16, 2, 2).unwrap();
        let k = CoilKSpace::new(p.kspace.data.cast::<f32>()).unwrap();
        let mask = equispaced_mask(16, 4, 3).unwrap();
        let aft = Model::<f32>::new(small(Variant::Aft)).unwrap();
        let ki = Model::<f32>::new(small(Variant::Ki)).unwrap();
        let (a, _) = model_forward(&aft, &k, &mask).unwrap();
        let (b, kp) = model_forward(&ki, &k, &mask).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-5);
        let masked = apply_mask(&k, &mask).unwrap();
        let w = 16;
        for i in 0..kp.numel() {
            if mask.columns[i % w] {
                assert_eq!(kp.get(i), masked.data.get(i));
            }
        }
    }

    #[test]
    fn spectral_model_shapes() {
        let spec = ModelSpec {
            widths: vec![4, 8],
            ..ModelSpec::mrs(Variant::I, 32)
        };
        let m = Model::<f32>::new(spec).unwrap();
        let fid = ComplexTensor::<f32>::from_fn(&[32], |i| ((i as f32 * 0.3).cos(), 0.0));
        assert_eq!(denoise_forward(&m, &fid).unwrap().shape(), &[32]);
        assert!(Model::<f32>::new(ModelSpec::mrs(Variant::K, 32)).is_err());
    }

    #[test]
    fn wrong_input_shape_is_config_error() {
        let m = Model::<f32>::new(small(Variant::I)).unwrap();
        let k = CoilKSpace::new(ComplexTensor::<f32>::zeros(&[3, 16, 16])).unwrap();
        assert!(matches!(model_forward(&m, &k, &SamplingMask::full(16)), Err(Error::Config(_))));
    }
}
