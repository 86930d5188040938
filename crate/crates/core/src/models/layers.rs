use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::ctensor::{Activation, ComplexTensor, ConvGeom};
use crate::error::{config_err, Result};
use crate::scalar::Real;

pub const NORM_EPS: f64 = 1e-5;

/// Complex convolution (or transposed convolution) with bias.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub geom: ConvGeom,
    pub transposed: bool,
}

impl ConvLayer {
    /// Gaussian weights with per-plane variance `1 / fan_in`.
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        geom: ConvGeom,
        rng: &mut R,
    ) -> Self {
        let [kh, kw] = geom.kernel;
        let std = 1.0 / ((cin * kh * kw) as f64).sqrt();
        let w = ComplexTensor::<T>::randn(&[cout, cin, kh, kw], rng).scale(T::of(std));
        Self {
            weight: store.add(format!("{}.weight", name), w),
            bias: store.add(format!("{}.bias", name), ComplexTensor::zeros(&[cout])),
            geom,
            transposed: false,
        }
    }

    pub fn transposed<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        geom: ConvGeom,
        rng: &mut R,
    ) -> Self {
        let [kh, kw] = geom.kernel;
        let std = 1.0 / (cin as f64).sqrt();
        let w = ComplexTensor::<T>::randn(&[cin, cout, kh, kw], rng).scale(T::of(std));
        Self {
            weight: store.add(format!("{}.weight", name), w),
            bias: store.add(format!("{}.bias", name), ComplexTensor::zeros(&[cout])),
            geom,
            transposed: true,
        }
    }

    /// Zero weights and bias.
    pub fn zero<T: Real>(&self, store: &mut ParamStore<T>) {
        for id in [self.weight, self.bias] {
            let shape = store.value(id).shape().to_vec();
            store.set_value(id, ComplexTensor::zeros(&shape)).expect("same shape");
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        if self.transposed {
            tape.conv_transpose2d(x, w, Some(b), self.geom)
        } else {
            tape.conv2d(x, w, Some(b), self.geom)
        }
    }
}

/// Complex group normalisation with learnable `gamma` (2x2 per channel) and `beta`.
#[derive(Clone, Debug)]
pub struct NormLayer {
    pub gamma_diag: ParamId,
    pub gamma_off: ParamId,
    pub beta: ParamId,
    pub groups: usize,
}

impl NormLayer {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize, groups: usize) -> Result<Self> {
        if groups == 0 || channels % groups != 0 {
            return config_err(format!("{} channels not divisible into {} groups", channels, groups));
        }
        let ones = vec![T::one(); channels];
        Ok(Self {
            gamma_diag: store.add(
                format!("{}.gamma_diag", name),
                ComplexTensor::new(ones.clone(), ones, &[channels])?,
            ),
            gamma_off: store.add(format!("{}.gamma_off", name), ComplexTensor::zeros(&[channels])),
            beta: store.add(format!("{}.beta", name), ComplexTensor::zeros(&[channels])),
            groups,
        })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let gd = tape.param(store, self.gamma_diag);
        let go = tape.param(store, self.gamma_off);
        let b = tape.param(store, self.beta);
        tape.group_norm(x, gd, go, b, self.groups, NORM_EPS)
    }
}

/// Geometry of the spatial layers: square for images, `1 x k` for spectra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spatial {
    TwoD,
    OneD,
}

impl Spatial {
    pub fn conv3(self) -> ConvGeom {
        match self {
            Spatial::TwoD => ConvGeom::same3(),
            Spatial::OneD => ConvGeom::new([1, 3], [1, 1], [0, 1]),
        }
    }

    pub fn pool(self) -> [usize; 2] {
        match self {
            Spatial::TwoD => [2, 2],
            Spatial::OneD => [1, 2],
        }
    }

    pub fn up(self) -> ConvGeom {
        let p = self.pool();
        ConvGeom::new(p, p, [0, 0])
    }
}

/// `main = act(norm2(conv2(act(norm1(conv1 x)))))`, `out = main + skip(x)`,
/// with a 1x1 conv on the skip path when the channel count changes.
#[derive(Clone, Debug)]
pub struct ResidualBlock {
    pub conv1: ConvLayer,
    pub norm1: NormLayer,
    pub conv2: ConvLayer,
    pub norm2: NormLayer,
    pub skip: Option<ConvLayer>,
}

impl ResidualBlock {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        groups: usize,
        spatial: Spatial,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            conv1: ConvLayer::new(store, &format!("{}.conv1", name), cin, cout, spatial.conv3(), rng),
            norm1: NormLayer::new(store, &format!("{}.norm1", name), cout, groups)?,
            conv2: ConvLayer::new(store, &format!("{}.conv2", name), cout, cout, spatial.conv3(), rng),
            norm2: NormLayer::new(store, &format!("{}.norm2", name), cout, groups)?,
            skip: (cin != cout)
                .then(|| ConvLayer::new(store, &format!("{}.skip", name), cin, cout, ConvGeom::pointwise(), rng)),
        })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let h = self.conv1.forward(tape, store, x)?;
        let h = self.norm1.forward(tape, store, h)?;
        let h = tape.activation(h, Activation::leaky());
        let h = self.conv2.forward(tape, store, h)?;
        let h = self.norm2.forward(tape, store, h)?;
        let h = tape.activation(h, Activation::leaky());
        let s = match &self.skip {
            Some(c) => c.forward(tape, store, x)?,
            None => x,
        };
        tape.add(h, s)
    }
}

/// Additive attention gate: `alpha = sigmoid(psi(act(Wg g + Wx x)))`, and the
/// skip tensor `x` is scaled by `|alpha|`.
#[derive(Clone, Debug)]
pub struct AttentionGate {
    pub gate_proj: ConvLayer,
    pub skip_proj: ConvLayer,
    pub psi: ConvLayer,
}

impl AttentionGate {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        gate_ch: usize,
        skip_ch: usize,
        inter_ch: usize,
        rng: &mut R,
    ) -> Self {
        let pw = ConvGeom::pointwise();
        Self {
            gate_proj: ConvLayer::new(store, &format!("{}.gate", name), gate_ch, inter_ch, pw, rng),
            skip_proj: ConvLayer::new(store, &format!("{}.skip", name), skip_ch, inter_ch, pw, rng),
            psi: ConvLayer::new(store, &format!("{}.psi", name), inter_ch, 1, pw, rng),
        }
    }

    /// The gate map `alpha` `[B, 1, H, W]`.
    pub fn coefficients<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, g: Var, x: Var) -> Result<Var> {
        let a = self.gate_proj.forward(tape, store, g)?;
        let b = self.skip_proj.forward(tape, store, x)?;
        let q = tape.add(a, b)?;
        let q = tape.activation(q, Activation::leaky());
        let q = self.psi.forward(tape, store, q)?;
        Ok(tape.activation(q, Activation::Sigmoid))
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, g: Var, x: Var) -> Result<Var> {
        let alpha = self.coefficients(tape, store, g, x)?;
        tape.modulus_gate(x, alpha)
    }
}
