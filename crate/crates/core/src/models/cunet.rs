use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Var};
use crate::ctensor::{ComplexTensor, ConvGeom};
use crate::error::{config_err, Result};
use crate::scalar::Real;

use super::{AttentionGate, ConvLayer, ResidualBlock, Spatial};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CunetConfig {
    /// Input and output channels.
    pub channels: usize,
    /// Feature widths per level; the last entry is the bottleneck, so the
    /// depth (number of pooling steps) is `widths.len() - 1`.
    pub widths: Vec<usize>,
    pub groups: usize,
    pub spatial: Spatial,
}

impl CunetConfig {
    pub fn new(channels: usize, widths: Vec<usize>, spatial: Spatial) -> Self {
        Self {
            channels,
            widths,
            groups: 4,
            spatial,
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return config_err("a UNet needs at least one pooling level (two widths)");
        }
        if self.channels == 0 || self.widths.contains(&0) {
            return config_err("channel counts must be positive");
        }
        if let Some(w) = self.widths.iter().find(|&&w| w % self.groups != 0) {
            return config_err(format!("width {} is not divisible by {} norm groups", w, self.groups));
        }
        Ok(())
    }

    /// Checks that `H` and `W` survive `depth` poolings.
    pub fn check_input(&self, h: usize, w: usize) -> Result<()> {
        let f = 1usize << self.depth();
        let [ph, pw] = self.spatial.pool();
        let (fh, fw) = (if ph == 1 { 1 } else { f }, if pw == 1 { 1 } else { f });
        if h % fh != 0 || w % fw != 0 {
            return config_err(format!("input {}x{} not divisible by {}x{}", h, w, fh, fw));
        }
        Ok(())
    }
}

/// Complex residual attention UNet with a global skip: the head conv starts
/// at zero, so a fresh network is the identity map.
#[derive(Clone, Debug)]
pub struct Cunet {
    pub config: CunetConfig,
    pub encoders: Vec<ResidualBlock>,
    pub bottleneck: ResidualBlock,
    pub ups: Vec<ConvLayer>,
    pub gates: Vec<AttentionGate>,
    pub decoders: Vec<ResidualBlock>,
    pub head: ConvLayer,
}

impl Cunet {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        config: CunetConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let (g, sp, w) = (config.groups, config.spatial, &config.widths);
        let depth = config.depth();
        let mut encoders = Vec::with_capacity(depth);
        let mut cin = config.channels;
        for (l, &width) in w.iter().enumerate().take(depth) {
            encoders.push(ResidualBlock::new(store, &format!("{}.enc{}", name, l), cin, width, g, sp, rng)?);
            cin = width;
        }
        let bottleneck = ResidualBlock::new(store, &format!("{}.mid", name), cin, w[depth], g, sp, rng)?;
        let (mut ups, mut gates, mut decoders) = (Vec::new(), Vec::new(), Vec::new());
        for l in (0..depth).rev() {
            ups.push(ConvLayer::transposed(store, &format!("{}.up{}", name, l), w[l + 1], w[l], sp.up(), rng));
            gates.push(AttentionGate::new(store, &format!("{}.att{}", name, l), w[l], w[l], (w[l] / 2).max(1), rng));
            decoders.push(ResidualBlock::new(store, &format!("{}.dec{}", name, l), 2 * w[l], w[l], g, sp, rng)?);
        }
        let head = ConvLayer::new(store, &format!("{}.head", name), w[0], config.channels, ConvGeom::pointwise(), rng);
        head.zero(store);
        Ok(Self {
            config,
            encoders,
            bottleneck,
            ups,
            gates,
            decoders,
            head,
        })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let s = tape.value(x).shape().to_vec();
        if s.len() != 4 || s[1] != self.config.channels {
            return config_err(format!(
                "UNet expects [B, {}, H, W], got {:?}",
                self.config.channels, s
            ));
        }
        self.config.check_input(s[2], s[3])?;
        let pool = self.config.spatial.pool();
        let mut skips = Vec::with_capacity(self.encoders.len());
        let mut h = x;
        for enc in &self.encoders {
            let e = enc.forward(tape, store, h)?;
            skips.push(e);
            h = tape.max_pool(e, pool, pool)?;
        }
        h = self.bottleneck.forward(tape, store, h)?;
        for (i, ((up, gate), dec)) in self.ups.iter().zip(&self.gates).zip(&self.decoders).enumerate() {
            let skip = skips[skips.len() - 1 - i];
            let u = up.forward(tape, store, h)?;
            let gated = gate.forward(tape, store, u, skip)?;
            let c = tape.concat_channels(&[gated, u])?;
            h = dec.forward(tape, store, c)?;
        }
        let out = self.head.forward(tape, store, h)?;
        tape.add(x, out)
    }

    /// Evaluates the network on a plain tensor.
    pub fn apply<T: Real>(&self, store: &ParamStore<T>, z: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        let mut tape = Tape::new();
        let x = tape.constant(z.clone());
        let y = self.forward(&mut tape, store, x)?;
        Ok(tape.value(y).clone())
    }
}

/// Evaluates a UNet on `z` `[B, C, H, W]`.
pub fn cunet_forward<T: Real>(net: &Cunet, store: &ParamStore<T>, z: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    net.apply(store, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_network_is_identity_and_shape_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::<f32>::new();
        let net = Cunet::new(&mut store, "u", CunetConfig::new(4, vec![8, 16, 32], Spatial::TwoD), &mut rng).unwrap();
        let z = ComplexTensor::<f32>::randn(&[1, 4, 16, 16], &mut rng);
        let y = cunet_forward(&net, &store, &z).unwrap();
        assert_eq!(y, z);
    }

    #[test]
    fn trained_head_changes_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::<f64>::new();
        let net = Cunet::new(&mut store, "u", CunetConfig::new(2, vec![4, 8], Spatial::TwoD), &mut rng).unwrap();
        let w = ComplexTensor::randn(store.value(net.head.weight).shape(), &mut rng);
        store.set_value(net.head.weight, w).unwrap();
        let z = ComplexTensor::<f64>::randn(&[1, 2, 8, 8], &mut rng);
        let y = cunet_forward(&net, &store, &z).unwrap();
        assert_eq!(y.shape(), z.shape());
        assert!(y.max_abs_diff(&z) > 1e-3);
    }

    #[test]
    fn one_d_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f32>::new();
        let net = Cunet::new(&mut store, "s", CunetConfig::new(1, vec![4, 8, 16], Spatial::OneD), &mut rng).unwrap();
        let z = ComplexTensor::<f32>::randn(&[1, 1, 1, 64], &mut rng);
        assert_eq!(cunet_forward(&net, &store, &z).unwrap().shape(), &[1, 1, 1, 64]);
    }

    #[test]
    fn rejects_indivisible_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::<f32>::new();
        let net = Cunet::new(&mut store, "u", CunetConfig::new(1, vec![4, 8, 16], Spatial::TwoD), &mut rng).unwrap();
        let z = ComplexTensor::<f32>::zeros(&[1, 1, 10, 16]);
        assert!(matches!(cunet_forward(&net, &store, &z), Err(crate::Error::Config(_))));
        let bad = CunetConfig::new(1, vec![6, 8], Spatial::TwoD);
        assert!(Cunet::new(&mut store, "v", bad, &mut rng).is_err());
    }
}
