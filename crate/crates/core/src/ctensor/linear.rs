use crate::ctensor::gemm::{cgemm, CMat};
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Result};
use crate::scalar::Real;

/// Weights of a complex linear layer `W = W1 + i W2`.
///
/// `weight` holds `W1` in its real plane and `W2` in its imaginary plane,
/// both `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexLinearWeights<T> {
    pub weight: ComplexTensor<T>,
    pub bias: Option<ComplexTensor<T>>,
}

impl<T: Real> ComplexLinearWeights<T> {
    pub fn new(weight: ComplexTensor<T>, bias: Option<ComplexTensor<T>>) -> Result<Self> {
        if weight.ndim() != 2 {
            return dim_err(format!("linear weight must be 2-D, got {:?}", weight.shape()));
        }
        if let Some(b) = &bias {
            if b.shape() != [weight.shape()[0]] {
                return dim_err(format!(
                    "bias shape {:?} does not match {} outputs",
                    b.shape(),
                    weight.shape()[0]
                ));
            }
        }
        Ok(Self { weight, bias })
    }

    pub fn from_parts(w1: Vec<T>, w2: Vec<T>, out: usize, inp: usize) -> Result<Self> {
        Self::new(ComplexTensor::new(w1, w2, &[out, inp])?, None)
    }

    /// `I + 0i`.
    pub fn identity(n: usize) -> Self {
        let w = ComplexTensor::from_fn(&[n, n], |i| {
            (if i / n == i % n { T::one() } else { T::zero() }, T::zero())
        });
        Self { weight: w, bias: None }
    }

    pub fn w1(&self) -> &[T] {
        self.weight.re()
    }

    pub fn w2(&self) -> &[T] {
        self.weight.im()
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }
}

pub(crate) fn check_linear<T: Real>(
    z: &ComplexTensor<T>,
    weight: &ComplexTensor<T>,
    bias: Option<&ComplexTensor<T>>,
) -> Result<()> {
    if weight.ndim() != 2 {
        return dim_err("linear weight must be 2-D");
    }
    if z.ndim() == 0 || z.last_dim() != weight.shape()[1] {
        return dim_err(format!(
            "linear expects trailing dim {}, input has shape {:?}",
            weight.shape()[1],
            z.shape()
        ));
    }
    if let Some(b) = bias {
        if b.numel() != weight.shape()[0] {
            return dim_err("bias length does not match output features");
        }
    }
    Ok(())
}

/// `re = W1 re(z) - W2 im(z)`, `im = W2 re(z) + W1 im(z)` along the trailing axis.
pub fn complex_linear<T: Real>(
    z: &ComplexTensor<T>,
    w: &ComplexLinearWeights<T>,
) -> Result<ComplexTensor<T>> {
    linear_forward(z, &w.weight, w.bias.as_ref())
}

pub(crate) fn linear_forward<T: Real>(
    z: &ComplexTensor<T>,
    weight: &ComplexTensor<T>,
    bias: Option<&ComplexTensor<T>>,
) -> Result<ComplexTensor<T>> {
    check_linear(z, weight, bias)?;
    let (out_f, in_f) = (weight.shape()[0], weight.shape()[1]);
    let rows = z.numel() / in_f;
    let mut shape = z.shape().to_vec();
    *shape.last_mut().unwrap() = out_f;
    let mut y = ComplexTensor::zeros(&shape);
    {
        let (yr, yi) = y.planes_mut();
        cgemm(
            rows,
            in_f,
            out_f,
            CMat::rows(z.re(), z.im(), in_f),
            CMat::rows_t(weight.re(), weight.im(), in_f),
            yr,
            yi,
            out_f,
            false,
        );
        if let Some(b) = bias {
            for r in 0..rows {
                for o in 0..out_f {
                    yr[r * out_f + o] += b.re()[o];
                    yi[r * out_f + o] += b.im()[o];
                }
            }
        }
    }
    Ok(y)
}

/// Gradient with respect to the input: `g_z = g_y conj(W)`.
pub(crate) fn linear_backward_input<T: Real>(
    gy: &ComplexTensor<T>,
    weight: &ComplexTensor<T>,
    z_shape: &[usize],
) -> ComplexTensor<T> {
    let (out_f, in_f) = (weight.shape()[0], weight.shape()[1]);
    let rows = gy.numel() / out_f;
    let mut gz = ComplexTensor::zeros(z_shape);
    let (gr, gi) = gz.planes_mut();
    cgemm(
        rows,
        out_f,
        in_f,
        CMat::rows(gy.re(), gy.im(), out_f),
        CMat::rows(weight.re(), weight.im(), in_f).conj(),
        gr,
        gi,
        in_f,
        false,
    );
    gz
}

/// Gradient with respect to the weight: `g_W = g_y^T conj(z)`.
pub(crate) fn linear_backward_weight<T: Real>(
    gy: &ComplexTensor<T>,
    z: &ComplexTensor<T>,
    out_f: usize,
    in_f: usize,
) -> ComplexTensor<T> {
    let rows = z.numel() / in_f;
    let mut gw = ComplexTensor::zeros(&[out_f, in_f]);
    let (gr, gi) = gw.planes_mut();
    cgemm(
        out_f,
        rows,
        in_f,
        CMat::rows_t(gy.re(), gy.im(), out_f),
        CMat::rows(z.re(), z.im(), in_f).conj(),
        gr,
        gi,
        in_f,
        false,
    );
    gw
}

pub(crate) fn linear_backward_bias<T: Real>(gy: &ComplexTensor<T>, out_f: usize) -> ComplexTensor<T> {
    let mut gb = ComplexTensor::zeros(&[out_f]);
    let rows = gy.numel() / out_f;
    let (br, bi) = gb.planes_mut();
    for r in 0..rows {
        for o in 0..out_f {
            br[o] += gy.re()[r * out_f + o];
            bi[o] += gy.im()[r * out_f + o];
        }
    }
    gb
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = ComplexTensor::<f64>::randn(&[4, 5], &mut rng);
        let y = complex_linear(&z, &ComplexLinearWeights::identity(5)).unwrap();
        assert_eq!(y, z);
    }

    #[test]
    fn imaginary_identity_multiplies_by_i() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = ComplexTensor::<f64>::randn(&[3], &mut rng);
        let w = ComplexLinearWeights::from_parts(
            vec![0.0; 9],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            3,
            3,
        )
        .unwrap();
        let y = complex_linear(&z, &w).unwrap();
        for i in 0..3 {
            assert_eq!(y.get(i), (-z.im()[i], z.re()[i]));
        }
    }

    #[test]
    fn random_matches_scalar_complex_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = ComplexTensor::<f64>::randn(&[3], &mut rng);
        let w = ComplexTensor::<f64>::randn(&[2, 3], &mut rng);
        let b = ComplexTensor::<f64>::randn(&[2], &mut rng);
        let lw = ComplexLinearWeights::new(w.clone(), Some(b.clone())).unwrap();
        let y = complex_linear(&z, &lw).unwrap();
        for o in 0..2 {
            let (mut sr, mut si) = b.get(o);
            for i in 0..3 {
                let (a, bb) = w.get(o * 3 + i);
                let (c, d) = z.get(i);
                sr += a * c - bb * d;
                si += a * d + bb * c;
            }
            assert!((y.re()[o] - sr).abs() < 1e-12);
            assert!((y.im()[o] - si).abs() < 1e-12);
        }
    }

    #[test]
    fn trailing_dim_mismatch_is_rejected() {
        let z = ComplexTensor::<f32>::zeros(&[2, 4]);
        let w = ComplexLinearWeights::<f32>::identity(3);
        assert!(matches!(
            complex_linear(&z, &w),
            Err(crate::Error::Dimension(_))
        ));
    }
}
