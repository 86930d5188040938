use serde::{Deserialize, Serialize};

use crate::ctensor::ComplexTensor;
use crate::scalar::Real;

/// Default negative slope of the complex LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.1;

/// Split activations: the real function is applied to re and im independently.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
}

impl Activation {
    pub fn leaky() -> Self {
        Activation::LeakyRelu(LEAKY_SLOPE)
    }

    #[inline]
    pub fn apply<T: Real>(&self, x: T) -> T {
        match *self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::LeakyRelu(s) => {
                if x > T::zero() {
                    x
                } else {
                    x * T::of(s)
                }
            }
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    #[inline]
    pub fn derivative<T: Real>(&self, x: T, y: T) -> T {
        match *self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(s) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::of(s)
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

pub fn complex_activation<T: Real>(z: &ComplexTensor<T>, kind: Activation) -> ComplexTensor<T> {
    ComplexTensor::from_fn(z.shape(), |i| {
        let (a, b) = z.get(i);
        (kind.apply(a), kind.apply(b))
    })
}

pub(crate) fn activation_backward<T: Real>(
    g: &ComplexTensor<T>,
    x: &ComplexTensor<T>,
    y: &ComplexTensor<T>,
    kind: Activation,
) -> ComplexTensor<T> {
    ComplexTensor::from_fn(x.shape(), |i| {
        (
            g.re()[i] * kind.derivative(x.re()[i], y.re()[i]),
            g.im()[i] * kind.derivative(x.im()[i], y.im()[i]),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(re: f64, im: f64, kind: Activation) -> (f64, f64) {
        let z = ComplexTensor::new(vec![re], vec![im], &[1]).unwrap();
        complex_activation(&z, kind).get(0)
    }

    #[test]
    fn relu_sign_cases() {
        assert_eq!(one(1.0, 2.0, Activation::Relu), (1.0, 2.0));
        assert_eq!(one(-1.0, 2.0, Activation::Relu), (0.0, 2.0));
        assert_eq!(one(-1.0, -2.0, Activation::Relu), (0.0, 0.0));
    }

    #[test]
    fn leaky_and_sigmoid() {
        let (a, b) = one(-10.0, 10.0, Activation::leaky());
        assert!((a + 1.0).abs() < 1e-12 && b == 10.0);
        assert_eq!(one(0.0, 0.0, Activation::Sigmoid), (0.5, 0.5));
    }

    #[test]
    fn relu_is_identity_in_first_quadrant() {
        for &(a, b) in &[(0.1, 3.0), (2.5, 0.01), (7.0, 7.0)] {
            assert_eq!(one(a, b, Activation::Relu), (a, b));
        }
    }
}
