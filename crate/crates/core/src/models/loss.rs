use std::sync::Arc;

use crate::autodiff::{rss_channels, Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::Result;
use crate::scalar::Real;

/// Treats `[C, H, W]` as a batch of one.
fn as_batched<T: Real>(x: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    match x.ndim() {
        3 => {
            let s = x.shape();
            x.clone().reshape(&[1, s[0], s[1], s[2]])
        }
        _ => Ok(x.clone()),
    }
}

fn scalar<T: Real>(tape: &Tape<T>, v: Var) -> f64 {
    tape.value(v).re()[0].f64()
}

/// `MSE(re x, re y) + MSE(im x, im y)`.
pub fn loss_recon<T: Real>(x: &ComplexTensor<T>, y: &ComplexTensor<T>) -> Result<f64> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let l = recon_on_tape(&mut tape, xv, Arc::new(y.clone()))?;
    Ok(scalar(&tape, l))
}

/// [`loss_recon`] plus the MSE between the coil root-sum-of-squares images;
/// inputs are `[C, H, W]` or `[B, C, H, W]`.
pub fn loss_acc<T: Real>(x: &ComplexTensor<T>, y: &ComplexTensor<T>) -> Result<f64> {
    let (x, y) = (as_batched(x)?, as_batched(y)?);
    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let target = AccTarget::new(y)?;
    let l = acc_on_tape(&mut tape, xv, &target)?;
    Ok(scalar(&tape, l))
}

/// `MAE(re x, re y) + MAE(im x, im y)`.
pub fn loss_denoise<T: Real>(x: &ComplexTensor<T>, y: &ComplexTensor<T>) -> Result<f64> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let l = tape.l1(xv, Arc::new(y.clone()))?;
    Ok(scalar(&tape, l))
}

pub fn recon_on_tape<T: Real>(tape: &mut Tape<T>, x: Var, target: Arc<ComplexTensor<T>>) -> Result<Var> {
    tape.mse(x, target)
}

/// Target of [`acc_on_tape`] with its root-sum-of-squares precomputed.
#[derive(Clone, Debug)]
pub struct AccTarget<T> {
    pub coils: Arc<ComplexTensor<T>>,
    pub rss: Arc<ComplexTensor<T>>,
}

impl<T: Real> AccTarget<T> {
    /// `coils` is `[B, C, H, W]`.
    pub fn new(coils: ComplexTensor<T>) -> Result<Self> {
        let rss = rss_channels(&coils)?;
        Ok(Self {
            coils: Arc::new(coils),
            rss: Arc::new(rss),
        })
    }
}

pub fn acc_on_tape<T: Real>(tape: &mut Tape<T>, x: Var, target: &AccTarget<T>) -> Result<Var> {
    let a = tape.mse(x, Arc::clone(&target.coils))?;
    let r = tape.rss(x)?;
    let b = tape.mse(r, Arc::clone(&target.rss))?;
    tape.add(a, b)
}

pub fn denoise_on_tape<T: Real>(tape: &mut Tape<T>, x: Var, target: Arc<ComplexTensor<T>>) -> Result<Var> {
    tape.l1(x, target)
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
    fn recon_cases() {
        let x = ComplexTensor::<f64>::randn(&[3, 4], &mut rng(1));
        assert_eq!(loss_recon(&x, &x).unwrap(), 0.0);
        let ones = ComplexTensor::<f64>::from_fn(&[5], |_| (1.0, 1.0));
        assert_eq!(loss_recon(&ones, &ComplexTensor::zeros(&[5])).unwrap(), 2.0);
        let y = ComplexTensor::<f64>::randn(&[3, 4], &mut rng(2));
        let want: f64 = (0..12)
            .map(|i| (x.re()[i] - y.re()[i]).powi(2) / 12.0 + (x.im()[i] - y.im()[i]).powi(2) / 12.0)
            .sum();
        assert!((loss_recon(&x, &y).unwrap() - want).abs() < 1e-14);
        assert!(loss_recon(&x, &ComplexTensor::zeros(&[12])).is_err());
    }

    #[test]
    fn acc_cases() {
        let x = ComplexTensor::<f64>::randn(&[2, 3, 3], &mut rng(3));
        assert_eq!(loss_acc(&x, &x).unwrap(), 0.0);
        let neg = x.scale(-1.0);
        let a = loss_acc(&neg, &x).unwrap();
        assert!((a - loss_recon(&neg, &x).unwrap()).abs() < 1e-14 && a > 0.0);
        let y = ComplexTensor::<f64>::randn(&[2, 3, 3], &mut rng(4));
        let rss = |t: &ComplexTensor<f64>, p: usize| {
            (0..2).map(|c| t.re()[c * 9 + p].powi(2) + t.im()[c * 9 + p].powi(2)).sum::<f64>().sqrt()
        };
        let extra: f64 = (0..9).map(|p| (rss(&x, p) - rss(&y, p)).powi(2)).sum::<f64>() / 9.0;
        let want = loss_recon(&x, &y).unwrap() + extra;
        assert!((loss_acc(&x, &y).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn denoise_cases() {
        let y = ComplexTensor::<f64>::randn(&[16], &mut rng(5));
        assert_eq!(loss_denoise(&y, &y).unwrap(), 0.0);
        let x = y.add(&ComplexTensor::from_fn(&[16], |_| (1.0, 1.0))).unwrap();
        assert!((loss_denoise(&x, &y).unwrap() - 2.0).abs() < 1e-12);
    }
}
