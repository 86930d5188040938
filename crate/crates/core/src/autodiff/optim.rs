use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::params::ParamStore;
use crate::ctensor::ComplexTensor;
use crate::error::{config_err, Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment accumulators, one pair per parameter of a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct OptimState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<ComplexTensor<T>>,
    pub v: Vec<ComplexTensor<T>>,
}

impl<T: Real> OptimState<T> {
    pub fn new(store: &ParamStore<T>, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: store.iter().map(|p| ComplexTensor::zeros(p.value().shape())).collect(),
            v: store.iter().map(|p| ComplexTensor::zeros(p.value().shape())).collect(),
        }
    }
}

/// One bias-corrected Adam update of every trainable parameter, using the
/// gradients currently accumulated in `store`. Real and imaginary planes are
/// updated independently.
pub fn adam_step<T: Real>(store: &mut ParamStore<T>, state: &mut OptimState<T>, lr: f64) -> Result<()> {
    if !(lr > 0.0) {
        return config_err(format!("learning rate must be positive, got {}", lr));
    }
    if state.m.len() != store.len() {
        return config_err("optimizer state does not match parameter store");
    }
    for p in store.iter() {
        if p.trainable && !p.grad.all_finite() {
            return Err(Error::NonFinite(format!("gradient of {} contains NaN/inf", p.name)));
        }
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let b1 = T::of(c.beta1);
    let b2 = T::of(c.beta2);
    let one = T::one();
    let bc1 = T::of(1.0 - c.beta1.powi(t));
    let bc2 = T::of(1.0 - c.beta2.powi(t));
    let eps = T::of(c.eps);
    let ids: Vec<_> = store.iter().filter(|p| p.trainable).map(|p| (p.id, T::of(lr * p.lr_scale))).collect();
    let update = |lr: T, g: &[T], m: &mut [T], v: &mut [T], w: &mut [T]| {
        for i in 0..g.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let mh = m[i] / bc1;
            let vh = v[i] / bc2;
            w[i] -= lr * mh / (vh.sqrt() + eps);
        }
    };
    for (id, lr) in ids {
        let (value, g) = store.value_and_grad_mut(id);
        let m = &mut state.m[id.0];
        let v = &mut state.v[id.0];
        update(lr, g.re(), m.re_mut(), v.re_mut(), value.re_mut());
        update(lr, g.im(), m.im_mut(), v.im_mut(), value.im_mut());
    }
    Ok(())
}

/// Cosine annealing from `lr0` at epoch 0 to `lr_min` at `epoch == total`.
pub fn cosine_lr(epoch: usize, total: usize, lr0: f64, lr_min: f64) -> Result<f64> {
    if total == 0 {
        return config_err("cosine schedule needs at least one epoch");
    }
    if epoch > total {
        return config_err(format!("epoch {} beyond schedule length {}", epoch, total));
    }
    let frac = epoch as f64 / total as f64;
    Ok(lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (PI * frac).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> (ParamStore<f64>, crate::autodiff::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", ComplexTensor::from_real(vec![v], &[1]).unwrap());
        (s, id)
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        assert!((cosine_lr(0, 50, 1e-3, 1e-5).unwrap() - 1e-3).abs() < 1e-18);
        assert!((cosine_lr(50, 50, 1e-3, 1e-5).unwrap() - 1e-5).abs() < 1e-18);
        assert!((cosine_lr(25, 50, 1e-3, 1e-5).unwrap() - (1e-3 + 1e-5) / 2.0).abs() < 1e-15);
        assert!(cosine_lr(0, 0, 1e-3, 1e-5).is_err());
        assert!(cosine_lr(51, 50, 1e-3, 1e-5).is_err());
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut s, id) = scalar_store(0.7);
        let mut st = OptimState::new(&s, AdamConfig::default());
        adam_step(&mut s, &mut st, 1e-3).unwrap();
        assert_eq!(s.value(id).re()[0], 0.7);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn hand_rolled_recurrence() {
        let (mut s, id) = scalar_store(0.0);
        let mut st = OptimState::new(&s, AdamConfig::default());
        let (mut w, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=3 {
            s.grad_mut(id).set(0, (1.0, 0.0));
            adam_step(&mut s, &mut st, 1e-2).unwrap();
            m = 0.9 * m + 0.1;
            v = 0.999 * v + 0.001;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w -= 1e-2 * mh / (vh.sqrt() + 1e-8);
            assert!((s.value(id).re()[0] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let (mut s, id) = scalar_store(0.0);
        let mut st = OptimState::new(&s, AdamConfig::default());
        let mut prev = 0.0;
        for _ in 0..200 {
            s.grad_mut(id).set(0, (-3.0, 2.0));
            adam_step(&mut s, &mut st, 1e-3).unwrap();
            let cur = s.value(id).re()[0];
            assert!(cur > prev);
            assert!(((cur - prev) - 1e-3).abs() < 1e-6);
            prev = cur;
        }
        assert!(s.value(id).im()[0] < 0.0);
    }

    #[test]
    fn lr_scale_shrinks_step() {
        let (mut s, id) = scalar_store(0.0);
        s.set_lr_scale(id, 0.1);
        let mut st = OptimState::new(&s, AdamConfig::default());
        s.grad_mut(id).set(0, (1.0, 0.0));
        adam_step(&mut s, &mut st, 1e-2).unwrap();
        assert!((s.value(id).re()[0] + 1e-3).abs() < 1e-9);
    }

    #[test]
    fn nan_gradient_aborts_without_update() {
        let (mut s, id) = scalar_store(1.0);
        let mut st = OptimState::new(&s, AdamConfig::default());
        s.grad_mut(id).set(0, (f64::NAN, 0.0));
        assert!(matches!(adam_step(&mut s, &mut st, 1e-3), Err(Error::NonFinite(_))));
        assert_eq!(st.step, 0);
        assert_eq!(s.value(id).re()[0], 1.0);
    }
}
