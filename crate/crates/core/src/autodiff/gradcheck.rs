//! Central finite-difference checks of tape gradients (64-bit only).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamStore, Tape, Var};
use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};

/// Largest analytic-vs-numeric discrepancy relative to the largest numeric
/// gradient entry among the probed coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_abs_err: f64,
    pub max_abs_grad: f64,
    pub probes: usize,
}

impl GradCheck {
    pub fn rel_err(&self) -> f64 {
        if self.max_abs_grad == 0.0 {
            self.max_abs_err
        } else {
            self.max_abs_err / self.max_abs_grad
        }
    }

    fn merge(&mut self, o: GradCheck) {
        self.max_abs_err = self.max_abs_err.max(o.max_abs_err);
        self.max_abs_grad = self.max_abs_grad.max(o.max_abs_grad);
        self.probes += o.probes;
    }
}

fn loss_value(tape: &Tape<f64>, v: Var) -> Result<f64> {
    let t = tape.value(v);
    if t.numel() != 1 {
        return Err(Error::Usage(format!("gradient check needs a scalar, got {:?}", t.shape())));
    }
    Ok(t.re()[0])
}

/// Coordinates to probe: all of them, or `limit` drawn without replacement.
fn probe_set(n: usize, limit: Option<usize>, seed: u64) -> Vec<usize> {
    match limit {
        Some(k) if k < n => sample(&mut ChaCha8Rng::seed_from_u64(seed), n, k).into_vec(),
        _ => (0..n).collect(),
    }
}

/// Checks `d f(x) / d x` for a scalar-valued `f` built on a fresh tape from
/// the input leaf. Both planes of each probed entry are perturbed by `h`.
pub fn check_input_grad(
    x: &ComplexTensor<f64>,
    h: f64,
    limit: Option<usize>,
    f: impl Fn(&mut Tape<f64>, Var) -> Result<Var>,
) -> Result<GradCheck> {
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let l = f(&mut tape, xv)?;
    let grads = tape.backward(l)?;
    let analytic = grads.get(xv).cloned().unwrap_or_else(|| ComplexTensor::zeros(x.shape()));
    let eval = |z: ComplexTensor<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.input(z);
        let l = f(&mut t, v)?;
        loss_value(&t, l)
    };
    let mut out = GradCheck {
        max_abs_err: 0.0,
        max_abs_grad: 0.0,
        probes: 0,
    };
    for i in probe_set(x.numel(), limit, 17) {
        for plane in 0..2 {
            let bump = |d: f64| {
                let mut z = x.clone();
                let (re, im) = z.planes_mut();
                if plane == 0 { re[i] += d } else { im[i] += d }
                z
            };
            let num = (eval(bump(h))? - eval(bump(-h))?) / (2.0 * h);
            let ana = if plane == 0 { analytic.re()[i] } else { analytic.im()[i] };
            out.max_abs_err = out.max_abs_err.max((ana - num).abs());
            out.max_abs_grad = out.max_abs_grad.max(num.abs());
            out.probes += 1;
        }
    }
    Ok(out)
}

/// Checks the gradients of every trainable parameter in `store` for the
/// scalar built by `f`, probing up to `limit` entries per parameter.
pub fn check_param_grads(
    store: &mut ParamStore<f64>,
    h: f64,
    limit: Option<usize>,
    f: impl Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
) -> Result<Vec<(String, GradCheck)>> {
    store.zero_grad();
    let mut tape = Tape::new();
    let l = f(&mut tape, store)?;
    let grads = tape.backward(l)?;
    tape.accumulate_param_grads(&grads, store);
    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let l = f(&mut t, s)?;
        loss_value(&t, l)
    };
    let ids: Vec<_> = store.iter().filter(|p| p.trainable).map(|p| (p.id, p.name.clone())).collect();
    let mut out = Vec::with_capacity(ids.len());
    for (k, (id, name)) in ids.into_iter().enumerate() {
        let base = store.value(id).clone();
        let analytic = store.grad(id).clone();
        let mut gc = GradCheck {
            max_abs_err: 0.0,
            max_abs_grad: 0.0,
            probes: 0,
        };
        for i in probe_set(base.numel(), limit, k as u64) {
            for plane in 0..2 {
                let mut vals = [0.0; 2];
                for (slot, d) in [h, -h].into_iter().enumerate() {
                    let mut z = base.clone();
                    let (re, im) = z.planes_mut();
                    if plane == 0 { re[i] += d } else { im[i] += d }
                    store.set_value(id, z)?;
                    vals[slot] = eval(store)?;
                }
                let num = (vals[0] - vals[1]) / (2.0 * h);
                let ana = if plane == 0 { analytic.re()[i] } else { analytic.im()[i] };
                gc.merge(GradCheck {
                    max_abs_err: (ana - num).abs(),
                    max_abs_grad: num.abs(),
                    probes: 1,
                });
            }
        }
        store.set_value(id, base)?;
        out.push((name, gc));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ctensor::{Activation, ConvGeom};
    use crate::models::{acc_on_tape, denoise_on_tape, recon_on_tape, AccTarget};

    const H: f64 = 1e-4;
    const TOL: f64 = 1e-3;

    fn rnd(shape: &[usize], seed: u64) -> ComplexTensor<f64> {
        ComplexTensor::randn(shape, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn target(shape: &[usize], seed: u64) -> Arc<ComplexTensor<f64>> {
        Arc::new(rnd(shape, seed ^ 0xabc))
    }

    fn assert_ok(what: &str, g: GradCheck) {
        assert!(g.probes > 0, "{}: nothing probed", what);
        assert!(g.rel_err() < TOL, "{}: rel err {:.3e} ({:?})", what, g.rel_err(), g);
    }

    /// Reduces any output to a scalar through the MSE against a fixed target.
    fn reduce(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
        let s = tape.value(y).shape().to_vec();
        tape.mse(y, target(&s, seed))
    }

    fn check_unary(what: &str, shape: &[usize], f: impl Fn(&mut Tape<f64>, Var) -> Result<Var>) {
        let x = rnd(shape, 1);
        let g = check_input_grad(&x, H, Some(60), |t, v| {
            let y = f(t, v)?;
            reduce(t, y, 2)
        })
        .unwrap();
        assert_ok(what, g);
    }

    /// Input gradient plus the gradients of the given parameters.
    fn check_with_params(
        what: &str,
        x: ComplexTensor<f64>,
        params: Vec<(&str, ComplexTensor<f64>)>,
        f: impl Fn(&mut Tape<f64>, Var, &[Var]) -> Result<Var>,
    ) {
        let mut store = ParamStore::new();
        let ids: Vec<_> = params.into_iter().map(|(n, v)| store.add(n, v)).collect();
        let xi = x.clone();
        let g = check_input_grad(&x, H, Some(40), |t, v| {
            let ps: Vec<Var> = ids.iter().map(|&id| t.param(&store, id)).collect();
            let y = f(t, v, &ps)?;
            reduce(t, y, 3)
        })
        .unwrap();
        assert_ok(&format!("{} input", what), g);
        let res = check_param_grads(&mut store, H, Some(40), |t, s| {
            let v = t.constant(xi.clone());
            let ps: Vec<Var> = ids.iter().map(|&id| t.param(s, id)).collect();
            let y = f(t, v, &ps)?;
            reduce(t, y, 3)
        })
        .unwrap();
        assert_eq!(res.len(), ids.len());
        for (name, g) in res {
            assert_ok(&format!("{} {}", what, name), g);
        }
    }

    #[test]
    fn linear() {
        check_with_params(
            "linear",
            rnd(&[3, 5], 4),
            vec![("w", rnd(&[4, 5], 5)), ("b", rnd(&[4], 6))],
            |t, x, p| t.linear(x, p[0], Some(p[1])),
        );
    }

    #[test]
    fn conv_same_and_strided() {
        for (geom, seed) in [(ConvGeom::same3(), 7), (ConvGeom::new([3, 3], [2, 2], [1, 1]), 8), (ConvGeom::new([1, 3], [1, 1], [0, 1]), 9)] {
            check_with_params(
                "conv",
                rnd(&[2, 2, 6, 6], seed),
                vec![("w", rnd(&[3, 2, geom.kernel[0], geom.kernel[1]], seed + 1)), ("b", rnd(&[3], seed + 2))],
                move |t, x, p| t.conv2d(x, p[0], Some(p[1]), geom),
            );
        }
    }

    #[test]
    fn conv_transpose() {
        let geom = ConvGeom::new([2, 2], [2, 2], [0, 0]);
        check_with_params(
            "conv_t",
            rnd(&[1, 3, 3, 4], 10),
            vec![("w", rnd(&[3, 2, 2, 2], 11)), ("b", rnd(&[2], 12))],
            move |t, x, p| t.conv_transpose2d(x, p[0], Some(p[1]), geom),
        );
        let geom = ConvGeom::new([3, 3], [1, 1], [1, 1]);
        check_with_params(
            "conv_t3",
            rnd(&[1, 2, 4, 4], 13),
            vec![("w", rnd(&[2, 2, 3, 3], 14))],
            move |t, x, p| t.conv_transpose2d(x, p[0], None, geom),
        );
    }

    #[test]
    fn activations() {
        for kind in [Activation::leaky(), Activation::Relu, Activation::Sigmoid] {
            check_unary(&format!("{:?}", kind), &[2, 7], |t, x| Ok(t.activation(x, kind)));
        }
    }

    #[test]
    fn group_norm() {
        for groups in [1, 2] {
            let c = 4;
            let gd = ComplexTensor::new(vec![1.2, 0.8, 1.0, 0.9], vec![0.7, 1.1, 1.3, 1.0], &[c]).unwrap();
            let go = ComplexTensor::new(vec![0.2, -0.1, 0.3, 0.05], vec![0.0; c], &[c]).unwrap();
            check_with_params(
                "group_norm",
                rnd(&[2, c, 3, 3], 15 + groups as u64),
                vec![("gd", gd), ("go", go), ("beta", rnd(&[c], 17))],
                move |t, x, p| t.group_norm(x, p[0], p[1], p[2], groups, 1e-5),
            );
        }
    }

    #[test]
    fn max_pool() {
        check_unary("max_pool", &[1, 2, 4, 6], |t, x| t.max_pool(x, [2, 2], [2, 2]));
        check_unary("max_pool_1d", &[1, 2, 1, 8], |t, x| t.max_pool(x, [1, 2], [1, 2]));
    }

    #[test]
    fn structural_ops() {
        check_unary("scale", &[3, 4], |t, x| Ok(t.scale(x, -2.5)));
        check_unary("transpose", &[2, 3, 5], |t, x| t.transpose_last2(x));
        check_unary("roll", &[2, 3, 5], |t, x| t.roll(x, 2, -2));
        check_unary("add_self", &[4], |t, x| {
            let y = t.scale(x, 3.0);
            t.add(x, y)
        });
        check_unary("concat", &[1, 2, 2, 3], |t, x| {
            let y = t.scale(x, 0.5);
            t.concat_channels(&[y, x, y])
        });
        let acquired = Arc::new(rnd(&[2, 3, 6], 20));
        let mask = Arc::new(vec![true, false, false, true, false, true]);
        check_unary("column_select", &[2, 3, 6], move |t, x| {
            t.column_select(x, Arc::clone(&acquired), Arc::clone(&mask))
        });
        check_unary("rss", &[1, 3, 4, 4], |t, x| t.rss(x));
    }

    #[test]
    fn modulus_gate() {
        let gate = rnd(&[1, 1, 3, 4], 21);
        check_with_params("gate", rnd(&[1, 3, 3, 4], 22), vec![("g", gate)], |t, x, p| t.modulus_gate(x, p[0]));
    }

    #[test]
    fn losses() {
        let shape = [1, 2, 4, 4];
        let tgt = target(&shape, 30);
        let x = rnd(&shape, 31);
        let t2 = Arc::clone(&tgt);
        assert_ok("mse", check_input_grad(&x, H, None, move |t, v| t.mse(v, Arc::clone(&t2))).unwrap());
        let t2 = Arc::clone(&tgt);
        assert_ok("l1", check_input_grad(&x, H, None, move |t, v| t.l1(v, Arc::clone(&t2))).unwrap());
        let t2 = Arc::clone(&tgt);
        assert_ok("recon", check_input_grad(&x, H, None, move |t, v| recon_on_tape(t, v, Arc::clone(&t2))).unwrap());
        let acc = AccTarget::new((*tgt).clone()).unwrap();
        assert_ok("acc", check_input_grad(&x, H, None, |t, v| acc_on_tape(t, v, &acc)).unwrap());
        let t2 = Arc::clone(&tgt);
        assert_ok("denoise", check_input_grad(&x, H, None, move |t, v| denoise_on_tape(t, v, Arc::clone(&t2))).unwrap());
    }

    #[test]
    fn detects_wrong_gradient() {
        // The target depends on the input but is recorded as a constant, so
        // the tape gradient is wrong.
        let x = rnd(&[5], 40);
        let g = check_input_grad(&x, H, None, |t, v| {
            let tg = Arc::new(t.value(v).scale(0.5));
            t.mse(v, tg)
        })
        .unwrap();
        assert!(g.rel_err() > TOL);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let x = rnd(&[3], 41);
        assert!(check_input_grad(&x, H, None, |_, v| Ok(v)).is_err());
    }
}
