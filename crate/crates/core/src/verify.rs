//! Self-contained oracle and property checks.
//!
//! Each check compares library kernels with independent scalar
//! implementations written here (direct DFT sums, sliding-window
//! convolutions, ...) and reports the worst discrepancy it saw against a
//! fixed tolerance.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aft::{aft_forward_1d, aft_forward_2d, AftBlock, AftConfig, AftMode, Direction, Normalization};
use crate::autodiff::{check_input_grad, check_param_grads, GradCheck, ParamStore, Tape, Var};
use crate::ctensor::{
    complex_conv2d, complex_conv_transpose2d, complex_group_norm, complex_linear, inv_sqrt_2x2, Activation,
    ComplexConvWeights, ComplexLinearWeights, ComplexTensor, ConvGeom, GroupNormParams, WhiteningMatrix,
};
use crate::error::Result;
use crate::kspace::{apply_mask, center_count, center_percent, data_consistency, equispaced_mask, phantom, target_count, CoilKSpace};
use crate::metrics::{gfc, nrmse, pcc, psnr, scc, ssim, RealImage};
use crate::models::{acc_on_tape, denoise_on_tape, model_forward, recon_on_tape, AccTarget, Model, ModelSpec, Variant};
use crate::scalar::Real;

pub const DFT_TOL_F32: f64 = 1e-4;
pub const DFT_TOL_F64: f64 = 1e-10;
pub const SEPARABILITY_TOL: f64 = 1e-5;
pub const ROUND_TRIP_TOL: f64 = 1e-4;
pub const PARSEVAL_TOL: f64 = 1e-5;
pub const OPERATOR_TOL: f64 = 1e-5;
pub const WHITENING_COV_TOL: f64 = 1e-3;
pub const INV_SQRT_TOL: f64 = 1e-6;
pub const GRAD_STEP: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-3;
pub const METRIC_TOL: f64 = 1e-9;

/// Outcome of one check: the worst measured value and the bound it must stay under.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<20} worst {:.3e} (limit {:.1e}) {:.2}s {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            self.seconds,
            self.detail
        )
    }
}

fn check(name: &'static str, tolerance: f64, f: impl FnOnce() -> Result<(f64, String)>) -> Check {
    let t0 = Instant::now();
    let (value, detail, passed) = match f() {
        Ok((v, d)) => (v, d, v < tolerance),
        Err(e) => (f64::NAN, format!("error: {}", e), false),
    };
    Check {
        name,
        value,
        tolerance,
        passed,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

pub type CheckFn = fn(u64) -> Check;

/// Every check with its name, in a stable order.
pub const ALL: [(&str, CheckFn); 10] = [
    ("dft-exactness", dft_exactness),
    ("separability", separability),
    ("round-trip", round_trip),
    ("parseval", parseval),
    ("operator-oracles", operator_oracles),
    ("whitening", whitening),
    ("gradients", gradients),
    ("mask-accounting", mask_accounting),
    ("data-consistency", data_consistency_check),
    ("metrics", metric_identities),
];

/// Runs the checks whose names contain `filter` (all when `None`).
pub fn run(filter: Option<&str>, seed: u64) -> Vec<Check> {
    ALL.iter()
        .filter(|(n, _)| filter.map_or(true, |f| n.contains(f)))
        .map(|(_, f)| f(seed))
        .collect()
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Direct `O(N^2)` DFT of each row, twiddles computed in f64.
fn naive_dft(rows: &[Vec<(f64, f64)>], dir: Direction, scale: f64) -> Vec<Vec<(f64, f64)>> {
    let sign = match dir {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let n = rows.first().map_or(0, |r| r.len());
    let twiddle: Vec<(f64, f64)> = (0..n)
        .map(|m| {
            let (s, c) = (sign * 2.0 * PI * m as f64 / n as f64).sin_cos();
            (c, s)
        })
        .collect();
    rows.iter()
        .map(|x| {
            (0..n)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (j, &(a, b)) in x.iter().enumerate() {
                        let (c, s) = twiddle[(k * j) % n];
                        re += a * c - b * s;
                        im += a * s + b * c;
                    }
                    (re * scale, im * scale)
                })
                .collect()
        })
        .collect()
}

fn rows_of<T: Real>(t: &ComplexTensor<T>) -> Vec<Vec<(f64, f64)>> {
    let n = t.last_dim();
    (0..t.numel() / n)
        .map(|r| (0..n).map(|i| (t.re()[r * n + i].f64(), t.im()[r * n + i].f64())).collect())
        .collect()
}

fn frozen_block<T: Real>(n: usize, dir: Direction, norm: Normalization) -> (ParamStore<T>, AftBlock) {
    let mut store = ParamStore::new();
    let cfg = AftConfig::exact(n, dir, AftMode::Frozen).with_normalization(norm);
    let block = AftBlock::new(&mut store, "aft", cfg, &mut ChaCha8Rng::seed_from_u64(0));
    (store, block)
}

/// Worst per-vector relative error `max|a - b| / max|b|`.
fn worst_rel(a: &[Vec<(f64, f64)>], b: &[Vec<(f64, f64)>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let den = y.iter().map(|v| v.0.hypot(v.1)).fold(0.0, f64::max);
            let num = x.iter().zip(y).map(|(p, q)| (p.0 - q.0).hypot(p.1 - q.1)).fold(0.0, f64::max);
            num / den
        })
        .fold(0.0, f64::max)
}

fn dft_rel_err<T: Real>(n: usize, count: usize, r: &mut ChaCha8Rng) -> Result<f64> {
    let x = ComplexTensor::<T>::randn(&[count, n], r);
    let (store, block) = frozen_block::<T>(n, Direction::Forward, Normalization::None);
    let got = aft_forward_1d(&block, &store, &x)?;
    Ok(worst_rel(&rows_of(&got), &naive_dft(&rows_of(&x), Direction::Forward, 1.0)))
}

/// Frozen exact-DFT blocks against the direct sum, 1000 vectors per size.
pub fn dft_exactness(seed: u64) -> Check {
    let mut f64_worst = 0.0;
    let c = check("dft-exactness", DFT_TOL_F32, || {
        let mut r = rng(seed, 1);
        let mut worst = 0.0f64;
        let mut parts = Vec::new();
        for n in [16, 64, 320] {
            let e32 = dft_rel_err::<f32>(n, 1000, &mut r)?;
            let e64 = dft_rel_err::<f64>(n, 1000, &mut r)?;
            worst = worst.max(e32);
            f64_worst = f64::max(f64_worst, e64);
            parts.push(format!("N={} f32 {:.1e} f64 {:.1e}", n, e32, e64));
        }
        Ok((worst, parts.join("; ")))
    });
    if f64_worst >= DFT_TOL_F64 {
        return Check {
            passed: false,
            detail: format!("{} (64-bit limit {:.0e} exceeded)", c.detail, DFT_TOL_F64),
            ..c
        };
    }
    c
}

/// Row-first and column-first frozen 2-D transforms agree.
pub fn separability(seed: u64) -> Check {
    check("separability", SEPARABILITY_TOL, || {
        let mut r = rng(seed, 2);
        let n = 64;
        let (store, block) = frozen_block::<f32>(n, Direction::Forward, Normalization::OneOverSqrtN);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x = ComplexTensor::<f32>::randn(&[n, n], &mut r);
            let rows_first = aft_forward_2d(&block, &block, &store, &x)?;
            let cols = aft_forward_1d(&block, &store, &x.transpose_last2())?.transpose_last2();
            let cols_first = aft_forward_1d(&block, &store, &cols)?;
            let scale = cols_first.max_abs().f64();
            worst = worst.max(rows_first.max_abs_diff(&cols_first).f64() / scale);
        }
        Ok((worst, "100 tensors 64x64, relative to max |X|".into()))
    })
}

/// Inverse after forward (frozen, 1/N on the inverse) is the identity.
pub fn round_trip(seed: u64) -> Check {
    check("round-trip", ROUND_TRIP_TOL, || {
        let mut r = rng(seed, 3);
        let mut worst = 0.0f64;
        for n in [8, 64, 320] {
            let (sf, f) = frozen_block::<f32>(n, Direction::Forward, Normalization::None);
            let (si, i) = frozen_block::<f32>(n, Direction::Inverse, Normalization::OneOverN);
            let x = ComplexTensor::<f32>::randn(&[100, n], &mut r);
            let back = aft_forward_1d(&i, &si, &aft_forward_1d(&f, &sf, &x)?)?;
            worst = worst.max(back.max_abs_diff(&x).f64() / x.max_abs().f64());
        }
        Ok((worst, "N in {8, 64, 320}, 32-bit".into()))
    })
}

/// Norm preservation of the frozen forward block with 1/sqrt(N).
pub fn parseval(seed: u64) -> Check {
    check("parseval", PARSEVAL_TOL, || {
        let mut r = rng(seed, 4);
        let mut worst = 0.0f64;
        for n in [16, 64, 320] {
            let (s, b) = frozen_block::<f32>(n, Direction::Forward, Normalization::OneOverSqrtN);
            for _ in 0..20 {
                let x = ComplexTensor::<f32>::randn(&[1, n], &mut r);
                let y = aft_forward_1d(&b, &s, &x)?;
                let (nx, ny) = (x.norm().f64(), y.norm().f64());
                worst = worst.max((ny - nx).abs() / nx);
            }
        }
        Ok((worst, "relative norm change".into()))
    })
}

type C = (f64, f64);

fn cmul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn at(t: &ComplexTensor<f32>, i: usize) -> C {
    (t.re()[i] as f64, t.im()[i] as f64)
}

fn max_diff(got: &ComplexTensor<f32>, want: &[C]) -> f64 {
    want.iter()
        .enumerate()
        .map(|(i, w)| {
            let g = at(got, i);
            (g.0 - w.0).abs().max((g.1 - w.1).abs())
        })
        .fold(0.0, f64::max)
}

fn naive_linear(x: &ComplexTensor<f32>, w: &ComplexTensor<f32>, b: &ComplexTensor<f32>) -> Vec<C> {
    let (o, n) = (w.shape()[0], w.shape()[1]);
    let rows = x.numel() / n;
    let mut out = Vec::with_capacity(rows * o);
    for r in 0..rows {
        for k in 0..o {
            let mut acc = at(b, k);
            for j in 0..n {
                let p = cmul(at(w, k * n + j), at(x, r * n + j));
                acc = (acc.0 + p.0, acc.1 + p.1);
            }
            out.push(acc);
        }
    }
    out
}

fn naive_conv(x: &ComplexTensor<f32>, k: &ComplexTensor<f32>, g: &ConvGeom) -> Vec<C> {
    let s = x.shape();
    let (b, ci, h, w) = (s[0], s[1], s[2], s[3]);
    let co = k.shape()[0];
    let [kh, kw] = g.kernel;
    let oh = (h + 2 * g.padding[0] - kh) / g.stride[0] + 1;
    let ow = (w + 2 * g.padding[1] - kw) / g.stride[1] + 1;
    let mut out = vec![(0.0, 0.0); b * co * oh * ow];
    for bi in 0..b {
        for o in 0..co {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = (0.0, 0.0);
                    for c in 0..ci {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let iy = (y * g.stride[0] + dy) as isize - g.padding[0] as isize;
                                let ix = (xo * g.stride[1] + dx) as isize - g.padding[1] as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xi = ((bi * ci + c) * h + iy as usize) * w + ix as usize;
                                let ki = ((o * ci + c) * kh + dy) * kw + dx;
                                let p = cmul(at(k, ki), at(x, xi));
                                acc = (acc.0 + p.0, acc.1 + p.1);
                            }
                        }
                    }
                    out[((bi * co + o) * oh + y) * ow + xo] = acc;
                }
            }
        }
    }
    out
}

/// Scatter form of the transposed convolution, kernel `[in, out, kh, kw]`.
fn naive_conv_t(x: &ComplexTensor<f32>, k: &ComplexTensor<f32>, g: &ConvGeom) -> Vec<C> {
    let s = x.shape();
    let (b, ci, h, w) = (s[0], s[1], s[2], s[3]);
    let co = k.shape()[1];
    let [kh, kw] = g.kernel;
    let fh = (h - 1) * g.stride[0] + kh;
    let fw = (w - 1) * g.stride[1] + kw;
    let (oh, ow) = (fh - 2 * g.padding[0], fw - 2 * g.padding[1]);
    let mut out = vec![(0.0, 0.0); b * co * oh * ow];
    for bi in 0..b {
        for c in 0..ci {
            for y in 0..h {
                for xx in 0..w {
                    let v = at(x, ((bi * ci + c) * h + y) * w + xx);
                    for o in 0..co {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let oy = (y * g.stride[0] + dy) as isize - g.padding[0] as isize;
                                let ox = (xx * g.stride[1] + dx) as isize - g.padding[1] as isize;
                                if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                    continue;
                                }
                                let p = cmul(at(k, ((c * co + o) * kh + dy) * kw + dx), v);
                                let slot = &mut out[((bi * co + o) * oh + oy as usize) * ow + ox as usize];
                                *slot = (slot.0 + p.0, slot.1 + p.1);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Linear, convolution and transposed convolution against scalar complex
/// arithmetic on 100 random small shapes each.
pub fn operator_oracles(seed: u64) -> Check {
    check("operator-oracles", OPERATOR_TOL, || {
        let mut r = rng(seed, 5);
        let (mut wl, mut wc, mut wt) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let (rows, n, o) = (r.gen_range(1..4), r.gen_range(1..9), r.gen_range(1..9));
            let x = ComplexTensor::<f32>::randn(&[rows, n], &mut r);
            let w = ComplexTensor::<f32>::randn(&[o, n], &mut r);
            let b = ComplexTensor::<f32>::randn(&[o], &mut r);
            let got = complex_linear(&x, &ComplexLinearWeights::new(w.clone(), Some(b.clone()))?)?;
            wl = wl.max(max_diff(&got, &naive_linear(&x, &w, &b)));

            let (bsz, ci, co) = (r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..4));
            let (h, wd) = (r.gen_range(3..8), r.gen_range(3..8));
            let k = r.gen_range(1..4);
            let stride = [r.gen_range(1..3), r.gen_range(1..3)];
            let pad = [r.gen_range(0..k), r.gen_range(0..k)];
            let x = ComplexTensor::<f32>::randn(&[bsz, ci, h, wd], &mut r);
            let kern = ComplexTensor::<f32>::randn(&[co, ci, k, k], &mut r);
            let cw = ComplexConvWeights::new(kern.clone(), None, stride, pad)?;
            wc = wc.max(max_diff(&complex_conv2d(&x, &cw)?, &naive_conv(&x, &kern, &cw.geom())));

            let kern_t = ComplexTensor::<f32>::randn(&[ci, co, k, k], &mut r);
            let pad_t = [r.gen_range(0..=(k - 1) / 2), r.gen_range(0..=(k - 1) / 2)];
            let tw = ComplexConvWeights::new(kern_t.clone(), None, stride, pad_t)?;
            wt = wt.max(max_diff(&complex_conv_transpose2d(&x, &tw)?, &naive_conv_t(&x, &kern_t, &tw.geom())));
        }
        Ok((wl.max(wc).max(wt), format!("linear {:.1e}, conv {:.1e}, conv-transpose {:.1e}", wl, wc, wt)))
    })
}

/// Group norm with identity affine whitens each group; the 2x2 inverse
/// square root inverts the covariance.
pub fn whitening(seed: u64) -> Check {
    let mut inv_worst = 0.0f64;
    let c = check("whitening", WHITENING_COV_TOL, || {
        let mut r = rng(seed, 6);
        let (b, ch, h, w) = (2, 8, 16, 16);
        let mut worst = 0.0f64;
        for groups in [1, 2, 4] {
            // Correlated, shifted, anisotropic input.
            let base = ComplexTensor::<f64>::randn(&[b, ch, h, w], &mut r);
            let x = ComplexTensor::from_fn(&[b, ch, h, w], |i| {
                let (a, bb) = base.get(i);
                (3.0 * a + 1.5, 0.8 * a + 0.5 * bb - 2.0)
            });
            let y = complex_group_norm(&x, &GroupNormParams::identity(ch, groups, 1e-5)?)?;
            let per = ch / groups * h * w;
            for bi in 0..b {
                for g in 0..groups {
                    let off = (bi * groups + g) * per;
                    let (re, im) = (&y.re()[off..off + per], &y.im()[off..off + per]);
                    let n = per as f64;
                    let mr = re.iter().sum::<f64>() / n;
                    let mi = im.iter().sum::<f64>() / n;
                    let vrr = re.iter().map(|v| (v - mr) * (v - mr)).sum::<f64>() / n;
                    let vii = im.iter().map(|v| (v - mi) * (v - mi)).sum::<f64>() / n;
                    let vri = re.iter().zip(im).map(|(a, c)| (a - mr) * (c - mi)).sum::<f64>() / n;
                    for e in [vrr - 1.0, vii - 1.0, vri, mr, mi] {
                        worst = worst.max(e.abs());
                    }
                }
            }
        }
        for _ in 0..1000 {
            let a: f64 = r.gen_range(0.01..10.0);
            let d: f64 = r.gen_range(0.01..10.0);
            let lim = (a * d).sqrt() * 0.99;
            let c: f64 = r.gen_range(-lim..lim);
            let m = inv_sqrt_2x2(&WhiteningMatrix::new(a, c, c, d))?;
            let v = [[a, c], [c, d]];
            let mul = |p: [[f64; 2]; 2], q: [[f64; 2]; 2]| {
                let mut o = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        o[i][j] = p[i][0] * q[0][j] + p[i][1] * q[1][j];
                    }
                }
                o
            };
            let e = mul(mul(m, m), v);
            for (i, row) in e.iter().enumerate() {
                for (j, x) in row.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    inv_worst = inv_worst.max((x - want).abs());
                }
            }
        }
        Ok((worst, format!("inv_sqrt_2x2 residual {:.1e} over 1000 SPD draws", inv_worst)))
    });
    if inv_worst >= INV_SQRT_TOL {
        return Check {
            passed: false,
            ..c
        };
    }
    c
}

/// Per-operator and per-loss finite-difference results.
pub fn gradient_suite(seed: u64) -> Result<Vec<(String, GradCheck)>> {
    let mut r = rng(seed, 7);
    let mut rnd = |s: &[usize]| ComplexTensor::<f64>::randn(s, &mut r);
    let mut out = Vec::new();

    let reduce = |t: &mut Tape<f64>, y: Var, tgt: &Arc<ComplexTensor<f64>>| -> Result<Var> { t.mse(y, Arc::clone(tgt)) };

    let mut unary = |name: &str, x: ComplexTensor<f64>, tgt: ComplexTensor<f64>, f: &dyn Fn(&mut Tape<f64>, Var) -> Result<Var>| -> Result<()> {
        let tgt = Arc::new(tgt);
        let g = check_input_grad(&x, GRAD_STEP, Some(48), |t, v| {
            let y = f(t, v)?;
            reduce(t, y, &tgt)
        })?;
        out.push((name.to_string(), g));
        Ok(())
    };

    unary("leaky_relu", rnd(&[2, 8]), rnd(&[2, 8]), &|t, x| Ok(t.activation(x, Activation::leaky())))?;
    unary("relu", rnd(&[2, 8]), rnd(&[2, 8]), &|t, x| Ok(t.activation(x, Activation::Relu)))?;
    unary("sigmoid", rnd(&[2, 8]), rnd(&[2, 8]), &|t, x| Ok(t.activation(x, Activation::Sigmoid)))?;
    unary("max_pool", rnd(&[1, 2, 4, 6]), rnd(&[1, 2, 2, 3]), &|t, x| t.max_pool(x, [2, 2], [2, 2]))?;
    unary("scale", rnd(&[3, 4]), rnd(&[3, 4]), &|t, x| Ok(t.scale(x, -1.7)))?;
    unary("add", rnd(&[6]), rnd(&[6]), &|t, x| {
        let y = t.scale(x, 2.0);
        t.add(x, y)
    })?;
    unary("concat", rnd(&[1, 2, 2, 3]), rnd(&[1, 4, 2, 3]), &|t, x| {
        let y = t.scale(x, 0.5);
        t.concat_channels(&[x, y])
    })?;
    unary("transpose", rnd(&[2, 3, 5]), rnd(&[2, 5, 3]), &|t, x| t.transpose_last2(x))?;
    unary("roll", rnd(&[2, 7]), rnd(&[2, 7]), &|t, x| t.roll(x, 1, 3))?;
    let acq = Arc::new(rnd(&[1, 2, 3, 6]));
    let mask = Arc::new(vec![true, false, true, false, false, true]);
    unary("column_select", rnd(&[1, 2, 3, 6]), rnd(&[1, 2, 3, 6]), &|t, x| {
        t.column_select(x, Arc::clone(&acq), Arc::clone(&mask))
    })?;
    unary("rss", rnd(&[1, 3, 4, 4]), rnd(&[1, 4, 4]), &|t, x| t.rss(x))?;

    let ltgt = Arc::new(rnd(&[1, 2, 4, 4]));
    let lx = rnd(&[1, 2, 4, 4]);
    let acc = AccTarget::new((*ltgt).clone())?;
    let losses: [(&str, &dyn Fn(&mut Tape<f64>, Var) -> Result<Var>); 3] = [
        ("loss_recon", &|t, v| recon_on_tape(t, v, Arc::clone(&ltgt))),
        ("loss_acc", &|t, v| acc_on_tape(t, v, &acc)),
        ("loss_denoise", &|t, v| denoise_on_tape(t, v, Arc::clone(&ltgt))),
    ];
    for (name, f) in losses {
        out.push((name.to_string(), check_input_grad(&lx, GRAD_STEP, None, f)?));
    }

    // Operators with parameters: input and every parameter.
    type Build = Box<dyn Fn(&mut Tape<f64>, Var, &[Var]) -> Result<Var>>;
    let ch = 4;
    let gd = ComplexTensor::from_fn(&[ch], |i| (1.0 + 0.1 * i as f64, 0.9 - 0.05 * i as f64));
    let go = ComplexTensor::from_fn(&[ch], |i| (0.1 * i as f64 - 0.15, 0.0));
    let cases: Vec<(&str, ComplexTensor<f64>, Vec<ComplexTensor<f64>>, Build)> = vec![
        ("linear", rnd(&[3, 5]), vec![rnd(&[4, 5]), rnd(&[4])], Box::new(|t, x, p| t.linear(x, p[0], Some(p[1])))),
        (
            "conv2d",
            rnd(&[2, 2, 5, 5]),
            vec![rnd(&[3, 2, 3, 3]), rnd(&[3])],
            Box::new(|t, x, p| t.conv2d(x, p[0], Some(p[1]), ConvGeom::new([3, 3], [2, 2], [1, 1]))),
        ),
        (
            "conv_transpose2d",
            rnd(&[1, 3, 3, 4]),
            vec![rnd(&[3, 2, 2, 2]), rnd(&[2])],
            Box::new(|t, x, p| t.conv_transpose2d(x, p[0], Some(p[1]), ConvGeom::new([2, 2], [2, 2], [0, 0]))),
        ),
        (
            "group_norm",
            rnd(&[2, ch, 3, 3]),
            vec![gd, go, rnd(&[ch])],
            Box::new(|t, x, p| t.group_norm(x, p[0], p[1], p[2], 2, 1e-5)),
        ),
        ("modulus_gate", rnd(&[1, 3, 3, 4]), vec![rnd(&[1, 1, 3, 4])], Box::new(|t, x, p| t.modulus_gate(x, p[0]))),
    ];
    for (name, x, params, f) in cases {
        let mut store = ParamStore::new();
        let ids: Vec<_> = params.into_iter().enumerate().map(|(i, v)| store.add(format!("p{}", i), v)).collect();
        let y0 = {
            let mut t = Tape::new();
            let v = t.constant(x.clone());
            let ps: Vec<Var> = ids.iter().map(|&id| t.param(&store, id)).collect();
            let y = f(&mut t, v, &ps)?;
            t.value(y).shape().to_vec()
        };
        let tgt = Arc::new(rnd(&y0));
        let g = check_input_grad(&x, GRAD_STEP, Some(40), |t, v| {
            let ps: Vec<Var> = ids.iter().map(|&id| t.param(&store, id)).collect();
            let y = f(t, v, &ps)?;
            reduce(t, y, &tgt)
        })?;
        out.push((format!("{} input", name), g));
        let res = check_param_grads(&mut store, GRAD_STEP, Some(40), |t, s| {
            let v = t.constant(x.clone());
            let ps: Vec<Var> = ids.iter().map(|&id| t.param(s, id)).collect();
            let y = f(t, v, &ps)?;
            reduce(t, y, &tgt)
        })?;
        for (pn, g) in res {
            out.push((format!("{} {}", name, pn), g));
        }
    }
    Ok(out)
}

pub fn gradients(seed: u64) -> Check {
    check("gradients", GRAD_TOL, || {
        let res = gradient_suite(seed)?;
        let (worst_name, worst) = res
            .iter()
            .map(|(n, g)| (n.clone(), g.rel_err()))
            .fold((String::new(), 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
        Ok((worst, format!("{} checks, worst {}", res.len(), worst_name)))
    })
}

/// Centre block size and total column count of equispaced masks.
pub fn mask_accounting(seed: u64) -> Check {
    check("mask-accounting", 0.0, || {
        let mut worst = 0.0f64;
        for w in [272usize, 320, 392] {
            for a in [2u32, 4, 8] {
                let m = equispaced_mask(w, a, seed)?;
                let want_centre = center_count(w, center_percent(a)?);
                let centre = m.center_range();
                let mut miss = (centre.len() as f64 - want_centre as f64).abs();
                if !m.columns[centre].iter().all(|&c| c) {
                    miss = f64::INFINITY;
                }
                worst = worst.max(miss).max((m.num_sampled() as f64 - target_count(w, a) as f64).abs());
            }
        }
        Ok((worst, "centre block and sampled count vs round(cf W), round(W / a)".into()))
    })
    .with_zero_ok()
}

/// DC is idempotent and acquired columns survive the model bit for bit.
pub fn data_consistency_check(seed: u64) -> Check {
    check("data-consistency", 1e-300, || {
        let p = phantom(32, 32, 2, seed)?;
        let mask = equispaced_mask(32, 4, seed)?;
        let acquired = apply_mask(&p.kspace, &mask)?;
        let pred = ComplexTensor::<f64>::randn(&[2, 32, 32], &mut rng(seed, 9));
        let once = data_consistency(&pred, &acquired.data, &mask)?;
        let twice = data_consistency(&once, &acquired.data, &mask)?;
        let idem = once.max_abs_diff(&twice);
        let mut worst = idem;
        for variant in Variant::ALL {
            let spec = ModelSpec {
                widths: vec![4, 8],
                ..ModelSpec::mri(variant, 2, 32, 32)
            };
            let model = Model::<f32>::new(spec)?;
            let k32 = CoilKSpace::new(p.kspace.data.cast::<f32>())?;
            let acq32 = apply_mask(&k32, &mask)?;
            let (_, kp) = model_forward(&model, &k32, &mask)?;
            let (h, w) = (32, 32);
            for c in 0..2 {
                for y in 0..h {
                    for x in 0..w {
                        if mask.columns[x] {
                            let i = (c * h + y) * w + x;
                            if kp.get(i).0.to_bits() != acq32.data.get(i).0.to_bits()
                                || kp.get(i).1.to_bits() != acq32.data.get(i).1.to_bits()
                            {
                                worst = f64::INFINITY;
                            }
                        }
                    }
                }
            }
        }
        Ok((worst, "idempotence residual and bitwise column preservation, all variants".into()))
    })
    .with_zero_ok()
}

impl Check {
    /// For checks whose measured value must be exactly zero.
    fn with_zero_ok(mut self) -> Self {
        self.passed = self.value == 0.0;
        self.tolerance = 0.0;
        self
    }
}

/// Closed-form cases and invariances of the quality metrics.
pub fn metric_identities(seed: u64) -> Check {
    check("metrics", METRIC_TOL, || {
        let mut r = rng(seed, 10);
        let mut worst = 0.0f64;
        let mut note = |v: f64| worst = worst.max(v);
        for _ in 0..20 {
            let y: Vec<f64> = (0..64).map(|_| r.gen_range(-1.0..1.0)).collect();
            let p: Vec<f64> = y.iter().map(|v| v + r.gen_range(-0.3..0.3)).collect();
            let c = r.gen_range(0.1..5.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            let yc: Vec<f64> = y.iter().map(|v| c * v).collect();
            note((gfc(&yc, &p)? - gfc(&y, &p)?).abs());
            note((gfc(&y, &p)? - gfc(&p, &y)?).abs());
            note((gfc(&y, &y)? - 1.0).abs());
            let affine: Vec<f64> = y.iter().map(|v| 2.0 * v + 3.0).collect();
            note((pcc(&y, &affine)? - 1.0).abs());
            note((scc(&y, &affine)? - 1.0).abs());
            let cubic: Vec<f64> = y.iter().map(|v| v * v * v + v).collect();
            note((scc(&y, &cubic)? - 1.0).abs());
            if pcc(&y, &cubic)? >= 1.0 - 1e-12 {
                note(f64::INFINITY);
            }
            let twice: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
            note((nrmse(&twice, &y)? - 1.0).abs());
            note(nrmse(&y, &y)?);
        }
        let y = vec![0.5; 100];
        let x: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        note((psnr(&x, &y, 1.0)? - 20.0).abs());
        let img = RealImage::new((0..32 * 32).map(|_| r.gen_range(0.0..1.0)).collect(), 32, 32)?;
        note((ssim(&img, &img)? - 1.0).abs());
        Ok((worst, "gfc/pcc/scc/nrmse/psnr/ssim identities".into()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for c in run(None, 7) {
            assert!(c.passed, "{}", c);
        }
    }

    #[test]
    fn gradient_suite_covers_all_ops() {
        let names: Vec<String> = gradient_suite(1).unwrap().into_iter().map(|(n, _)| n).collect();
        for op in [
            "linear input", "conv2d p0", "conv_transpose2d p1", "group_norm p2", "modulus_gate p0", "leaky_relu",
            "sigmoid", "max_pool", "rss", "column_select", "loss_recon", "loss_acc", "loss_denoise",
        ] {
            assert!(names.iter().any(|n| n == op), "missing {}", op);
        }
    }

    #[test]
    fn filter_selects_by_name() {
        let c = run(Some("parseval"), 0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].name, "parseval");
    }

    #[test]
    fn failing_value_reports_fail() {
        let c = check("x", 1.0, || Ok((2.0, String::new())));
        assert!(!c.passed);
        assert!(c.to_string().starts_with("FAIL"));
    }
}
