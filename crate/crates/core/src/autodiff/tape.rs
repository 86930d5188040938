//! Reverse-mode tape over the complex operators.
//!
//! Every node stores its forward value. Gradients are real-pair gradients:
//! for a real loss `L` and complex entry `z`, the gradient entry is
//! `dL/d re(z) + i dL/d im(z)`.

use std::sync::Arc;

use crate::autodiff::params::{ParamId, ParamStore};
use crate::ctensor::{
    activation_backward, complex_activation, complex_max_pool2d, conv2d_backward, conv2d_forward,
    conv_transpose2d_backward, conv_transpose2d_forward, group_norm_backward, group_norm_forward,
    linear_backward_bias, linear_backward_input, linear_backward_weight, linear_forward,
    max_pool_backward, Activation, ComplexTensor, ConvGeom, GroupNormCache,
};
use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Param(ParamId),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    ConvT {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    Act {
        x: Var,
        kind: Activation,
    },
    GroupNorm {
        x: Var,
        gamma_diag: Var,
        gamma_off: Var,
        beta: Var,
        groups: usize,
        eps: f64,
        cache: GroupNormCache<T>,
    },
    MaxPool {
        x: Var,
        window: [usize; 2],
        stride: [usize; 2],
        indices: Vec<usize>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        s: T,
    },
    Concat {
        parts: Vec<Var>,
    },
    Transpose {
        x: Var,
    },
    Roll {
        x: Var,
        axis: usize,
        shift: isize,
    },
    ModulusGate {
        x: Var,
        gate: Var,
    },
    ColumnSelect {
        pred: Var,
        acquired: Arc<ComplexTensor<T>>,
        mask: Arc<Vec<bool>>,
    },
    Rss {
        x: Var,
    },
    Mse {
        x: Var,
        target: Arc<ComplexTensor<T>>,
    },
    L1 {
        x: Var,
        target: Arc<ComplexTensor<T>>,
    },
}

struct Node<T> {
    value: Arc<ComplexTensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Ordered record of a forward computation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<ComplexTensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&ComplexTensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &ComplexTensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: ComplexTensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, value: ComplexTensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn constant_arc(&mut self, value: Arc<ComplexTensor<T>>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input leaf whose gradient is wanted.
    pub fn input(&mut self, value: ComplexTensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a parameter; frozen parameters behave as constants.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let trainable = store.is_trainable(id);
        self.nodes.push(Node {
            value: store.value_arc(id),
            op: Op::Param(id),
            requires_grad: trainable,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = linear_forward(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        Ok(self.push(y, Op::Linear { x, w, b }, rg))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeom) -> Result<Var> {
        let ks = self.value(w).shape();
        if ks.len() != 4 || ks[2] != geom.kernel[0] || ks[3] != geom.kernel[1] {
            return dim_err(format!("kernel shape {:?} does not match geometry {:?}", ks, geom));
        }
        let y = conv2d_forward(self.value(x), self.value(w), b.map(|b| self.value(b)), &geom)?;
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        Ok(self.push(y, Op::Conv { x, w, b, geom }, rg))
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeom) -> Result<Var> {
        let y = conv_transpose2d_forward(self.value(x), self.value(w), b.map(|b| self.value(b)), &geom)?;
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        Ok(self.push(y, Op::ConvT { x, w, b, geom }, rg))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        if kind == Activation::Identity {
            return x;
        }
        let y = complex_activation(self.value(x), kind);
        let rg = self.rg(&[x]);
        self.push(y, Op::Act { x, kind }, rg)
    }

    pub fn group_norm(
        &mut self,
        x: Var,
        gamma_diag: Var,
        gamma_off: Var,
        beta: Var,
        groups: usize,
        eps: f64,
    ) -> Result<Var> {
        let (y, cache) = group_norm_forward(
            self.value(x),
            self.value(gamma_diag),
            self.value(gamma_off),
            self.value(beta),
            groups,
            eps,
        )?;
        let rg = self.rg(&[x, gamma_diag, gamma_off, beta]);
        Ok(self.push(
            y,
            Op::GroupNorm {
                x,
                gamma_diag,
                gamma_off,
                beta,
                groups,
                eps,
                cache,
            },
            rg,
        ))
    }

    pub fn max_pool(&mut self, x: Var, window: [usize; 2], stride: [usize; 2]) -> Result<Var> {
        let (y, indices) = complex_max_pool2d(self.value(x), window, stride)?;
        let rg = self.rg(&[x]);
        Ok(self.push(
            y,
            Op::MaxPool {
                x,
                window,
                stride,
                indices,
            },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).add(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(y, Op::Add { a, b }, rg))
    }

    /// Multiplies both planes by the real constant `s`.
    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let s = T::of(s);
        let y = self.value(x).scale(s);
        let rg = self.rg(&[x]);
        self.push(y, Op::Scale { x, s }, rg)
    }

    /// Concatenation along axis 1 of 4-D tensors.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let y = concat_channels(&parts.iter().map(|&p| self.value(p)).collect::<Vec<_>>())?;
        let rg = self.rg(parts);
        Ok(self.push(y, Op::Concat { parts: parts.to_vec() }, rg))
    }

    pub fn transpose_last2(&mut self, x: Var) -> Result<Var> {
        if self.value(x).ndim() < 2 {
            return dim_err("transpose needs at least two dims");
        }
        let y = self.value(x).transpose_last2();
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Transpose { x }, rg))
    }

    pub fn roll(&mut self, x: Var, axis: usize, shift: isize) -> Result<Var> {
        if axis >= self.value(x).ndim() {
            return dim_err(format!("roll axis {} out of range", axis));
        }
        let y = self.value(x).roll(axis, shift);
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Roll { x, axis, shift }, rg))
    }

    /// Scales both planes of `x` `[B, C, H, W]` by the modulus of `gate`
    /// `[B, 1, H, W]`, broadcast over channels.
    pub fn modulus_gate(&mut self, x: Var, gate: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let gs = self.value(gate).shape().to_vec();
        if xs.len() != 4 || gs.len() != 4 || gs[1] != 1 || xs[0] != gs[0] || xs[2..] != gs[2..] {
            return dim_err(format!("gate shape {:?} incompatible with {:?}", gs, xs));
        }
        let g = self.value(gate).abs();
        let xv = self.value(x);
        let (b, c, hw) = (xs[0], xs[1], xs[2] * xs[3]);
        let y = ComplexTensor::from_fn(&xs, |i| {
            let bi = i / (c * hw);
            let p = i % hw;
            let m = g[bi * hw + p];
            let (a, bb) = xv.get(i);
            (a * m, bb * m)
        });
        let _ = b;
        let rg = self.rg(&[x, gate]);
        Ok(self.push(y, Op::ModulusGate { x, gate }, rg))
    }

    /// Replaces the trailing-axis columns flagged in `mask` with `acquired`.
    pub fn column_select(
        &mut self,
        pred: Var,
        acquired: Arc<ComplexTensor<T>>,
        mask: Arc<Vec<bool>>,
    ) -> Result<Var> {
        let y = select_columns(self.value(pred), &acquired, &mask)?;
        let rg = self.rg(&[pred]);
        Ok(self.push(y, Op::ColumnSelect { pred, acquired, mask }, rg))
    }

    /// Root-sum-of-squares over axis 1 of `[B, C, H, W]`; the result is
    /// `[B, H, W]` with a zero imaginary plane.
    pub fn rss(&mut self, x: Var) -> Result<Var> {
        let y = rss_channels(self.value(x))?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Rss { x }, rg))
    }

    /// `mean((re x - re t)^2) + mean((im x - im t)^2)`.
    pub fn mse(&mut self, x: Var, target: Arc<ComplexTensor<T>>) -> Result<Var> {
        let y = mse_value(self.value(x), &target)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Mse { x, target }, rg))
    }

    /// `mean(|re x - re t|) + mean(|im x - im t|)`.
    pub fn l1(&mut self, x: Var, target: Arc<ComplexTensor<T>>) -> Result<Var> {
        let y = l1_value(self.value(x), &target)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::L1 { x, target }, rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let node = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| Error::Usage("loss variable is not on this tape".into()))?;
        if node.value.numel() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                node.value.shape()
            )));
        }
        if matches!(node.op, Op::Leaf | Op::Param(_)) {
            return Err(Error::Usage("no loss has been recorded on this tape".into()));
        }
        let mut grads: Vec<Option<ComplexTensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(ComplexTensor::from_real(vec![T::one()], node.value.shape())?);
        for i in (0..=loss.0).rev() {
            let n = &self.nodes[i];
            if !n.requires_grad || matches!(n.op, Op::Leaf | Op::Param(_)) {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop_node(n, &g, &mut grads);
            // keep the gradient of the loss itself inspectable
            if i == loss.0 {
                grads[i] = Some(g);
            }
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, n: &Node<T>, g: &ComplexTensor<T>, grads: &mut [Option<ComplexTensor<T>>]) {
        let need = |v: Var| self.nodes[v.0].requires_grad;
        match &n.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Linear { x, w, b } => {
                let wv = self.value(*w);
                if need(*x) {
                    let gx = linear_backward_input(g, wv, self.value(*x).shape());
                    accumulate(grads, *x, gx);
                }
                if need(*w) {
                    let gw = linear_backward_weight(g, self.value(*x), wv.shape()[0], wv.shape()[1]);
                    accumulate(grads, *w, gw);
                }
                if let Some(b) = b {
                    if need(*b) {
                        accumulate(grads, *b, linear_backward_bias(g, wv.shape()[0]));
                    }
                }
            }
            Op::Conv { x, w, b, geom } => {
                let r = conv2d_backward(
                    g,
                    self.value(*x),
                    self.value(*w),
                    geom,
                    need(*x),
                    need(*w),
                    b.map_or(false, |b| need(b)),
                );
                if let Some(gx) = r.input {
                    accumulate(grads, *x, gx);
                }
                if let Some(gk) = r.kernel {
                    accumulate(grads, *w, gk);
                }
                if let (Some(b), Some(gb)) = (b, r.bias) {
                    accumulate(grads, *b, gb);
                }
            }
            Op::ConvT { x, w, b, geom } => {
                let r = conv_transpose2d_backward(
                    g,
                    self.value(*x),
                    self.value(*w),
                    geom,
                    need(*x),
                    need(*w),
                    b.map_or(false, |b| need(b)),
                );
                if let Some(gx) = r.input {
                    accumulate(grads, *x, gx);
                }
                if let Some(gk) = r.kernel {
                    accumulate(grads, *w, gk);
                }
                if let (Some(b), Some(gb)) = (b, r.bias) {
                    accumulate(grads, *b, gb);
                }
            }
            Op::Act { x, kind } => {
                let gx = activation_backward(g, self.value(*x), &n.value, *kind);
                accumulate(grads, *x, gx);
            }
            Op::GroupNorm {
                x,
                gamma_diag,
                gamma_off,
                beta,
                groups,
                cache,
                ..
            } => {
                let r = group_norm_backward(g, cache, self.value(*gamma_diag), self.value(*gamma_off), *groups);
                if need(*x) {
                    accumulate(grads, *x, r.input);
                }
                if need(*gamma_diag) {
                    accumulate(grads, *gamma_diag, r.gamma_diag);
                }
                if need(*gamma_off) {
                    accumulate(grads, *gamma_off, r.gamma_off);
                }
                if need(*beta) {
                    accumulate(grads, *beta, r.beta);
                }
            }
            Op::MaxPool { x, indices, .. } => {
                let gx = max_pool_backward(g, indices, self.value(*x).shape());
                accumulate(grads, *x, gx);
            }
            Op::Scale { x, s } => accumulate(grads, *x, g.scale(*s)),
            Op::Add { a, b } => {
                if need(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if need(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::Concat { parts } => {
                let s = g.shape();
                let (bsz, hw) = (s[0], s[2] * s[3]);
                let ctot = s[1];
                let mut off = 0;
                for p in parts {
                    let ps = self.value(*p).shape().to_vec();
                    let c = ps[1];
                    if need(*p) {
                        let mut gp = ComplexTensor::zeros(&ps);
                        let (pr, pi) = gp.planes_mut();
                        for bi in 0..bsz {
                            let src = (bi * ctot + off) * hw;
                            let dst = bi * c * hw;
                            pr[dst..dst + c * hw].copy_from_slice(&g.re()[src..src + c * hw]);
                            pi[dst..dst + c * hw].copy_from_slice(&g.im()[src..src + c * hw]);
                        }
                        accumulate(grads, *p, gp);
                    }
                    off += c;
                }
            }
            Op::Transpose { x } => accumulate(grads, *x, g.transpose_last2()),
            Op::Roll { x, axis, shift } => accumulate(grads, *x, g.roll(*axis, -*shift)),
            Op::ModulusGate { x, gate } => {
                let xv = self.value(*x);
                let gv = self.value(*gate);
                let xs = xv.shape();
                let (bsz, c, hw) = (xs[0], xs[1], xs[2] * xs[3]);
                let m = gv.abs();
                if need(*x) {
                    let gx = ComplexTensor::from_fn(xs, |i| {
                        let mm = m[(i / (c * hw)) * hw + i % hw];
                        (g.re()[i] * mm, g.im()[i] * mm)
                    });
                    accumulate(grads, *x, gx);
                }
                if need(*gate) {
                    let mut gg = ComplexTensor::zeros(gv.shape());
                    for bi in 0..bsz {
                        for p in 0..hw {
                            let mut dm = T::zero();
                            for ch in 0..c {
                                let i = (bi * c + ch) * hw + p;
                                dm += g.re()[i] * xv.re()[i] + g.im()[i] * xv.im()[i];
                            }
                            let k = bi * hw + p;
                            let mm = m[k];
                            if mm > T::zero() {
                                let (a, b) = gv.get(k);
                                gg.set(k, (dm * a / mm, dm * b / mm));
                            }
                        }
                    }
                    accumulate(grads, *gate, gg);
                }
            }
            Op::ColumnSelect { pred, mask, .. } => {
                let w = mask.len();
                let gx = ComplexTensor::from_fn(g.shape(), |i| {
                    if mask[i % w] {
                        (T::zero(), T::zero())
                    } else {
                        g.get(i)
                    }
                });
                accumulate(grads, *pred, gx);
            }
            Op::Rss { x } => {
                let xv = self.value(*x);
                let xs = xv.shape();
                let (c, hw) = (xs[1], xs[2] * xs[3]);
                let r = &n.value;
                let gx = ComplexTensor::from_fn(xs, |i| {
                    let k = (i / (c * hw)) * hw + i % hw;
                    let rv = r.re()[k];
                    if rv > T::zero() {
                        let s = g.re()[k] / rv;
                        (xv.re()[i] * s, xv.im()[i] * s)
                    } else {
                        (T::zero(), T::zero())
                    }
                });
                accumulate(grads, *x, gx);
            }
            Op::Mse { x, target } => {
                let xv = self.value(*x);
                let s = g.re()[0] * T::of(2.0) / T::of(xv.numel().max(1) as f64);
                let gx = ComplexTensor::from_fn(xv.shape(), |i| {
                    ((xv.re()[i] - target.re()[i]) * s, (xv.im()[i] - target.im()[i]) * s)
                });
                accumulate(grads, *x, gx);
            }
            Op::L1 { x, target } => {
                let xv = self.value(*x);
                let s = g.re()[0] / T::of(xv.numel().max(1) as f64);
                let sign = |v: T| {
                    if v > T::zero() {
                        T::one()
                    } else if v < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    }
                };
                let gx = ComplexTensor::from_fn(xv.shape(), |i| {
                    (sign(xv.re()[i] - target.re()[i]) * s, sign(xv.im()[i] - target.im()[i]) * s)
                });
                accumulate(grads, *x, gx);
            }
        }
    }

    /// Adds this tape's parameter gradients into `store`.
    pub fn accumulate_param_grads(&self, grads: &Gradients<T>, store: &mut ParamStore<T>) {
        for (i, n) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&n.op, grads.grads[i].as_ref()) {
                store.grad_mut(*id).add_assign(g);
            }
        }
    }

    /// Recomputes the forward value of `v` from the saved values of its inputs.
    pub fn recompute(&self, v: Var) -> Result<ComplexTensor<T>> {
        let n = &self.nodes[v.0];
        let val = |x: &Var| self.value(*x);
        Ok(match &n.op {
            Op::Leaf | Op::Param(_) => (*n.value).clone(),
            Op::Linear { x, w, b } => linear_forward(val(x), val(w), b.as_ref().map(val))?,
            Op::Conv { x, w, b, geom } => conv2d_forward(val(x), val(w), b.as_ref().map(val), geom)?,
            Op::ConvT { x, w, b, geom } => conv_transpose2d_forward(val(x), val(w), b.as_ref().map(val), geom)?,
            Op::Act { x, kind } => complex_activation(val(x), *kind),
            Op::GroupNorm {
                x,
                gamma_diag,
                gamma_off,
                beta,
                groups,
                eps,
                ..
            } => group_norm_forward(val(x), val(gamma_diag), val(gamma_off), val(beta), *groups, *eps)?.0,
            Op::MaxPool { x, window, stride, .. } => complex_max_pool2d(val(x), *window, *stride)?.0,
            Op::Add { a, b } => val(a).add(val(b))?,
            Op::Scale { x, s } => val(x).scale(*s),
            Op::Concat { parts } => concat_channels(&parts.iter().map(val).collect::<Vec<_>>())?,
            Op::Transpose { x } => val(x).transpose_last2(),
            Op::Roll { x, axis, shift } => val(x).roll(*axis, *shift),
            Op::ModulusGate { x, gate } => {
                let g = val(gate).abs();
                let xv = val(x);
                let s = xv.shape();
                let (c, hw) = (s[1], s[2] * s[3]);
                ComplexTensor::from_fn(s, |i| {
                    let m = g[(i / (c * hw)) * hw + i % hw];
                    (xv.re()[i] * m, xv.im()[i] * m)
                })
            }
            Op::ColumnSelect { pred, acquired, mask } => select_columns(val(pred), acquired, mask)?,
            Op::Rss { x } => rss_channels(val(x))?,
            Op::Mse { x, target } => mse_value(val(x), target)?,
            Op::L1 { x, target } => l1_value(val(x), target)?,
        })
    }
}

fn accumulate<T: Real>(grads: &mut [Option<ComplexTensor<T>>], v: Var, g: ComplexTensor<T>) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn loss_shapes<T: Real>(x: &ComplexTensor<T>, t: &ComplexTensor<T>) -> Result<T> {
    if x.shape() != t.shape() {
        return dim_err(format!("loss shapes {:?} vs {:?}", x.shape(), t.shape()));
    }
    Ok(T::of(x.numel().max(1) as f64))
}

fn mse_value<T: Real>(x: &ComplexTensor<T>, t: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    let n = loss_shapes(x, t)?;
    let mut s = T::zero();
    for i in 0..x.numel() {
        let dr = x.re()[i] - t.re()[i];
        let di = x.im()[i] - t.im()[i];
        s += dr * dr + di * di;
    }
    ComplexTensor::from_real(vec![s / n], &[1])
}

fn l1_value<T: Real>(x: &ComplexTensor<T>, t: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    let n = loss_shapes(x, t)?;
    let mut s = T::zero();
    for i in 0..x.numel() {
        s += (x.re()[i] - t.re()[i]).abs() + (x.im()[i] - t.im()[i]).abs();
    }
    ComplexTensor::from_real(vec![s / n], &[1])
}

pub(crate) fn concat_channels<T: Real>(parts: &[&ComplexTensor<T>]) -> Result<ComplexTensor<T>> {
    let first = parts.first().ok_or_else(|| Error::Dimension("empty concat".into()))?;
    let s0 = first.shape();
    if s0.len() != 4 {
        return dim_err("concat expects 4-D tensors");
    }
    let mut ctot = 0;
    for p in parts {
        let s = p.shape();
        if s.len() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3] {
            return dim_err(format!("cannot concat {:?} with {:?}", s, s0));
        }
        ctot += s[1];
    }
    let (b, hw) = (s0[0], s0[2] * s0[3]);
    let mut out = ComplexTensor::zeros(&[b, ctot, s0[2], s0[3]]);
    let (or, oi) = out.planes_mut();
    for bi in 0..b {
        let mut off = 0;
        for p in parts {
            let c = p.shape()[1];
            let src = bi * c * hw;
            let dst = (bi * ctot + off) * hw;
            or[dst..dst + c * hw].copy_from_slice(&p.re()[src..src + c * hw]);
            oi[dst..dst + c * hw].copy_from_slice(&p.im()[src..src + c * hw]);
            off += c;
        }
    }
    Ok(out)
}

pub(crate) fn select_columns<T: Real>(
    pred: &ComplexTensor<T>,
    acquired: &ComplexTensor<T>,
    mask: &[bool],
) -> Result<ComplexTensor<T>> {
    if pred.shape() != acquired.shape() {
        return dim_err(format!(
            "data consistency shapes {:?} vs {:?}",
            pred.shape(),
            acquired.shape()
        ));
    }
    if pred.last_dim() != mask.len() {
        return dim_err(format!(
            "mask of {} columns for trailing dim {}",
            mask.len(),
            pred.last_dim()
        ));
    }
    let w = mask.len();
    Ok(ComplexTensor::from_fn(pred.shape(), |i| {
        if mask[i % w] {
            acquired.get(i)
        } else {
            pred.get(i)
        }
    }))
}

pub(crate) fn rss_channels<T: Real>(x: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    let s = x.shape();
    if s.len() != 4 {
        return dim_err(format!("rss expects [B, C, H, W], got {:?}", s));
    }
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let hw = h * w;
    let mut out = vec![T::zero(); b * hw];
    for bi in 0..b {
        for ch in 0..c {
            let off = (bi * c + ch) * hw;
            for p in 0..hw {
                let (a, bb) = x.get(off + p);
                out[bi * hw + p] += a * a + bb * bb;
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.sqrt());
    ComplexTensor::from_real(out, &[b, h, w])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspace::{equispaced_mask, phantom};
    use crate::models::{acc_on_tape, AccTarget, Model, ModelSpec, Variant};

    #[test]
    fn replay_matches_saved_values_exactly() {
        let spec = ModelSpec {
            widths: vec![4, 8],
            ..ModelSpec::mri(Variant::Ki, 2, 16, 16)
        };
        let model = Model::<f64>::new(spec).unwrap();
        let p = phantom(16, 16, 2, 3).unwrap();
        let mask = equispaced_mask(16, 4, 1).unwrap();
        let k = crate::kspace::apply_mask(&p.kspace, &mask).unwrap().data.reshape(&[1, 2, 16, 16]).unwrap();
        let acq = Model::acquisition(k.clone(), &mask);
        let mut tape = Tape::new();
        let x = tape.constant(k);
        let out = model.forward(&mut tape, x, Some(&acq)).unwrap();
        let tgt = AccTarget::new(p.coil_images.clone().reshape(&[1, 2, 16, 16]).unwrap()).unwrap();
        let l = acc_on_tape(&mut tape, out.image, &tgt).unwrap();
        assert!(tape.len() > 50);
        for i in 0..=l.index() {
            let v = Var(i);
            assert!(tape.recompute(v).unwrap() == *tape.value(v), "node {} differs on replay", i);
        }
    }

    #[test]
    fn frozen_params_get_no_gradient() {
        let mut store = ParamStore::<f64>::new();
        let a = store.add("a", ComplexTensor::from_real(vec![2.0], &[1]).unwrap());
        let b = store.add("b", ComplexTensor::from_real(vec![3.0], &[1]).unwrap());
        store.set_trainable(b, false);
        let mut tape = Tape::new();
        let va = tape.param(&store, a);
        let vb = tape.param(&store, b);
        let s = tape.add(va, vb).unwrap();
        let l = tape.mse(s, Arc::new(ComplexTensor::zeros(&[1]))).unwrap();
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(va).unwrap().re()[0], 10.0);
        assert!(g.get(vb).is_none());
        tape.accumulate_param_grads(&g, &mut store);
        assert_eq!(store.grad(a).re()[0], 10.0);
        assert_eq!(store.grad(b).re()[0], 0.0);
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(ComplexTensor::zeros(&[3]));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn shared_inputs_accumulate() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(ComplexTensor::new(vec![1.0, 2.0], vec![0.5, -1.0], &[2]).unwrap());
        let y = tape.add(x, x).unwrap();
        let l = tape.mse(y, Arc::new(ComplexTensor::zeros(&[2]))).unwrap();
        let g = tape.backward(l).unwrap();
        // d/dx mean((2x)^2) = 8x / n per plane
        assert_eq!(g.get(x).unwrap().re(), &[4.0, 8.0]);
        assert_eq!(g.get(x).unwrap().im(), &[2.0, -4.0]);
    }
}
