//! Complex 2-D convolution and its transpose via im2col and complex GEMM.
//!
//! Tensors are `[B, C, H, W]`; kernels `[out, in, kh, kw]`. The transposed
//! convolution uses a conv-shaped kernel `[in_of_conv, out_of_conv, kh, kw]`
//! and is the bilinear transpose of the convolution with the same weights,
//! i.e. the four-real-convolution product with each convolution transposed.

use crate::ctensor::gemm::{cgemm, CMat};
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvGeom {
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
    pub padding: [usize; 2],
}

impl ConvGeom {
    pub fn new(kernel: [usize; 2], stride: [usize; 2], padding: [usize; 2]) -> Self {
        Self {
            kernel,
            stride,
            padding,
        }
    }

    /// Square 3x3, stride 1, padding 1: preserves spatial size.
    pub fn same3() -> Self {
        Self::new([3, 3], [1, 1], [1, 1])
    }

    pub fn pointwise() -> Self {
        Self::new([1, 1], [1, 1], [0, 0])
    }

    pub fn conv_out(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let [kh, kw] = self.kernel;
        let [sh, sw] = self.stride;
        let [ph, pw] = self.padding;
        if sh == 0 || sw == 0 {
            return dim_err("stride must be positive");
        }
        if h + 2 * ph < kh || w + 2 * pw < kw {
            return dim_err(format!(
                "kernel {}x{} larger than padded input {}x{}",
                kh,
                kw,
                h + 2 * ph,
                w + 2 * pw
            ));
        }
        Ok(((h + 2 * ph - kh) / sh + 1, (w + 2 * pw - kw) / sw + 1))
    }

    pub fn transpose_out(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let [kh, kw] = self.kernel;
        let [sh, sw] = self.stride;
        let [ph, pw] = self.padding;
        if h == 0 || w == 0 {
            return dim_err("empty input to transposed convolution");
        }
        let full_h = (h - 1) * sh + kh;
        let full_w = (w - 1) * sw + kw;
        if full_h < 2 * ph + 1 || full_w < 2 * pw + 1 {
            return dim_err("padding exceeds transposed convolution output");
        }
        Ok((full_h - 2 * ph, full_w - 2 * pw))
    }
}

/// Weights of a complex convolution `K = K1 + i K2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexConvWeights<T> {
    /// `[out, in, kh, kw]`; real plane `K1`, imaginary plane `K2`.
    pub kernel: ComplexTensor<T>,
    pub bias: Option<ComplexTensor<T>>,
    pub stride: [usize; 2],
    pub padding: [usize; 2],
}

impl<T: Real> ComplexConvWeights<T> {
    pub fn new(
        kernel: ComplexTensor<T>,
        bias: Option<ComplexTensor<T>>,
        stride: [usize; 2],
        padding: [usize; 2],
    ) -> Result<Self> {
        if kernel.ndim() != 4 {
            return dim_err(format!("conv kernel must be 4-D, got {:?}", kernel.shape()));
        }
        if stride.contains(&0) {
            return dim_err("stride must be positive");
        }
        Ok(Self {
            kernel,
            bias,
            stride,
            padding,
        })
    }

    pub fn geom(&self) -> ConvGeom {
        let s = self.kernel.shape();
        ConvGeom::new([s[2], s[3]], self.stride, self.padding)
    }
}

struct Dims {
    c: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
}

fn im2col<T: Real>(x: &[T], d: &Dims, g: &ConvGeom, col: &mut [T]) {
    let [kh, kw] = g.kernel;
    let [sh, sw] = g.stride;
    let [ph, pw] = g.padding;
    let hw = d.oh * d.ow;
    for c in 0..d.c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((c * kh + ki) * kw + kj) * hw;
                for oy in 0..d.oh {
                    let iy = (oy * sh + ki) as isize - ph as isize;
                    let dst = &mut col[row + oy * d.ow..row + (oy + 1) * d.ow];
                    if iy < 0 || iy >= d.h as isize {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &x[(c * d.h + iy as usize) * d.w..(c * d.h + iy as usize + 1) * d.w];
                    for (ox, v) in dst.iter_mut().enumerate() {
                        let ix = (ox * sw + kj) as isize - pw as isize;
                        *v = if ix < 0 || ix >= d.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(col: &[T], d: &Dims, g: &ConvGeom, x: &mut [T]) {
    let [kh, kw] = g.kernel;
    let [sh, sw] = g.stride;
    let [ph, pw] = g.padding;
    let hw = d.oh * d.ow;
    for c in 0..d.c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((c * kh + ki) * kw + kj) * hw;
                for oy in 0..d.oh {
                    let iy = (oy * sh + ki) as isize - ph as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let base = (c * d.h + iy as usize) * d.w;
                    let src = &col[row + oy * d.ow..row + (oy + 1) * d.ow];
                    for (ox, &v) in src.iter().enumerate() {
                        let ix = (ox * sw + kj) as isize - pw as isize;
                        if ix >= 0 && (ix as usize) < d.w {
                            x[base + ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

fn split4(shape: &[usize], what: &str) -> Result<(usize, usize, usize, usize)> {
    if shape.len() != 4 {
        return dim_err(format!("{} expects a [B, C, H, W] tensor, got {:?}", what, shape));
    }
    Ok((shape[0], shape[1], shape[2], shape[3]))
}

/// Complex 2-D convolution (cross-correlation) with zero padding.
pub fn complex_conv2d<T: Real>(
    z: &ComplexTensor<T>,
    w: &ComplexConvWeights<T>,
) -> Result<ComplexTensor<T>> {
    conv2d_forward(z, &w.kernel, w.bias.as_ref(), &w.geom())
}

pub(crate) fn conv2d_forward<T: Real>(
    z: &ComplexTensor<T>,
    kernel: &ComplexTensor<T>,
    bias: Option<&ComplexTensor<T>>,
    g: &ConvGeom,
) -> Result<ComplexTensor<T>> {
    let (b, c, h, w) = split4(z.shape(), "conv2d")?;
    let (co, ci, _, _) = split4(kernel.shape(), "conv2d kernel")?;
    if ci != c {
        return dim_err(format!("conv2d kernel expects {} input channels, got {}", ci, c));
    }
    if let Some(bb) = bias {
        if bb.numel() != co {
            return dim_err("conv bias length does not match output channels");
        }
    }
    let (oh, ow) = g.conv_out(h, w)?;
    let d = Dims { c, h, w, oh, ow };
    let kk = c * g.kernel[0] * g.kernel[1];
    let hw = oh * ow;
    let mut col_re = vec![T::zero(); kk * hw];
    let mut col_im = vec![T::zero(); kk * hw];
    let mut out = ComplexTensor::zeros(&[b, co, oh, ow]);
    let in_sz = c * h * w;
    let out_sz = co * hw;
    for bi in 0..b {
        im2col(&z.re()[bi * in_sz..(bi + 1) * in_sz], &d, g, &mut col_re);
        im2col(&z.im()[bi * in_sz..(bi + 1) * in_sz], &d, g, &mut col_im);
        let (or, oi) = out.planes_mut();
        let (or, oi) = (
            &mut or[bi * out_sz..(bi + 1) * out_sz],
            &mut oi[bi * out_sz..(bi + 1) * out_sz],
        );
        cgemm(
            co,
            kk,
            hw,
            CMat::rows(kernel.re(), kernel.im(), kk),
            CMat::rows(&col_re, &col_im, hw),
            or,
            oi,
            hw,
            false,
        );
        if let Some(bb) = bias {
            for o in 0..co {
                let (br, bim) = bb.get(o);
                or[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v += br);
                oi[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v += bim);
            }
        }
    }
    Ok(out)
}

pub(crate) struct ConvGrads<T> {
    pub input: Option<ComplexTensor<T>>,
    pub kernel: Option<ComplexTensor<T>>,
    pub bias: Option<ComplexTensor<T>>,
}

fn bias_grad<T: Real>(gy: &ComplexTensor<T>) -> ComplexTensor<T> {
    let s = gy.shape();
    let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
    let mut gb = ComplexTensor::zeros(&[c]);
    let (br, bi) = gb.planes_mut();
    for bb in 0..b {
        for o in 0..c {
            let off = (bb * c + o) * hw;
            br[o] += gy.re()[off..off + hw].iter().copied().sum::<T>();
            bi[o] += gy.im()[off..off + hw].iter().copied().sum::<T>();
        }
    }
    gb
}

pub(crate) fn conv2d_backward<T: Real>(
    gy: &ComplexTensor<T>,
    z: &ComplexTensor<T>,
    kernel: &ComplexTensor<T>,
    g: &ConvGeom,
    need_input: bool,
    need_kernel: bool,
    need_bias: bool,
) -> ConvGrads<T> {
    let s = z.shape();
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let co = kernel.shape()[0];
    let (oh, ow) = (gy.shape()[2], gy.shape()[3]);
    let d = Dims { c, h, w, oh, ow };
    let kk = c * g.kernel[0] * g.kernel[1];
    let hw = oh * ow;
    let in_sz = c * h * w;
    let out_sz = co * hw;
    let mut gx = need_input.then(|| ComplexTensor::zeros(s));
    let mut gk = need_kernel.then(|| ComplexTensor::zeros(kernel.shape()));
    let mut col_re = vec![T::zero(); kk * hw];
    let mut col_im = vec![T::zero(); kk * hw];
    for bi in 0..b {
        let gyr = &gy.re()[bi * out_sz..(bi + 1) * out_sz];
        let gyi = &gy.im()[bi * out_sz..(bi + 1) * out_sz];
        if let Some(gk) = gk.as_mut() {
            im2col(&z.re()[bi * in_sz..(bi + 1) * in_sz], &d, g, &mut col_re);
            im2col(&z.im()[bi * in_sz..(bi + 1) * in_sz], &d, g, &mut col_im);
            let (kr, ki) = gk.planes_mut();
            cgemm(
                co,
                hw,
                kk,
                CMat::rows(gyr, gyi, hw),
                CMat::rows_t(&col_re, &col_im, hw).conj(),
                kr,
                ki,
                kk,
                bi > 0,
            );
        }
        if let Some(gx) = gx.as_mut() {
            cgemm(
                kk,
                co,
                hw,
                CMat::rows_t(kernel.re(), kernel.im(), kk).conj(),
                CMat::rows(gyr, gyi, hw),
                &mut col_re,
                &mut col_im,
                hw,
                false,
            );
            let (xr, xi) = gx.planes_mut();
            col2im(&col_re, &d, g, &mut xr[bi * in_sz..(bi + 1) * in_sz]);
            col2im(&col_im, &d, g, &mut xi[bi * in_sz..(bi + 1) * in_sz]);
        }
    }
    ConvGrads {
        input: gx,
        kernel: gk,
        bias: need_bias.then(|| bias_grad(gy)),
    }
}

/// Complex transposed convolution: the bilinear transpose of
/// [`complex_conv2d`] with the same kernel (no output padding).
pub fn complex_conv_transpose2d<T: Real>(
    z: &ComplexTensor<T>,
    w: &ComplexConvWeights<T>,
) -> Result<ComplexTensor<T>> {
    conv_transpose2d_forward(z, &w.kernel, w.bias.as_ref(), &w.geom())
}

pub(crate) fn conv_transpose2d_forward<T: Real>(
    y: &ComplexTensor<T>,
    kernel: &ComplexTensor<T>,
    bias: Option<&ComplexTensor<T>>,
    g: &ConvGeom,
) -> Result<ComplexTensor<T>> {
    let (b, cy, hy, wy) = split4(y.shape(), "conv_transpose2d")?;
    let (kc_in, cx, _, _) = split4(kernel.shape(), "conv_transpose2d kernel")?;
    if kc_in != cy {
        return dim_err(format!(
            "transposed conv kernel expects {} input channels, got {}",
            kc_in, cy
        ));
    }
    if let Some(bb) = bias {
        if bb.numel() != cx {
            return dim_err("transposed conv bias length does not match output channels");
        }
    }
    let (hx, wx) = g.transpose_out(hy, wy)?;
    let d = Dims {
        c: cx,
        h: hx,
        w: wx,
        oh: hy,
        ow: wy,
    };
    let kk = cx * g.kernel[0] * g.kernel[1];
    let hw = hy * wy;
    let y_sz = cy * hw;
    let x_sz = cx * hx * wx;
    let mut col_re = vec![T::zero(); kk * hw];
    let mut col_im = vec![T::zero(); kk * hw];
    let mut out = ComplexTensor::zeros(&[b, cx, hx, wx]);
    for bi in 0..b {
        cgemm(
            kk,
            cy,
            hw,
            CMat::rows_t(kernel.re(), kernel.im(), kk),
            CMat::rows(&y.re()[bi * y_sz..(bi + 1) * y_sz], &y.im()[bi * y_sz..(bi + 1) * y_sz], hw),
            &mut col_re,
            &mut col_im,
            hw,
            false,
        );
        let (or, oi) = out.planes_mut();
        let or = &mut or[bi * x_sz..(bi + 1) * x_sz];
        let oi = &mut oi[bi * x_sz..(bi + 1) * x_sz];
        col2im(&col_re, &d, g, or);
        col2im(&col_im, &d, g, oi);
        if let Some(bb) = bias {
            let plane = hx * wx;
            for c in 0..cx {
                let (br, bim) = bb.get(c);
                or[c * plane..(c + 1) * plane].iter_mut().for_each(|v| *v += br);
                oi[c * plane..(c + 1) * plane].iter_mut().for_each(|v| *v += bim);
            }
        }
    }
    Ok(out)
}

pub(crate) fn conv_transpose2d_backward<T: Real>(
    gx: &ComplexTensor<T>,
    y: &ComplexTensor<T>,
    kernel: &ComplexTensor<T>,
    g: &ConvGeom,
    need_input: bool,
    need_kernel: bool,
    need_bias: bool,
) -> ConvGrads<T> {
    let s = y.shape();
    let (b, cy, hy, wy) = (s[0], s[1], s[2], s[3]);
    let (cx, hx, wx) = (gx.shape()[1], gx.shape()[2], gx.shape()[3]);
    let d = Dims {
        c: cx,
        h: hx,
        w: wx,
        oh: hy,
        ow: wy,
    };
    let kk = cx * g.kernel[0] * g.kernel[1];
    let hw = hy * wy;
    let y_sz = cy * hw;
    let x_sz = cx * hx * wx;
    let mut gy = need_input.then(|| ComplexTensor::zeros(s));
    let mut gk = need_kernel.then(|| ComplexTensor::zeros(kernel.shape()));
    let mut col_re = vec![T::zero(); kk * hw];
    let mut col_im = vec![T::zero(); kk * hw];
    for bi in 0..b {
        if gy.is_none() && gk.is_none() {
            break;
        }
        im2col(&gx.re()[bi * x_sz..(bi + 1) * x_sz], &d, g, &mut col_re);
        im2col(&gx.im()[bi * x_sz..(bi + 1) * x_sz], &d, g, &mut col_im);
        if let Some(gy) = gy.as_mut() {
            let (yr, yi) = gy.planes_mut();
            cgemm(
                cy,
                kk,
                hw,
                CMat::rows(kernel.re(), kernel.im(), kk).conj(),
                CMat::rows(&col_re, &col_im, hw),
                &mut yr[bi * y_sz..(bi + 1) * y_sz],
                &mut yi[bi * y_sz..(bi + 1) * y_sz],
                hw,
                false,
            );
        }
        if let Some(gk) = gk.as_mut() {
            let (kr, ki) = gk.planes_mut();
            cgemm(
                cy,
                hw,
                kk,
                CMat::rows(&y.re()[bi * y_sz..(bi + 1) * y_sz], &y.im()[bi * y_sz..(bi + 1) * y_sz], hw).conj(),
                CMat::rows_t(&col_re, &col_im, hw),
                kr,
                ki,
                kk,
                bi > 0,
            );
        }
    }
    ConvGrads {
        input: gy,
        kernel: gk,
        bias: need_bias.then(|| bias_grad(gx)),
    }
}
