//! Complex group normalisation: per-group zero-centring followed by 2x2
//! whitening of the (re, im) covariance and a per-channel affine map.

use crate::ctensor::ComplexTensor;
use crate::error::{config_err, dim_err, Error, Result};
use crate::scalar::Real;

/// Regularised covariance `[[A, B], [C, D]]` of the real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhiteningMatrix<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> WhiteningMatrix<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    pub fn as_array(&self) -> [[T; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }
}

/// Closed-form inverse square root of a 2x2 SPD matrix:
/// `[[D+s, -B], [-C, A+s]] / (s t)` with `s = sqrt(AD - BC)`,
/// `t = sqrt(A + D + 2s)`.
pub fn inv_sqrt_2x2<T: Real>(v: &WhiteningMatrix<T>) -> Result<[[T; 2]; 2]> {
    let det = v.a * v.d - v.b * v.c;
    if !(det > T::zero()) {
        return Err(Error::NumericDomain(format!(
            "covariance determinant {} is not positive",
            det
        )));
    }
    let s = det.sqrt();
    let tr = v.a + v.d + s + s;
    if !(tr > T::zero()) {
        return Err(Error::NumericDomain(format!(
            "covariance trace term {} is not positive",
            tr
        )));
    }
    let t = tr.sqrt();
    let d = s * t;
    Ok([[(v.d + s) / d, -v.b / d], [-v.c / d, (v.a + s) / d]])
}

/// Parameters of complex group normalisation.
///
/// `gamma_diag` carries `gamma_rr` in its real plane and `gamma_ii` in its
/// imaginary plane; the real plane of `gamma_off` carries the shared
/// off-diagonal `gamma_ri` (its imaginary plane is unused).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupNormParams<T> {
    pub gamma_diag: ComplexTensor<T>,
    pub gamma_off: ComplexTensor<T>,
    pub beta: ComplexTensor<T>,
    pub num_groups: usize,
    pub epsilon: f64,
}

impl<T: Real> GroupNormParams<T> {
    /// `gamma = I`, `beta = 0`.
    pub fn identity(channels: usize, num_groups: usize, epsilon: f64) -> Result<Self> {
        let p = Self {
            gamma_diag: ComplexTensor::new(vec![T::one(); channels], vec![T::one(); channels], &[channels])?,
            gamma_off: ComplexTensor::zeros(&[channels]),
            beta: ComplexTensor::zeros(&[channels]),
            num_groups,
            epsilon,
        };
        p.validate(channels)?;
        Ok(p)
    }

    pub fn gamma(&self, c: usize) -> [[T; 2]; 2] {
        let (rr, ii) = self.gamma_diag.get(c);
        let ri = self.gamma_off.re()[c];
        [[rr, ri], [ri, ii]]
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        validate(channels, self.num_groups, self.epsilon)?;
        for t in [&self.gamma_diag, &self.gamma_off, &self.beta] {
            if t.numel() != channels {
                return dim_err(format!(
                    "group norm parameter has {} entries for {} channels",
                    t.numel(),
                    channels
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate(channels: usize, groups: usize, eps: f64) -> Result<()> {
    if groups == 0 || channels % groups != 0 {
        return config_err(format!(
            "{} groups do not divide {} channels",
            groups, channels
        ));
    }
    if !(eps > 0.0) {
        return config_err("group norm epsilon must be positive");
    }
    Ok(())
}

/// Saved forward state for the backward pass.
pub(crate) struct GroupNormCache<T> {
    /// Zero-centred input.
    pub centered: ComplexTensor<T>,
    /// Per (batch, group): covariance entries (A, B, D) and the whitening matrix.
    pub stats: Vec<([T; 3], [[T; 2]; 2])>,
}

pub fn complex_group_norm<T: Real>(
    z: &ComplexTensor<T>,
    p: &GroupNormParams<T>,
) -> Result<ComplexTensor<T>> {
    if z.ndim() != 4 {
        return dim_err(format!("group norm expects [B, C, H, W], got {:?}", z.shape()));
    }
    p.validate(z.shape()[1])?;
    group_norm_forward(z, &p.gamma_diag, &p.gamma_off, &p.beta, p.num_groups, p.epsilon)
        .map(|(y, _)| y)
}

pub(crate) fn group_norm_forward<T: Real>(
    z: &ComplexTensor<T>,
    gamma_diag: &ComplexTensor<T>,
    gamma_off: &ComplexTensor<T>,
    beta: &ComplexTensor<T>,
    groups: usize,
    eps: f64,
) -> Result<(ComplexTensor<T>, GroupNormCache<T>)> {
    if z.ndim() != 4 {
        return dim_err(format!("group norm expects [B, C, H, W], got {:?}", z.shape()));
    }
    let s = z.shape();
    let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
    validate(c, groups, eps)?;
    let cpg = c / groups;
    let n = cpg * hw;
    let nt = T::of(n as f64);
    let eps = T::of(eps);
    let mut centered = ComplexTensor::zeros(s);
    let mut out = ComplexTensor::zeros(s);
    let mut stats = Vec::with_capacity(b * groups);
    for bi in 0..b {
        for g in 0..groups {
            let lo = (bi * c + g * cpg) * hw;
            let hi = lo + n;
            let xr = &z.re()[lo..hi];
            let xi = &z.im()[lo..hi];
            let mr = xr.iter().copied().sum::<T>() / nt;
            let mi = xi.iter().copied().sum::<T>() / nt;
            let (cr, ci) = centered.planes_mut();
            let (mut va, mut vb, mut vd) = (T::zero(), T::zero(), T::zero());
            for j in 0..n {
                let a = xr[j] - mr;
                let bb = xi[j] - mi;
                cr[lo + j] = a;
                ci[lo + j] = bb;
                va += a * a;
                vb += a * bb;
                vd += bb * bb;
            }
            let va = va / nt + eps;
            let vb = vb / nt;
            let vd = vd / nt + eps;
            let m = inv_sqrt_2x2(&WhiteningMatrix::new(va, vb, vb, vd))?;
            let (orr, oi) = out.planes_mut();
            for cc in 0..cpg {
                let ch = g * cpg + cc;
                let (grr, gii) = gamma_diag.get(ch);
                let gri = gamma_off.re()[ch];
                let (br, bim) = beta.get(ch);
                for p in 0..hw {
                    let j = cc * hw + p;
                    let a = centered.re()[lo + j];
                    let bb = centered.im()[lo + j];
                    let hr = m[0][0] * a + m[0][1] * bb;
                    let hi_ = m[1][0] * a + m[1][1] * bb;
                    orr[lo + j] = grr * hr + gri * hi_ + br;
                    oi[lo + j] = gri * hr + gii * hi_ + bim;
                }
            }
            stats.push(([va, vb, vd], m));
        }
    }
    Ok((out, GroupNormCache { centered, stats }))
}

/// Partial derivatives of the whitening matrix entries with respect to
/// (A, B, D), where the off-diagonal covariance B is shared by both corners.
fn whitening_partials<T: Real>(a: T, b: T, d: T) -> [[[T; 2]; 2]; 3] {
    let two = T::of(2.0);
    let s = (a * d - b * b).sqrt();
    let t = (a + d + two * s).sqrt();
    let dd = s * t;
    let ds = [d / (two * s), -b / s, a / (two * s)];
    let delta_a = [T::one(), T::zero(), T::zero()];
    let delta_b = [T::zero(), T::one(), T::zero()];
    let delta_d = [T::zero(), T::zero(), T::one()];
    let mut out = [[[T::zero(); 2]; 2]; 3];
    for x in 0..3 {
        let dt = (delta_a[x] + delta_d[x] + two * ds[x]) / (two * t);
        let d_dd = ds[x] * t + s * dt;
        let m00 = (delta_d[x] + ds[x]) / dd - (d + s) * d_dd / (dd * dd);
        let m11 = (delta_a[x] + ds[x]) / dd - (a + s) * d_dd / (dd * dd);
        let m01 = -delta_b[x] / dd + b * d_dd / (dd * dd);
        out[x] = [[m00, m01], [m01, m11]];
    }
    out
}

pub(crate) struct GroupNormGrads<T> {
    pub input: ComplexTensor<T>,
    pub gamma_diag: ComplexTensor<T>,
    pub gamma_off: ComplexTensor<T>,
    pub beta: ComplexTensor<T>,
}

pub(crate) fn group_norm_backward<T: Real>(
    gy: &ComplexTensor<T>,
    cache: &GroupNormCache<T>,
    gamma_diag: &ComplexTensor<T>,
    gamma_off: &ComplexTensor<T>,
    groups: usize,
) -> GroupNormGrads<T> {
    let s = gy.shape();
    let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
    let cpg = c / groups;
    let n = cpg * hw;
    let nt = T::of(n as f64);
    let two = T::of(2.0);
    let mut gx = ComplexTensor::zeros(s);
    let mut g_diag = ComplexTensor::zeros(&[c]);
    let mut g_off = ComplexTensor::zeros(&[c]);
    let mut g_beta = ComplexTensor::zeros(&[c]);
    let mut ghat_r = vec![T::zero(); n];
    let mut ghat_i = vec![T::zero(); n];
    for bi in 0..b {
        for g in 0..groups {
            let lo = (bi * c + g * cpg) * hw;
            let ([va, vb, vd], m) = cache.stats[bi * groups + g];
            let xr = &cache.centered.re()[lo..lo + n];
            let xi = &cache.centered.im()[lo..lo + n];
            let mut gm = [[T::zero(); 2]; 2];
            for cc in 0..cpg {
                let ch = g * cpg + cc;
                let (grr, gii) = gamma_diag.get(ch);
                let gri = gamma_off.re()[ch];
                let (mut s_rr, mut s_ii, mut s_ri, mut s_br, mut s_bi) =
                    (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
                for p in 0..hw {
                    let j = cc * hw + p;
                    let (gr, gi) = gy.get(lo + j);
                    let hr = m[0][0] * xr[j] + m[0][1] * xi[j];
                    let hi = m[1][0] * xr[j] + m[1][1] * xi[j];
                    s_rr += gr * hr;
                    s_ii += gi * hi;
                    s_ri += gr * hi + gi * hr;
                    s_br += gr;
                    s_bi += gi;
                    let ghr = grr * gr + gri * gi;
                    let ghi = gri * gr + gii * gi;
                    ghat_r[j] = ghr;
                    ghat_i[j] = ghi;
                    gm[0][0] += ghr * xr[j];
                    gm[0][1] += ghr * xi[j];
                    gm[1][0] += ghi * xr[j];
                    gm[1][1] += ghi * xi[j];
                }
                let (dr, di) = g_diag.get(ch);
                g_diag.set(ch, (dr + s_rr, di + s_ii));
                let (or, _) = g_off.get(ch);
                g_off.set(ch, (or + s_ri, T::zero()));
                let (br, bim) = g_beta.get(ch);
                g_beta.set(ch, (br + s_br, bim + s_bi));
            }
            let partials = whitening_partials(va, vb, vd);
            let mut gv = [T::zero(); 3];
            for (x, pm) in partials.iter().enumerate() {
                gv[x] = gm[0][0] * pm[0][0] + gm[0][1] * pm[0][1] + gm[1][0] * pm[1][0] + gm[1][1] * pm[1][1];
            }
            let (ga, gb, gd) = (gv[0], gv[1], gv[2]);
            let mut sum_r = T::zero();
            let mut sum_i = T::zero();
            let (gxr, gxi) = gx.planes_mut();
            for j in 0..n {
                let cr = m[0][0] * ghat_r[j] + m[1][0] * ghat_i[j] + (two * ga * xr[j] + gb * xi[j]) / nt;
                let ci = m[0][1] * ghat_r[j] + m[1][1] * ghat_i[j] + (two * gd * xi[j] + gb * xr[j]) / nt;
                gxr[lo + j] = cr;
                gxi[lo + j] = ci;
                sum_r += cr;
                sum_i += ci;
            }
            let mr = sum_r / nt;
            let mi = sum_i / nt;
            for j in 0..n {
                gxr[lo + j] -= mr;
                gxi[lo + j] -= mi;
            }
        }
    }
    GroupNormGrads {
        input: gx,
        gamma_diag: g_diag,
        gamma_off: g_off,
        beta: g_beta,
    }
}
