use crate::error::{dim_err, Error, Result};

/// Real-valued image, row-major `[h, w]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealImage {
    pub data: Vec<f64>,
    pub h: usize,
    pub w: usize,
}

impl RealImage {
    pub fn new(data: Vec<f64>, h: usize, w: usize) -> Result<Self> {
        if data.len() != h * w {
            return dim_err(format!("{} values for a {}x{} image", data.len(), h, w));
        }
        Ok(Self { data, h, w })
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.w + x]
    }

    /// 2x2 mean pooling (odd trailing row/column dropped).
    pub fn downsample2(&self) -> Self {
        let (h, w) = (self.h / 2, self.w / 2);
        let data = (0..h * w)
            .map(|i| {
                let (y, x) = (2 * (i / w), 2 * (i % w));
                0.25 * (self.at(y, x) + self.at(y + 1, x) + self.at(y, x + 1) + self.at(y + 1, x + 1))
            })
            .collect();
        Self { data, h, w }
    }
}

fn same_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return dim_err(format!("metric inputs of length {} and {}", x.len(), y.len()));
    }
    Ok(())
}

pub const PSNR_CAP_DB: f64 = 200.0;

/// `10 log10(peak^2 / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(x: &[f64], y: &[f64], peak: f64) -> Result<f64> {
    same_len(x, y)?;
    if !(peak > 0.0) {
        return Err(Error::Config(format!("psnr peak must be positive, got {}", peak)));
    }
    let mse = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len().max(1) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// `||x - y|| / ||y||`.
pub fn nrmse(x: &[f64], y: &[f64]) -> Result<f64> {
    same_len(x, y)?;
    let den = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("nrmse against a zero reference".into()));
    }
    let num = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimOptions {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
    pub multiscale: bool,
}

impl Default for SsimOptions {
    fn default() -> Self {
        Self {
            window: 7,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
            multiscale: false,
        }
    }
}

/// Single-scale SSIM with the default window.
pub fn ssim(x: &RealImage, y: &RealImage) -> Result<f64> {
    ssim_with(x, y, &SsimOptions::default())
}

pub fn ssim_with(x: &RealImage, y: &RealImage, opt: &SsimOptions) -> Result<f64> {
    if !opt.multiscale {
        return Ok(ssim_maps(x, y, opt)?.0);
    }
    const WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let (mut xs, mut ys) = (x.clone(), y.clone());
    let mut scales = Vec::new();
    for _ in 0..WEIGHTS.len() {
        if xs.h < opt.window || xs.w < opt.window {
            break;
        }
        scales.push(ssim_maps(&xs, &ys, opt)?);
        xs = xs.downsample2();
        ys = ys.downsample2();
    }
    if scales.is_empty() {
        return ssim_maps(x, y, opt).map(|s| s.0);
    }
    let m = scales.len();
    let wsum: f64 = WEIGHTS[..m].iter().sum();
    let mut out = 1.0;
    for (j, (full, cs)) in scales.iter().enumerate() {
        let v = if j + 1 == m { *full } else { *cs };
        out *= v.max(0.0).powf(WEIGHTS[j] / wsum);
    }
    Ok(out)
}

/// Mean SSIM and mean contrast-structure term over valid windows.
fn ssim_maps(x: &RealImage, y: &RealImage, opt: &SsimOptions) -> Result<(f64, f64)> {
    if x.h != y.h || x.w != y.w {
        return dim_err(format!("ssim of {}x{} and {}x{}", x.h, x.w, y.h, y.w));
    }
    let k = opt.window;
    if x.h < k || x.w < k {
        return dim_err(format!("image {}x{} smaller than the {}x{} window", x.h, x.w, k, k));
    }
    let half = (k as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..k).map(|i| (-((i as f64 - half).powi(2)) / (2.0 * opt.sigma * opt.sigma)).exp()).collect();
    let gs: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / gs).collect();
    let c1 = (opt.k1 * opt.data_range).powi(2);
    let c2 = (opt.k2 * opt.data_range).powi(2);
    let (oh, ow) = (x.h - k + 1, x.w - k + 1);
    let (mut total, mut total_cs) = (0.0, 0.0);
    for oy in 0..oh {
        for ox in 0..ow {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..k {
                for dx in 0..k {
                    let wgt = g[dy] * g[dx];
                    let a = x.at(oy + dy, ox + dx);
                    let b = y.at(oy + dy, ox + dx);
                    mx += wgt * a;
                    my += wgt * b;
                    sxx += wgt * a * a;
                    syy += wgt * b * b;
                    sxy += wgt * a * b;
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            let cs = (2.0 * cov + c2) / (vx + vy + c2);
            total += (2.0 * mx * my + c1) / (mx * mx + my * my + c1) * cs;
            total_cs += cs;
        }
    }
    let n = (oh * ow) as f64;
    Ok((total / n, total_cs / n))
}

/// `|sum y_i p_i| / (||y|| ||p||)`.
pub fn gfc(y: &[f64], p: &[f64]) -> Result<f64> {
    same_len(y, p)?;
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let np = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ny == 0.0 || np == 0.0 {
        return Err(Error::UndefinedMetric("gfc of a zero vector".into()));
    }
    let dot: f64 = y.iter().zip(p).map(|(a, b)| a * b).sum();
    Ok((dot.abs() / (ny * np)).min(1.0))
}

pub fn pcc(y: &[f64], p: &[f64]) -> Result<f64> {
    same_len(y, p)?;
    let n = y.len();
    if n < 2 {
        return Err(Error::UndefinedMetric("correlation needs at least two samples".into()));
    }
    let my = y.iter().sum::<f64>() / n as f64;
    let mp = p.iter().sum::<f64>() / n as f64;
    let (mut syy, mut spp, mut syp) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(p) {
        let (da, db) = (a - my, b - mp);
        syy += da * da;
        spp += db * db;
        syp += da * db;
    }
    if syy == 0.0 || spp == 0.0 {
        return Err(Error::UndefinedMetric("correlation of a constant vector".into()));
    }
    Ok((syp / (syy.sqrt() * spp.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based fractional ranks, ties sharing their average rank.
pub fn fractional_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of fractional ranks.
pub fn scc(y: &[f64], p: &[f64]) -> Result<f64> {
    same_len(y, p)?;
    pcc(&fractional_ranks(y), &fractional_ranks(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn img(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> RealImage {
        RealImage::new((0..h * w).map(|i| f(i / w, i % w)).collect(), h, w).unwrap()
    }

    #[test]
    fn psnr_cases() {
        let x = vec![0.5; 16];
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), PSNR_CAP_DB);
        let y: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
        assert!((psnr(&x, &y, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&x, &y[..3], 1.0).is_err());
    }

    #[test]
    fn nrmse_cases() {
        let y = vec![1.0, -2.0, 3.0];
        assert_eq!(nrmse(&y, &y).unwrap(), 0.0);
        let x: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        assert!((nrmse(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!(nrmse(&y, &[0.0; 3]).is_err());
    }

    #[test]
    fn ssim_cases() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let y = img(24, 24, |a, b| ((a * 7 + b * 3) % 11) as f64 / 11.0);
        assert!((ssim(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        let c = img(24, 24, |_, _| 0.5);
        let noise: Vec<f64> = (0..576).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut last = 1.0;
        for amp in [0.02, 0.1, 0.3] {
            let x = RealImage::new(c.data.iter().zip(&noise).map(|(a, n)| a + amp * n).collect(), 24, 24).unwrap();
            let s = ssim(&x, &c).unwrap();
            assert!(s < last);
            last = s;
        }
        let cb = img(16, 16, |a, b| ((a + b) % 2) as f64);
        let inv = img(16, 16, |a, b| 1.0 - ((a + b) % 2) as f64);
        assert!(ssim(&cb, &inv).unwrap() < 0.0);
        assert!(ssim(&img(5, 5, |_, _| 0.0), &img(5, 5, |_, _| 0.0)).is_err());
        let x = img(24, 24, |a, b| (a as f64 * 0.1).sin() * (b as f64 * 0.2).cos());
        assert!((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs() < 1e-10);
        let ms = ssim_with(&y, &y, &SsimOptions { multiscale: true, ..Default::default() }).unwrap();
        assert!((ms - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gfc_cases() {
        let y = vec![1.0, 2.0, -1.0];
        assert!((gfc(&y, &y).unwrap() - 1.0).abs() < 1e-15);
        let s: Vec<f64> = y.iter().map(|v| -3.0 * v).collect();
        assert!((gfc(&y, &s).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(gfc(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!(gfc(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn correlation_cases() {
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let aff: Vec<f64> = y.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pcc(&y, &aff).unwrap() - 1.0).abs() < 1e-12);
        assert!((scc(&y, &aff).unwrap() - 1.0).abs() < 1e-12);
        let mono: Vec<f64> = y.iter().map(|v| (3.0 * v).exp()).collect();
        assert!((scc(&y, &mono).unwrap() - 1.0).abs() < 1e-12);
        assert!(pcc(&y, &mono).unwrap() < 1.0);
        assert!(pcc(&y, &vec![1.0; 20]).is_err());
        assert_eq!(fractional_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    proptest! {
        #[test]
        fn correlations_bounded(v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(r) = pcc(&a, &b) { prop_assert!((-1.0..=1.0).contains(&r)); }
            if let Ok(r) = scc(&a, &b) { prop_assert!((-1.0..=1.0).contains(&r)); }
        }

        #[test]
        fn gfc_symmetric_and_scale_free(v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..40), c in 0.1f64..50.0) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let (Ok(g1), Ok(g2)) = (gfc(&a, &b), gfc(&b, &a)) {
                prop_assert!((g1 - g2).abs() < 1e-12);
                let s: Vec<f64> = a.iter().map(|x| -c * x).collect();
                prop_assert!((gfc(&s, &b).unwrap() - g1).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&g1));
            }
        }

        #[test]
        fn nrmse_zero_iff_equal(v in proptest::collection::vec(-10.0f64..10.0, 1..30), k in 0usize..30) {
            prop_assume!(v.iter().any(|x| *x != 0.0));
            prop_assert_eq!(nrmse(&v, &v).unwrap(), 0.0);
            let mut w = v.clone();
            let i = k % w.len();
            w[i] += 1.0;
            prop_assert!(nrmse(&w, &v).unwrap() > 0.0);
        }
    }
}
