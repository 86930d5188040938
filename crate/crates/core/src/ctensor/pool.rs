use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Result};
use crate::scalar::Real;

/// Max pooling by modulus over `[B, C, H, W]`.
///
/// Both planes are taken from the single position of largest modulus in each
/// window; ties go to the first position in row-major order. The returned
/// indices are flat offsets into the input.
pub fn complex_max_pool2d<T: Real>(
    z: &ComplexTensor<T>,
    window: [usize; 2],
    stride: [usize; 2],
) -> Result<(ComplexTensor<T>, Vec<usize>)> {
    if z.ndim() != 4 {
        return dim_err(format!("max pool expects [B, C, H, W], got {:?}", z.shape()));
    }
    let s = z.shape();
    let (bc, h, w) = (s[0] * s[1], s[2], s[3]);
    let [kh, kw] = window;
    let [sh, sw] = stride;
    if kh == 0 || kw == 0 || sh == 0 || sw == 0 || h < kh || w < kw {
        return dim_err("invalid pooling window");
    }
    if (h - kh) % sh != 0 || (w - kw) % sw != 0 {
        return dim_err(format!(
            "spatial size {}x{} not divisible by pooling stride {}x{}",
            h, w, sh, sw
        ));
    }
    let (oh, ow) = ((h - kh) / sh + 1, (w - kw) / sw + 1);
    let mut out = ComplexTensor::zeros(&[s[0], s[1], oh, ow]);
    let mut idx = Vec::with_capacity(bc * oh * ow);
    let (re, im) = (z.re(), z.im());
    for p in 0..bc {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * sh * w + ox * sw;
                let mut best_m = re[best] * re[best] + im[best] * im[best];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let i = base + (oy * sh + ky) * w + ox * sw + kx;
                        let m = re[i] * re[i] + im[i] * im[i];
                        if m > best_m {
                            best_m = m;
                            best = i;
                        }
                    }
                }
                let o = (p * oh + oy) * ow + ox;
                out.set(o, (re[best], im[best]));
                idx.push(best);
            }
        }
    }
    Ok((out, idx))
}

pub(crate) fn max_pool_backward<T: Real>(
    g: &ComplexTensor<T>,
    indices: &[usize],
    input_shape: &[usize],
) -> ComplexTensor<T> {
    let mut gx = ComplexTensor::zeros(input_shape);
    let (xr, xi) = gx.planes_mut();
    for (o, &i) in indices.iter().enumerate() {
        xr[i] += g.re()[o];
        xi[i] += g.im()[o];
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn picks_largest_modulus() {
        let z = ComplexTensor::new(vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 2.0, 0.0, 0.0], &[1, 1, 2, 2]).unwrap();
        let (y, idx) = complex_max_pool2d(&z, [2, 2], [2, 2]).unwrap();
        assert_eq!(y.get(0), (0.0, 2.0));
        assert_eq!(idx, vec![1]);
    }

    #[test]
    fn ties_resolve_to_first_in_scan_order() {
        let z = ComplexTensor::new(vec![0.0, 1.0, 0.0, -1.0], vec![1.0, 0.0, -1.0, 0.0], &[1, 1, 2, 2]).unwrap();
        let (y, idx) = complex_max_pool2d(&z, [2, 2], [2, 2]).unwrap();
        assert_eq!(idx, vec![0]);
        assert_eq!(y.get(0), (0.0, 1.0));
    }

    #[test]
    fn brute_force_window_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let z = ComplexTensor::<f64>::randn(&[1, 1, 4, 4], &mut rng);
        let (y, _) = complex_max_pool2d(&z, [2, 2], [2, 2]).unwrap();
        for wy in 0..2 {
            for wx in 0..2 {
                let cands: Vec<usize> = (0..4).map(|k| (wy * 2 + k / 2) * 4 + wx * 2 + k % 2).collect();
                let best = *cands
                    .iter()
                    .max_by(|&&a, &&b| {
                        let ma = z.get(a).0.hypot(z.get(a).1);
                        let mb = z.get(b).0.hypot(z.get(b).1);
                        ma.partial_cmp(&mb).unwrap()
                    })
                    .unwrap();
                assert_eq!(y.get(wy * 2 + wx), z.get(best));
            }
        }
    }

    #[test]
    fn odd_size_is_rejected() {
        let z = ComplexTensor::<f32>::zeros(&[1, 1, 5, 4]);
        assert!(complex_max_pool2d(&z, [2, 2], [2, 2]).is_err());
    }
}
