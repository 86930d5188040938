use serde::{Deserialize, Serialize};

use crate::aft::{dft_oracle_1d_with, Direction, Normalization};
use crate::autodiff::select_columns;
use crate::ctensor::ComplexTensor;
use crate::error::{dim_err, Result};
use crate::metrics::RealImage;
use crate::scalar::Real;

use super::SamplingMask;

/// Moves index 0 to the centre of `axis` (`n / 2`).
pub fn fftshift<T: Real>(t: &ComplexTensor<T>, axis: usize) -> ComplexTensor<T> {
    let n = t.shape()[axis];
    t.roll(axis, (n / 2) as isize)
}

pub fn ifftshift<T: Real>(t: &ComplexTensor<T>, axis: usize) -> ComplexTensor<T> {
    let n = t.shape()[axis];
    t.roll(axis, -((n / 2) as isize))
}

fn shift2<T: Real>(t: &ComplexTensor<T>, inverse: bool) -> ComplexTensor<T> {
    let nd = t.ndim();
    let f = if inverse { ifftshift } else { fftshift };
    f(&f(t, nd - 2), nd - 1)
}

fn centered<T: Real>(t: &ComplexTensor<T>, dir: Direction) -> Result<ComplexTensor<T>> {
    if t.ndim() < 2 {
        return dim_err("2-D transform needs two trailing axes");
    }
    let norm = Normalization::default_for(dir);
    let x = shift2(t, true);
    let x = dft_oracle_1d_with(&x, dir, norm);
    let x = dft_oracle_1d_with(&x.transpose_last2(), dir, norm).transpose_last2();
    Ok(shift2(&x, false))
}

/// Image `[..., H, W]` to DC-centred k-space (unnormalised forward DFT).
pub fn image_to_kspace<T: Real>(img: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    centered(img, Direction::Forward)
}

/// DC-centred k-space `[..., H, W]` to image (inverse DFT scaled by `1/(HW)`).
pub fn kspace_to_image<T: Real>(k: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    centered(k, Direction::Inverse)
}

/// Centred 1-D transform along the trailing axis.
pub fn centered_dft_1d<T: Real>(t: &ComplexTensor<T>, dir: Direction) -> ComplexTensor<T> {
    let ax = t.ndim() - 1;
    let x = ifftshift(t, ax);
    fftshift(&dft_oracle_1d_with(&x, dir, Normalization::default_for(dir)), ax)
}

/// Multi-coil k-space `[coils, H, W]` (DC centred).
#[derive(Clone, Debug, PartialEq)]
pub struct CoilKSpace<T> {
    pub data: ComplexTensor<T>,
    pub mask: Option<SamplingMask>,
    pub field_label: String,
    pub contrast_label: String,
}

impl<T: Real> CoilKSpace<T> {
    pub fn new(data: ComplexTensor<T>) -> Result<Self> {
        if data.ndim() != 3 {
            return dim_err(format!("coil k-space must be [coils, H, W], got {:?}", data.shape()));
        }
        Ok(Self {
            data,
            mask: None,
            field_label: String::new(),
            contrast_label: String::new(),
        })
    }

    pub fn coils(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Labels carried through serialisation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub field: String,
    pub contrast: String,
}

/// Zeroes unsampled columns in every coil; the mask is kept with the result.
pub fn apply_mask<T: Real>(k: &CoilKSpace<T>, m: &SamplingMask) -> Result<CoilKSpace<T>> {
    let zeros = ComplexTensor::zeros(k.data.shape());
    let inv: Vec<bool> = m.columns.iter().map(|&c| !c).collect();
    let data = select_columns(&k.data, &zeros, &inv)?;
    Ok(CoilKSpace {
        data,
        mask: Some(m.clone()),
        field_label: k.field_label.clone(),
        contrast_label: k.contrast_label.clone(),
    })
}

/// Per-coil inverse 2-D DFT of the (possibly undersampled) k-space.
pub fn zero_fill_recon<T: Real>(k: &CoilKSpace<T>) -> Result<ComplexTensor<T>> {
    kspace_to_image(&k.data)
}

/// Root-sum-of-squares over the coil axis of `[coils, H, W]`.
pub fn rss<T: Real>(imgs: &ComplexTensor<T>) -> Result<RealImage> {
    let s = imgs.shape();
    if s.len() != 3 || s[0] == 0 {
        return dim_err(format!("rss expects [coils >= 1, H, W], got {:?}", s));
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    let hw = h * w;
    let data = (0..hw)
        .map(|p| {
            (0..c)
                .map(|ch| {
                    let (a, b) = imgs.get(ch * hw + p);
                    let (a, b) = (a.f64(), b.f64());
                    a * a + b * b
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    RealImage::new(data, h, w)
}

/// `mask ? acquired : pred`, column-wise over the trailing axis.
pub fn data_consistency<T: Real>(
    pred_k: &ComplexTensor<T>,
    acquired_k: &ComplexTensor<T>,
    m: &SamplingMask,
) -> Result<ComplexTensor<T>> {
    select_columns(pred_k, acquired_k, &m.columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspace::equispaced_mask;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    #[test]
    fn shifts_invert_for_odd_lengths() {
        let t = ComplexTensor::<f64>::randn(&[3, 5], &mut rng(1));
        assert_eq!(ifftshift(&fftshift(&t, 1), 1), t);
        assert_eq!(fftshift(&ifftshift(&t, 0), 0), t);
    }

    #[test]
    fn kspace_round_trip_and_dc_position() {
        let img = ComplexTensor::<f64>::randn(&[2, 6, 8], &mut rng(2));
        let k = image_to_kspace(&img).unwrap();
        assert!(kspace_to_image(&k).unwrap().max_abs_diff(&img) < 1e-12);
        let ones = ComplexTensor::<f64>::from_fn(&[4, 4], |_| (1.0, 0.0));
        let k = image_to_kspace(&ones).unwrap();
        assert!((k.get(2 * 4 + 2).0 - 16.0).abs() < 1e-12);
        assert!(k.norm_sqr() - 256.0 < 1e-9);
    }

    #[test]
    fn mask_application() {
        let k = CoilKSpace::new(ComplexTensor::<f64>::randn(&[4, 16, 64], &mut rng(3))).unwrap();
        let full = apply_mask(&k, &SamplingMask::full(64)).unwrap();
        assert_eq!(full.data, k.data);
        let none = SamplingMask {
            columns: vec![false; 64],
            acceleration: 4,
            center_fraction: 0.0,
        };
        assert_eq!(apply_mask(&k, &none).unwrap().data.max_abs(), 0.0);
        let m = equispaced_mask(64, 4, 1).unwrap();
        let once = apply_mask(&k, &m).unwrap();
        assert_eq!(apply_mask(&once, &m).unwrap().data, once.data);
        let ratio = once.data.norm_sqr() / k.data.norm_sqr();
        assert!((ratio - m.sampled_fraction()).abs() < 0.05, "{}", ratio);
        assert!(apply_mask(&k, &equispaced_mask(32, 4, 1).unwrap()).is_err());
    }

    #[test]
    fn rss_cases() {
        let z = ComplexTensor::<f64>::randn(&[1, 3, 3], &mut rng(4));
        let r = rss(&z).unwrap();
        for (p, v) in r.data.iter().enumerate() {
            let (a, b) = z.get(p);
            assert!((v - (a * a + b * b).sqrt()).abs() < 1e-15);
        }
        let two = ComplexTensor::new([z.re(), z.re()].concat(), [z.im(), z.im()].concat(), &[2, 3, 3]).unwrap();
        let r2 = rss(&two).unwrap();
        for (a, b) in r2.data.iter().zip(&r.data) {
            assert!((a - 2f64.sqrt() * b).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_cases() {
        let p = ComplexTensor::<f64>::randn(&[2, 4, 8], &mut rng(5));
        let a = ComplexTensor::<f64>::randn(&[2, 4, 8], &mut rng(6));
        assert_eq!(data_consistency(&p, &a, &SamplingMask::full(8)).unwrap(), a);
        let none = SamplingMask {
            columns: vec![false; 8],
            acceleration: 4,
            center_fraction: 0.0,
        };
        assert_eq!(data_consistency(&p, &a, &none).unwrap(), p);
        let m = equispaced_mask(8, 2, 0).unwrap();
        let once = data_consistency(&p, &a, &m).unwrap();
        assert_eq!(data_consistency(&once, &a, &m).unwrap(), once);
    }
}
