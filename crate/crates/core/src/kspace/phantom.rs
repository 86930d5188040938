use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ctensor::ComplexTensor;
use crate::error::{config_err, Result};

use super::{image_to_kspace, CoilKSpace};

/// A synthetic multi-coil acquisition and its ground truth.
#[derive(Clone, Debug)]
pub struct Phantom {
    /// Fully sampled k-space `[coils, H, W]`.
    pub kspace: CoilKSpace<f64>,
    /// Complex object `[H, W]`, maximum modulus 1.
    pub image: ComplexTensor<f64>,
    /// `sensitivities * image`, `[coils, H, W]`.
    pub coil_images: ComplexTensor<f64>,
    /// Coil maps with `sum_c |s_c|^2 = 1` at every pixel.
    pub sensitivities: ComplexTensor<f64>,
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    rot: f64,
    value: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rot.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (c * dx + s * dy) / self.a;
        let v = (-s * dx + c * dy) / self.b;
        u * u + v * v <= 1.0
    }
}

fn ellipses(rng: &mut ChaCha8Rng) -> Vec<Ellipse> {
    let a = rng.gen_range(0.70..0.85);
    let b = rng.gen_range(0.80..0.92);
    let mut out = vec![
        Ellipse { cx: 0.0, cy: 0.0, a, b, rot: rng.gen_range(-0.2..0.2), value: 1.0 },
        Ellipse { cx: 0.0, cy: 0.0, a: a * 0.9, b: b * 0.92, rot: 0.0, value: -0.6 },
    ];
    out[1].rot = out[0].rot;
    let n = rng.gen_range(4..9);
    for _ in 0..n {
        let r = rng.gen_range(0.0..0.5);
        let t = rng.gen_range(0.0..2.0 * PI);
        out.push(Ellipse {
            cx: r * t.cos() * a,
            cy: r * t.sin() * b,
            a: rng.gen_range(0.05..0.25),
            b: rng.gen_range(0.05..0.3),
            rot: rng.gen_range(0.0..PI),
            value: rng.gen_range(-0.3..0.45),
        });
    }
    out
}

/// Piecewise-ellipse magnitude with a smooth low-order polynomial phase,
/// seen through smooth coil sensitivities.
pub fn phantom(h: usize, w: usize, coils: usize, seed: u64) -> Result<Phantom> {
    if h < 16 || w < 16 {
        return config_err(format!("phantom needs H, W >= 16, got {}x{}", h, w));
    }
    if coils == 0 {
        return config_err("phantom needs at least one coil");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = ellipses(&mut rng);
    let ph: Vec<f64> = (0..6)
        .map(|i| if i == 0 { rng.gen_range(-PI..PI) } else { rng.gen_range(-0.8..0.8) })
        .collect();
    let coord = |i: usize, n: usize| 2.0 * (i as f64 + 0.5) / n as f64 - 1.0;

    let mut image = ComplexTensor::<f64>::from_fn(&[h, w], |p| {
        let (y, x) = (coord(p / w, h), coord(p % w, w));
        let mag: f64 = shapes.iter().filter(|e| e.contains(x, y)).map(|e| e.value).sum();
        let mag = mag.max(0.0);
        let phase = ph[0] + ph[1] * x + ph[2] * y + ph[3] * x * y + ph[4] * x * x + ph[5] * y * y;
        (mag * phase.cos(), mag * phase.sin())
    });
    let peak = image.max_abs();
    if peak > 0.0 {
        image = image.scale(1.0 / peak);
    }

    let sensitivities = if coils == 1 {
        ComplexTensor::from_fn(&[1, h, w], |_| (1.0, 0.0))
    } else {
        let centres: Vec<(f64, f64, f64, f64)> = (0..coils)
            .map(|c| {
                let t = 2.0 * PI * c as f64 / coils as f64 + rng.gen_range(-0.3..0.3);
                (1.2 * t.cos(), 1.2 * t.sin(), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let mut raw = ComplexTensor::from_fn(&[coils, h, w], |i| {
            let (c, p) = (i / (h * w), i % (h * w));
            let (y, x) = (coord(p / w, h), coord(p % w, w));
            let (cx, cy, px, py) = centres[c];
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            let m = (-d2 / (2.0 * 0.8 * 0.8)).exp();
            let phase = px * x + py * y;
            (m * phase.cos(), m * phase.sin())
        });
        let hw = h * w;
        let norms: Vec<f64> = (0..hw)
            .map(|p| (0..coils).map(|c| {
                let (a, b) = raw.get(c * hw + p);
                a * a + b * b
            }).sum::<f64>().sqrt())
            .collect();
        let (re, im) = raw.planes_mut();
        for i in 0..coils * hw {
            re[i] /= norms[i % hw];
            im[i] /= norms[i % hw];
        }
        raw
    };

    let hw = h * w;
    let coil_images = ComplexTensor::from_fn(&[coils, h, w], |i| {
        let (sa, sb) = sensitivities.get(i);
        let (a, b) = image.get(i % hw);
        (sa * a - sb * b, sa * b + sb * a)
    });
    let mut kspace = CoilKSpace::new(image_to_kspace(&coil_images)?)?;
    kspace.field_label = "synthetic".into();
    kspace.contrast_label = "ellipse".into();
    Ok(Phantom {
        kspace,
        image,
        coil_images,
        sensitivities,
    })
}
