use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{dim_err, Result};
use crate::scalar::Real;

/// Complex n-dimensional array stored as two row-major real planes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor<T> {
    re: Vec<T>,
    im: Vec<T>,
    shape: Vec<usize>,
}

impl<T: Real> ComplexTensor<T> {
    pub fn new(re: Vec<T>, im: Vec<T>, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if re.len() != n || im.len() != n {
            return dim_err(format!(
                "planes of length {}/{} do not match shape {:?} ({} elements)",
                re.len(),
                im.len(),
                shape,
                n
            ));
        }
        Ok(Self {
            re,
            im,
            shape: shape.to_vec(),
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            re: vec![T::zero(); n],
            im: vec![T::zero(); n],
            shape: shape.to_vec(),
        }
    }

    pub fn from_real(re: Vec<T>, shape: &[usize]) -> Result<Self> {
        let im = vec![T::zero(); re.len()];
        Self::new(re, im, shape)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> (T, T)) -> Self {
        let n: usize = shape.iter().product();
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = f(i);
            re.push(a);
            im.push(b);
        }
        Self {
            re,
            im,
            shape: shape.to_vec(),
        }
    }

    /// Standard complex normal entries: independent N(0, 1) real and imaginary parts.
    pub fn randn<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        Self::from_fn(shape, |_| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            (T::of(a), T::of(b))
        })
    }

    pub fn rand_uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let dist = Uniform::new_inclusive(-bound, bound);
        Self::from_fn(shape, |_| (T::of(dist.sample(rng)), T::of(dist.sample(rng))))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.re.len()
    }

    pub fn re(&self) -> &[T] {
        &self.re
    }

    pub fn im(&self) -> &[T] {
        &self.im
    }

    pub fn re_mut(&mut self) -> &mut [T] {
        &mut self.re
    }

    pub fn im_mut(&mut self) -> &mut [T] {
        &mut self.im
    }

    pub fn planes_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.re, &mut self.im)
    }

    pub fn into_planes(self) -> (Vec<T>, Vec<T>, Vec<usize>) {
        (self.re, self.im, self.shape)
    }

    /// Size of the trailing dimension (1 for scalars).
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn get(&self, i: usize) -> (T, T) {
        (self.re[i], self.im[i])
    }

    pub fn set(&mut self, i: usize, v: (T, T)) {
        self.re[i] = v.0;
        self.im[i] = v.1;
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.numel() {
            return dim_err(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn cast<U: Real>(&self) -> ComplexTensor<U> {
        ComplexTensor {
            re: self.re.iter().map(|v| U::of(v.f64())).collect(),
            im: self.im.iter().map(|v| U::of(v.f64())).collect(),
            shape: self.shape.clone(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            re: self.re.iter().map(|&v| v * s).collect(),
            im: self.im.iter().map(|&v| v * s).collect(),
            shape: self.shape.clone(),
        }
    }

    /// Multiplication by a complex scalar.
    pub fn mul_scalar(&self, a: T, b: T) -> Self {
        Self::from_fn(&self.shape, |i| {
            let (x, y) = self.get(i);
            (a * x - b * y, a * y + b * x)
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return dim_err(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        Ok(Self {
            re: self.re.iter().zip(&other.re).map(|(&a, &b)| f(a, b)).collect(),
            im: self.im.iter().zip(&other.im).map(|(&a, &b)| f(a, b)).collect(),
            shape: self.shape.clone(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            *a += *b;
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            *a += *b;
        }
    }

    pub fn fill_zero(&mut self) {
        self.re.iter_mut().for_each(|v| *v = T::zero());
        self.im.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Element-wise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.iter().map(|&v| -v).collect(),
            shape: self.shape.clone(),
        }
    }

    pub fn abs(&self) -> Vec<T> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| a.hypot(b))
            .collect()
    }

    pub fn arg(&self) -> Vec<T> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| b.atan2(a))
            .collect()
    }

    /// Sum of squared moduli.
    pub fn norm_sqr(&self) -> T {
        self.re.iter().map(|&v| v * v).sum::<T>() + self.im.iter().map(|&v| v * v).sum::<T>()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Largest element modulus.
    pub fn max_abs(&self) -> T {
        self.abs().into_iter().fold(T::zero(), T::max)
    }

    /// Largest modulus of the element-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        (0..self.numel())
            .map(|i| (self.re[i] - other.re[i]).hypot(self.im[i] - other.im[i]))
            .fold(T::zero(), T::max)
    }

    pub fn all_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    /// Swap the two trailing axes.
    pub fn transpose_last2(&self) -> Self {
        let nd = self.ndim();
        assert!(nd >= 2, "transpose_last2 needs at least two dims");
        let (h, w) = (self.shape[nd - 2], self.shape[nd - 1]);
        let outer = self.numel() / (h * w).max(1);
        let mut out = Self::zeros(&self.shape);
        out.shape[nd - 2] = w;
        out.shape[nd - 1] = h;
        for o in 0..outer {
            let base = o * h * w;
            for r in 0..h {
                for c in 0..w {
                    out.re[base + c * h + r] = self.re[base + r * w + c];
                    out.im[base + c * h + r] = self.im[base + r * w + c];
                }
            }
        }
        out
    }

    /// Cyclic shift by `shift` positions along `axis` (numpy `roll` semantics).
    pub fn roll(&self, axis: usize, shift: isize) -> Self {
        let n = self.shape[axis];
        if n == 0 {
            return self.clone();
        }
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let s = shift.rem_euclid(n as isize) as usize;
        let mut out = Self::zeros(&self.shape);
        for o in 0..outer {
            for i in 0..n {
                let j = (i + s) % n;
                let src = (o * n + i) * inner;
                let dst = (o * n + j) * inner;
                out.re[dst..dst + inner].copy_from_slice(&self.re[src..src + inner]);
                out.im[dst..dst + inner].copy_from_slice(&self.im[src..src + inner]);
            }
        }
        out
    }

    /// Complex inner product without conjugation, `sum_i a_i * b_i`.
    pub fn dot_bilinear(&self, other: &Self) -> (T, T) {
        let mut re = T::zero();
        let mut im = T::zero();
        for i in 0..self.numel() {
            re += self.re[i] * other.re[i] - self.im[i] * other.im[i];
            im += self.re[i] * other.im[i] + self.im[i] * other.re[i];
        }
        (re, im)
    }

    /// Frobenius inner product treating re/im as independent real coordinates.
    pub fn dot_real(&self, other: &Self) -> T {
        self.re
            .iter()
            .zip(&other.re)
            .chain(self.im.iter().zip(&other.im))
            .map(|(&a, &b)| a * b)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plane_lengths_must_match_shape() {
        assert!(ComplexTensor::<f64>::new(vec![0.0; 6], vec![0.0; 6], &[2, 3]).is_ok());
        assert!(ComplexTensor::<f64>::new(vec![0.0; 6], vec![0.0; 5], &[2, 3]).is_err());
        assert!(ComplexTensor::<f64>::new(vec![0.0; 4], vec![0.0; 4], &[2, 3]).is_err());
    }

    #[test]
    fn transpose_twice_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = ComplexTensor::<f64>::randn(&[2, 3, 5], &mut rng);
        let tt = t.transpose_last2();
        assert_eq!(tt.shape(), &[2, 5, 3]);
        assert_eq!(tt.get(15 + 4 * 3 + 2), t.get(15 + 2 * 5 + 4));
        assert_eq!(tt.transpose_last2(), t);
    }

    #[test]
    fn roll_matches_index_shift() {
        let t = ComplexTensor::<f64>::from_fn(&[2, 4], |i| (i as f64, 0.0));
        let r = t.roll(1, 1);
        assert_eq!(r.re(), &[3.0, 0.0, 1.0, 2.0, 7.0, 4.0, 5.0, 6.0]);
        assert_eq!(r.roll(1, -1), t);
        let r0 = t.roll(0, 1);
        assert_eq!(r0.re(), &[4.0, 5.0, 6.0, 7.0, 0.0, 1.0, 2.0, 3.0]);
    }
}
