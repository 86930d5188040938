//! Complex matrix products on split planes, built from four real GEMMs.

use crate::scalar::Real;

/// Strided view of a complex matrix, optionally conjugated.
#[derive(Clone, Copy)]
pub(crate) struct CMat<'a, T> {
    pub re: &'a [T],
    pub im: &'a [T],
    pub rs: usize,
    pub cs: usize,
    pub conj: bool,
}

impl<'a, T> CMat<'a, T> {
    /// Row-major `rows x cols` matrix.
    pub fn rows(re: &'a [T], im: &'a [T], cols: usize) -> Self {
        CMat {
            re,
            im,
            rs: cols,
            cs: 1,
            conj: false,
        }
    }

    /// Transposed view of a row-major matrix with `cols` columns.
    pub fn rows_t(re: &'a [T], im: &'a [T], cols: usize) -> Self {
        CMat {
            re,
            im,
            rs: 1,
            cs: cols,
            conj: false,
        }
    }

    pub fn conj(mut self) -> Self {
        self.conj = !self.conj;
        self
    }

    fn check(&self, rows: usize, cols: usize) {
        if rows == 0 || cols == 0 {
            return;
        }
        let last = (rows - 1) * self.rs + (cols - 1) * self.cs;
        assert!(last < self.re.len() && last < self.im.len(), "cgemm operand out of bounds");
    }
}

/// `C (+)= A * B` for an `m x k` matrix `A` and `k x n` matrix `B`; `C` is
/// row-major `m x n` with leading stride `ldc`.
pub(crate) fn cgemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: CMat<'_, T>,
    b: CMat<'_, T>,
    c_re: &mut [T],
    c_im: &mut [T],
    ldc: usize,
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(ldc >= n);
    assert!((m - 1) * ldc + n <= c_re.len() && (m - 1) * ldc + n <= c_im.len());
    let beta0 = if accumulate { T::one() } else { T::zero() };
    if k == 0 {
        if !accumulate {
            for r in 0..m {
                c_re[r * ldc..r * ldc + n].iter_mut().for_each(|v| *v = T::zero());
                c_im[r * ldc..r * ldc + n].iter_mut().for_each(|v| *v = T::zero());
            }
        }
        return;
    }
    a.check(m, k);
    b.check(k, n);
    let sa = if a.conj { -T::one() } else { T::one() };
    let sb = if b.conj { -T::one() } else { T::one() };
    let (ar, ac) = (a.rs as isize, a.cs as isize);
    let (br, bc) = (b.rs as isize, b.cs as isize);
    let ldc = ldc as isize;
    // SAFETY: operand extents were bounds-checked above and C does not alias A or B.
    unsafe {
        T::gemm(m, k, n, T::one(), a.re.as_ptr(), ar, ac, b.re.as_ptr(), br, bc, beta0, c_re.as_mut_ptr(), ldc, 1);
        T::gemm(m, k, n, -(sa * sb), a.im.as_ptr(), ar, ac, b.im.as_ptr(), br, bc, T::one(), c_re.as_mut_ptr(), ldc, 1);
        T::gemm(m, k, n, sb, a.re.as_ptr(), ar, ac, b.im.as_ptr(), br, bc, beta0, c_im.as_mut_ptr(), ldc, 1);
        T::gemm(m, k, n, sa, a.im.as_ptr(), ar, ac, b.re.as_ptr(), br, bc, T::one(), c_im.as_mut_ptr(), ldc, 1);
    }
}
