//! Dense row-major `f64` matrices, sized for template-scale linear algebra.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::math;
use crate::random;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Returns `None` when rows are ragged
    /// or empty.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let r = rows.len();
        if r == 0 {
            return None;
        }
        let c = rows[0].len();
        if c == 0 || rows.iter().any(|row| row.len() != c) {
            return None;
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Some(Matrix { rows: r, cols: c, data })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }

    /// Row-major backing slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Rank-one update `self += u · vᵀ`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        assert_eq!(self.rows, u.len(), "outer product row mismatch");
        assert_eq!(self.cols, v.len(), "outer product col mismatch");
        for (r, &ur) in u.iter().enumerate() {
            if ur == 0.0 {
                continue;
            }
            for (dst, &vc) in self.row_mut(r).iter_mut().zip(v) {
                *dst += ur * vc;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `M · x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `xᵀ · M` for a row vector `x`.
    pub fn vecmat(x: &[f64], m: &Matrix) -> Vec<f64> {
        assert_eq!(m.rows, x.len(), "vecmat dimension mismatch");
        let mut out = vec![0.0; m.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &mij) in out.iter_mut().zip(m.row(i)) {
                *o += xi * mij;
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// Largest `|MᵀM − I|` entry; the orthogonality defect.
    pub fn orthogonality_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "defect only defined for square M");
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                // Column dot product of MᵀM = rows of Mᵀ = columns of M.
                let mut s = 0.0;
                for r in 0..n {
                    s += self.get(r, i) * self.get(r, j);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                let d = math::abs(s - target);
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Determinant via LU decomposition with partial pivoting.
    pub fn det(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "det of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut pivot = col;
            for r in col + 1..n {
                if math::abs(a.get(r, col)) > math::abs(a.get(pivot, col)) {
                    pivot = r;
                }
            }
            let p = a.get(pivot, col);
            if p == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for c in 0..n {
                    let tmp = a.get(col, c);
                    a.set(col, c, a.get(pivot, c));
                    a.set(pivot, c, tmp);
                }
                det = -det;
            }
            det *= p;
            for r in col + 1..n {
                let factor = a.get(r, col) / p;
                if factor == 0.0 {
                    continue;
                }
                for c in col..n {
                    let v = a.get(r, c) - factor * a.get(col, c);
                    a.set(r, c, v);
                }
            }
        }
        det
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Samples a uniformly random orthogonal matrix.
///
/// A standard-normal matrix is row-orthonormalized by Gram-Schmidt with a
/// re-orthogonalization pass; keeping the diagonal of the triangular factor
/// positive makes the factorization canonical, so the result is
/// Haar-distributed. Degenerate draws (numerically dependent rows) are
/// rejected and resampled.
pub fn haar_orthogonal<R: RngCore + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    assert!(dim > 0, "empty matrix");
    'resample: loop {
        let mut m = Matrix::from_fn(dim, dim, |_, _| random::standard_normal(rng));
        for i in 0..dim {
            for _pass in 0..2 {
                for j in 0..i {
                    let r = dot(m.row(i), m.row(j));
                    let (head, tail) = m.data.split_at_mut(i * dim);
                    let qi = &mut tail[..dim];
                    let qj = &head[j * dim..j * dim + dim];
                    for (x, &y) in qi.iter_mut().zip(qj) {
                        *x -= r * y;
                    }
                }
            }
            let norm = math::sqrt(dot(m.row(i), m.row(i)));
            if norm < 1e-12 {
                continue 'resample;
            }
            for x in m.row_mut(i) {
                *x /= norm;
            }
        }
        return m;
    }
}
