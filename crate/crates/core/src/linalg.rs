//! Small dense linear algebra kernels: row-major matrices, LU with partial
//! pivoting, and a one-sided Jacobi SVD.
//!
//! Problem sizes here are modest (finite-difference meshes of a few hundred
//! points at most), so everything is dense and allocation-friendly rather than
//! cache-tuned.

use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v` without materializing the transpose.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: T, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        }
    }

    pub fn norm_fro(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|a| a.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, a| m.max(a.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm2<T: Real>(a: &[T]) -> T {
    // scaled to avoid overflow on large gradients
    let m = norm_inf(a);
    if m == T::zero() || !m.is_finite() {
        return m;
    }
    m * a.iter().map(|&x| (x / m) * (x / m)).sum::<T>().sqrt()
}

#[inline]
pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `a + s * b`.
pub fn axpy<T: Real>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn scale<T: Real>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

/// Returns `v / ‖v‖₂`, or `None` for the zero vector.
pub fn normalized<T: Real>(v: &[T]) -> Option<Vec<T>> {
    let n = norm2(v);
    (n > T::zero() && n.is_finite()).then(|| scale(v, T::one() / n))
}

/// Flips `v` so that its first entry of non-negligible magnitude is positive.
pub fn sign_normalize<T: Real>(v: &mut [T]) {
    let scale = norm_inf(v);
    let cut = scale * T::lit(1e-12);
    if let Some(&first) = v.iter().find(|x| x.abs() > cut) {
        if first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factorizes `a`. Returns `None` when a pivot is negligible relative to
    /// the largest entry (numerically singular).
    pub fn new(a: &Matrix<T>) -> Option<Self> {
        assert!(a.is_square());
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let cut = a.max_abs() * T::epsilon() * T::lit(n.max(1) as f64);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -T::one()), |acc, c| if c.1 > acc.1 { c } else { acc });
            if !(pmax > cut) {
                return None;
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let t = lu[(k, j)];
                        lu[(i, j)] -= f * t;
                    }
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ` of an `m × n` matrix.
///
/// Singular values are sorted in decreasing order. `u` has `n` columns; a
/// column belonging to a zero singular value is left as zeros.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

impl<T: Real> Svd<T> {
    /// One-sided (Hestenes) Jacobi SVD. Wide matrices are padded with zero
    /// rows so that the right singular vectors span the whole input space.
    pub fn new(a: &Matrix<T>) -> Self {
        let (m0, n) = (a.rows(), a.cols());
        let m = m0.max(n);
        // columns stored contiguously for the rotations
        let mut cols: Vec<Vec<T>> = (0..n)
            .map(|j| {
                let mut c = a.column(j);
                c.resize(m, T::zero());
                c
            })
            .collect();
        let mut v = Matrix::<T>::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha = dot(&cols[p], &cols[p]);
                    let beta = dot(&cols[q], &cols[q]);
                    let gamma = dot(&cols[p], &cols[q]);
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for k in 0..m {
                        let xp = cols[p][k];
                        let xq = cols[q][k];
                        cols[p][k] = c * xp - s * xq;
                        cols[q][k] = s * xp + c * xq;
                    }
                    for k in 0..n {
                        let vp = v[(k, p)];
                        let vq = v[(k, q)];
                        v[(k, p)] = c * vp - s * vq;
                        v[(k, q)] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let norms: Vec<T> = cols.iter().map(|c| norm2(c)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            norms[j]
                .partial_cmp(&norms[i])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut u = Matrix::zeros(m0, n);
        let mut vs = Matrix::zeros(n, n);
        let mut s = Vec::with_capacity(n);
        for (jj, &j) in order.iter().enumerate() {
            let sigma = norms[j];
            s.push(sigma);
            if sigma > T::zero() {
                for i in 0..m0 {
                    u[(i, jj)] = cols[j][i] / sigma;
                }
            }
            for i in 0..n {
                vs[(i, jj)] = v[(i, j)];
            }
        }
        Self {
            u,
            singular_values: s,
            v: vs,
        }
    }

    pub fn sigma_max(&self) -> T {
        self.singular_values
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }

    pub fn sigma_min(&self) -> T {
        self.singular_values.last().copied().unwrap_or_else(T::zero)
    }

    /// Minimum-norm least-squares solution of `A x ≈ b`, discarding singular
    /// values below `rcond * σ_max`.
    pub fn solve(&self, b: &[T], rcond: T) -> Vec<T> {
        let n = self.v.rows();
        let cut = rcond * self.sigma_max();
        let mut x = vec![T::zero(); n];
        for (j, &sigma) in self.singular_values.iter().enumerate() {
            if !(sigma > cut) || sigma == T::zero() {
                continue;
            }
            let coef = (0..self.u.rows()).map(|i| self.u[(i, j)] * b[i]).sum::<T>() / sigma;
            for i in 0..n {
                x[i] += coef * self.v[(i, j)];
            }
        }
        x
    }

    /// Right singular vector of the smallest singular value.
    pub fn smallest_right_vector(&self) -> Vec<T> {
        self.v.column(self.v.cols() - 1)
    }
}

/// Solves `A x = b`, falling back to the SVD least-squares solution when LU
/// reports the matrix singular.
pub fn solve_robust<T: Real>(a: &Matrix<T>, b: &[T]) -> Vec<T> {
    match Lu::new(a) {
        Some(lu) => {
            let x = lu.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return x;
            }
            Svd::new(a).solve(b, T::epsilon() * T::lit(a.rows() as f64))
        }
        None => Svd::new(a).solve(b, T::epsilon() * T::lit(a.rows() as f64)),
    }
}
