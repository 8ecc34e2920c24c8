//! Small dense linear algebra: Householder QR and one-sided Jacobi SVD.
//!
//! Feature systems are tall and narrow (thousands of rows, tens of columns), so the
//! SVD is computed on the triangular factor of a QR reduction. Singular values of
//! `R` equal those of `A` and the right singular vectors are shared.

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// Builds a matrix whose columns are the given vectors (all of equal length).
    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged columns");
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows, keep.len());
        for i in 0..self.rows {
            for (jj, &j) in keep.iter().enumerate() {
                m[(i, jj)] = self[(i, j)];
            }
        }
        m
    }

    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(keep.len() * self.cols);
        for &i in keep {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: keep.len(), cols: self.cols, data }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale_column(&mut self, j: usize, s: T) {
        for i in 0..self.rows {
            self[(i, j)] = self[(i, j)] * s;
        }
    }

    pub fn column_norm(&self, j: usize) -> T {
        (0..self.rows).map(|i| self[(i, j)] * self[(i, j)]).sum::<T>().sqrt()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// In-place Householder reduction of `[A | extra]`. Returns the upper-triangular
/// `cols x cols` factor of `A` (zero-padded when `A` has fewer rows than columns) and
/// `Q^T * extra` truncated to `cols` rows.
fn householder<T: Scalar>(a: &Matrix<T>, extra: Option<&[T]>) -> (Matrix<T>, Vec<T>) {
    let (m, n) = (a.rows, a.cols);
    let mut w = a.clone();
    let mut b: Vec<T> = extra.map(<[T]>::to_vec).unwrap_or_default();
    let steps = n.min(m);
    for k in 0..steps {
        let mut alpha = T::zero();
        for i in k..m {
            alpha = alpha + w[(i, k)] * w[(i, k)];
        }
        let alpha = alpha.sqrt();
        if alpha == T::zero() {
            continue;
        }
        let sign = if w[(k, k)] < T::zero() { -T::one() } else { T::one() };
        let v0 = w[(k, k)] + sign * alpha;
        // v = [v0, w[k+1..m, k]]; H = I - 2 v v^T / (v^T v)
        let mut vtv = v0 * v0;
        for i in k + 1..m {
            vtv = vtv + w[(i, k)] * w[(i, k)];
        }
        let two = T::lit(2.0);
        for j in k + 1..n {
            let mut s = v0 * w[(k, j)];
            for i in k + 1..m {
                s = s + w[(i, k)] * w[(i, j)];
            }
            let f = two * s / vtv;
            w[(k, j)] = w[(k, j)] - f * v0;
            for i in k + 1..m {
                let vi = w[(i, k)];
                w[(i, j)] = w[(i, j)] - f * vi;
            }
        }
        if !b.is_empty() {
            let mut s = v0 * b[k];
            for i in k + 1..m {
                s = s + w[(i, k)] * b[i];
            }
            let f = two * s / vtv;
            b[k] = b[k] - f * v0;
            for i in k + 1..m {
                b[i] = b[i] - f * w[(i, k)];
            }
        }
        w[(k, k)] = -sign * alpha;
        for i in k + 1..m {
            w[(i, k)] = T::zero();
        }
    }
    let mut r = Matrix::zeros(n, n);
    for i in 0..steps {
        for j in i..n {
            r[(i, j)] = w[(i, j)];
        }
    }
    b.truncate(n);
    (r, b)
}

/// Upper-triangular factor `R` of a QR decomposition (`n x n`).
pub fn qr_r<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    householder(a, None).0
}

/// Singular value decomposition data: singular values (descending) and the matching
/// right singular vectors stored as columns of `v`.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

impl<T: Scalar> Svd<T> {
    pub fn right_vector(&self, k: usize) -> Vec<T> {
        self.v.column(k)
    }

    pub fn smallest(&self) -> (T, Vec<T>) {
        let k = self.singular_values.len() - 1;
        (self.singular_values[k], self.right_vector(k))
    }
}

/// One-sided Jacobi SVD of an arbitrary matrix (via its `R` factor when tall).
pub fn svd<T: Scalar>(a: &Matrix<T>) -> Svd<T> {
    let r = if a.rows > a.cols { qr_r(a) } else { pad_square(a) };
    jacobi_one_sided(r)
}

fn pad_square<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    let n = a.cols;
    let mut m = Matrix::zeros(n, n);
    for i in 0..a.rows.min(n) {
        for j in 0..n {
            m[(i, j)] = a[(i, j)];
        }
    }
    m
}

fn jacobi_one_sided<T: Scalar>(mut u: Matrix<T>) -> Svd<T> {
    let n = u.cols;
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v[(i, i)] = T::one();
    }
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = T::zero();
                for i in 0..u.rows {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    alpha = alpha + up * up;
                    beta = beta + uq * uq;
                    gamma = gamma + up * uq;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..u.rows {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = (0..n).map(|j| u.column_norm(j)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let singular_values = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = v.select_columns(&order);
    Svd { singular_values, v: v_sorted }
}

/// Least-squares solution of `A x ≈ b` for full-column-rank `A`.
pub fn lstsq<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    assert_eq!(a.rows, b.len());
    let (r, qtb) = householder(a, Some(b));
    back_substitute(&r, &qtb)
}

fn back_substitute<T: Scalar>(r: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = r.cols;
    let scale = (0..n).map(|i| r[(i, i)].abs()).fold(T::zero(), T::max);
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let d = r[(i, i)];
        if d.abs() <= scale * T::epsilon() * T::from_usize_lossy(n.max(1) * 10) || d == T::zero() {
            return None;
        }
        let mut s = b[i];
        for j in i + 1..n {
            s = s - r[(i, j)] * x[j];
        }
        x[i] = s / d;
    }
    Some(x)
}
