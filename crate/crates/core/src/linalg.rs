//! Dense row-major matrices and the handful of factorizations the rest of
//! the crate needs (LU determinant/inverse for small Gram matrices, Jacobi
//! eigenvalues for validation).
//!
//! Matrices here are tiny (B×B kernel matrices, M×M Gram matrices), so a
//! plain `Vec<f64>` with explicit loops is both the simplest and the most
//! reproducible choice: results are bitwise deterministic for a fixed input.

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row vectors. Panics on ragged input; callers
    /// validate user-supplied data before reaching this point.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest absolute difference from the transpose; 0 for symmetric.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// a += s * b
#[inline]
pub fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

pub fn scale(a: &mut [f64], s: f64) {
    for x in a.iter_mut() {
        *x *= s;
    }
}

/// LU decomposition with partial pivoting. Returns (combined LU, pivot
/// permutation, sign of the permutation), or None if the matrix is exactly
/// singular at working precision.
fn lu_decompose(m: &Mat) -> Option<(Mat, Vec<usize>, f64)> {
    assert!(m.is_square());
    let n = m.rows();
    let mut lu = m.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let mut best = k;
        let mut best_abs = lu.get(k, k).abs();
        for i in (k + 1)..n {
            let a = lu.get(i, k).abs();
            if a > best_abs {
                best = i;
                best_abs = a;
            }
        }
        if best_abs == 0.0 {
            return None;
        }
        if best != k {
            for j in 0..n {
                let t = lu.get(k, j);
                lu.set(k, j, lu.get(best, j));
                lu.set(best, j, t);
            }
            piv.swap(k, best);
            sign = -sign;
        }
        let pivot = lu.get(k, k);
        for i in (k + 1)..n {
            let f = lu.get(i, k) / pivot;
            lu.set(i, k, f);
            for j in (k + 1)..n {
                lu.add_to(i, j, -f * lu.get(k, j));
            }
        }
    }
    Some((lu, piv, sign))
}

/// Determinant via LU with partial pivoting. Exactly singular input gives 0.
pub fn det(m: &Mat) -> f64 {
    match lu_decompose(m) {
        None => 0.0,
        Some((lu, _, sign)) => {
            let mut d = sign;
            for k in 0..lu.rows() {
                d *= lu.get(k, k);
            }
            d
        }
    }
}

/// Matrix inverse via LU; None when singular.
pub fn inverse(m: &Mat) -> Option<Mat> {
    let n = m.rows();
    let (lu, piv, _) = lu_decompose(m)?;
    let mut inv = Mat::zeros(n, n);
    let mut col = vec![0.0f64; n];
    for c in 0..n {
        for (i, x) in col.iter_mut().enumerate() {
            *x = if piv[i] == c { 1.0 } else { 0.0 };
        }
        // forward substitution (unit lower triangle)
        for i in 0..n {
            for k in 0..i {
                col[i] -= lu.get(i, k) * col[k];
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                col[i] -= lu.get(i, k) * col[k];
            }
            col[i] /= lu.get(i, i);
        }
        for i in 0..n {
            inv.set(i, c, col[i]);
        }
    }
    Some(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Vec<f64> {
    assert!(m.is_square());
    let n = m.rows();
    let mut a = m.clone();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j).abs();
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}
