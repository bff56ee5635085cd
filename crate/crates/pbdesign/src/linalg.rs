//! Small dense symmetric matrices and the Cholesky routines used throughout.
//!
//! Every matrix here has order at most a few hundred (usually the number of
//! treatments), so plain row-major `Vec<f64>` storage and textbook loops are
//! the right tool.

use crate::error::{Error, Result};

/// Relative pivot tolerance: a Cholesky pivot at or below this fraction of
/// the largest diagonal entry marks the matrix as singular.
pub(crate) const PIVOT_REL_TOL: f64 = 1e-10;

/// Dense symmetric matrix with exact mirrored storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds a matrix from full rows, rejecting non-square, asymmetric or
    /// non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "expected {n}x{n} entries"
            )));
        }
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i},{j}) is not finite"
                    )));
                }
                if rows[j][i] != v {
                    return Err(Error::InvalidArgument(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
                data[i * n + j] = v;
            }
        }
        Ok(SymMatrix { n, data })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both (i,j) and (j,i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        SymMatrix { n, data }
    }

    /// Largest absolute difference to another matrix of the same order.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n, "orders differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Cholesky factorization; `None` when a pivot falls at or below the
    /// relative tolerance, i.e. the matrix is singular or indefinite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let mut l = self.data.clone();
        if cholesky_in_place(&mut l, self.n) {
            Some(Cholesky { n: self.n, l })
        } else {
            None
        }
    }
}

/// In-place lower Cholesky on row-major `a` (order `n`); the strict upper
/// triangle is left untouched. Returns false on a failed pivot.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    cholesky_det_in_place(a, n).is_some()
}

/// Same factorization, returning the determinant as the product of the
/// pivots before their square roots are taken (so a 1x1 determinant is the
/// entry itself, exactly).
pub(crate) fn cholesky_det_in_place(a: &mut [f64], n: usize) -> Option<f64> {
    let mut max_diag = 0.0f64;
    for i in 0..n {
        max_diag = max_diag.max(a[i * n + i].abs());
    }
    let tol = PIVOT_REL_TOL * max_diag;
    let mut det = 1.0;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for p in 0..j {
                sum -= a[i * n + p] * a[j * n + p];
            }
            if i == j {
                if sum <= tol {
                    return None;
                }
                det *= sum;
                a[i * n + i] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    Some(det)
}

/// Forward substitution L y = b, writing into `y`.
pub(crate) fn forward_solve(l: &[f64], n: usize, b: &[f64], y: &mut [f64]) {
    for i in 0..n {
        let mut sum = b[i];
        for p in 0..i {
            sum -= l[i * n + p] * y[p];
        }
        y[i] = sum / l[i * n + i];
    }
}

/// Back substitution L^T x = y, in place.
pub(crate) fn back_solve(l: &[f64], n: usize, x: &mut [f64]) {
    for ii in 0..n {
        let i = n - 1 - ii;
        let mut sum = x[i];
        for p in (i + 1)..n {
            sum -= l[p * n + i] * x[p];
        }
        x[i] = sum / l[i * n + i];
    }
}

/// Lower Cholesky factor of a positive definite symmetric matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        forward_solve(&self.l, self.n, b, &mut x);
        back_solve(&self.l, self.n, &mut x);
        x
    }

    /// Determinant of A, the product of the squared pivots.
    pub fn det(&self) -> f64 {
        let mut d = 1.0;
        for i in 0..self.n {
            let p = self.l[i * self.n + i];
            d *= p * p;
        }
        d
    }

    pub fn inverse(&self) -> SymMatrix {
        let mut inv = SymMatrix::zeros(self.n);
        let mut col = vec![0.0; self.n];
        for j in 0..self.n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            let mut x = vec![0.0; self.n];
            forward_solve(&self.l, self.n, &col, &mut x);
            back_solve(&self.l, self.n, &mut x);
            for i in 0..self.n {
                inv.set(i, j, x[i]);
            }
        }
        // enforce exact mirror symmetry after the column-wise solves
        for i in 0..self.n {
            for j in 0..i {
                let v = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, v);
            }
        }
        inv
    }
}
