//! Dense complex matrices and the two rotation-based factorizations the
//! crate needs: a cyclic two-sided Jacobi eigensolver for Hermitian
//! matrices and a one-sided (Hestenes) Jacobi method for singular values.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::ComplexFloat;

use crate::error::{Error, Result};
use crate::C64;

/// Off-diagonal stopping threshold for the Jacobi sweeps, relative to the
/// Frobenius norm of the input.
pub const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>10.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// `u v*`
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.abs()).fold(0.0, f64::max)
    }

    /// `‖A − A*‖_F`
    pub fn hermitian_defect(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// `(A + A*) / 2`
    pub fn hermitian_part(&self) -> CMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Only the Hermitian part of `self` is used; callers are expected to
    /// check self-adjointness first. Eigenvalues are returned in ascending
    /// order with matching eigenvector columns.
    pub fn hermitian_eigen(&self) -> Result<SpectralData> {
        if !self.is_square() {
            return Err(Error::Dimension("eigendecomposition of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.hermitian_part();
        let mut v = CMatrix::identity(n);
        let scale = a.frobenius_norm();
        let threshold = JACOBI_TOL * scale.max(f64::MIN_POSITIVE);

        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) <= threshold {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let mag = apq.abs();
                    if mag <= f64::EPSILON * 1e-3 * scale {
                        continue;
                    }
                    let phase = apq / mag;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (2.0 * mag);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // J = diag(1, conj(phase)) · [[c, s], [-s, c]] on (p, q)
                    let jpp = C64::new(c, 0.0);
                    let jpq = C64::new(s, 0.0);
                    let jqp = -phase.conj() * s;
                    let jqq = phase.conj() * c;
                    rotate_columns(&mut a, p, q, jpp, jpq, jqp, jqq);
                    rotate_rows_adjoint(&mut a, p, q, jpp, jpq, jqp, jqq);
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    let dp = a[(p, p)].re;
                    let dq = a[(q, q)].re;
                    a[(p, p)] = C64::new(dp, 0.0);
                    a[(q, q)] = C64::new(dq, 0.0);
                    rotate_columns(&mut v, p, q, jpp, jpq, jqp, jqq);
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
        let eigenvectors = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
        Ok(SpectralData {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Singular values in descending order (one-sided Jacobi on the
    /// columns of `self`).
    pub fn singular_values(&self) -> Vec<f64> {
        // Work on columns of the taller orientation.
        let work = if self.rows >= self.cols {
            self.clone()
        } else {
            self.adjoint()
        };
        let (m, n) = (work.rows, work.cols);
        let mut cols: Vec<Vec<C64>> = (0..n).map(|j| work.column(j)).collect();
        let eps = f64::EPSILON;

        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for i in 0..n {
                for j in (i + 1)..n {
                    let alpha: f64 = cols[i].iter().map(|z| z.norm_sqr()).sum();
                    let beta: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum();
                    let gamma: C64 = cols[i]
                        .iter()
                        .zip(&cols[j])
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    let g = gamma.abs();
                    if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for k in 0..m {
                        let a = cols[i][k];
                        let b = cols[j][k] * phase.conj();
                        cols[i][k] = a * c - b * s;
                        cols[j][k] = (a * s + b * c) * phase;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    pub fn trace_norm(&self) -> f64 {
        self.singular_values().iter().sum()
    }

    pub fn op_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows {
        for j in 0..a.cols {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

// A ← A J restricted to columns p, q.
fn rotate_columns(a: &mut CMatrix, p: usize, q: usize, jpp: C64, jpq: C64, jqp: C64, jqq: C64) {
    for k in 0..a.rows {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * jpp + akq * jqp;
        a[(k, q)] = akp * jpq + akq * jqq;
    }
}

// A ← J* A restricted to rows p, q.
fn rotate_rows_adjoint(
    a: &mut CMatrix,
    p: usize,
    q: usize,
    jpp: C64,
    jpq: C64,
    jqp: C64,
    jqq: C64,
) {
    for k in 0..a.cols {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian
/// matrix.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralData {
    /// `V diag(f(λ)) V*`
    pub fn reconstruct(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.eigenvalues.len();
        let fv: Vec<C64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        let v = &self.eigenvectors;
        CMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * fv[k] * v[(j, k)].conj()).sum()
        })
    }
}
