//! Row-major dense complex matrices and a hermitian eigensolver
//! (Householder reduction to real tridiagonal form followed by implicit QL).

use super::tridiag::symmetric_tridiagonal_eigen;
use super::vector::{dot, norm};
use super::{C64, ONE, ZERO};
use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Eigenvalues (ascending) and, optionally, orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<Vec<C64>>>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(ZERO, |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |M - M†|` entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..=i {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// Eigen-decomposition of a hermitian matrix. Only the lower triangle is
    /// read after symmetrization, so tiny round-off asymmetry is tolerated.
    pub fn hermitian_eigen(&self, want_vectors: bool) -> Result<HermitianEigen> {
        if self.rows != self.cols {
            return Err(Error::Dimension {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        if n == 0 {
            return Ok(HermitianEigen {
                values: Vec::new(),
                vectors: want_vectors.then(Vec::new),
            });
        }
        let mut a = self.clone();
        // symmetrize from the lower triangle
        for i in 0..n {
            a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
            for j in 0..i {
                let v = a[(i, j)];
                a[(j, i)] = v.conj();
            }
        }
        let (diag, sub, reflectors) = tridiagonalize(&mut a);

        // make the off-diagonal real with a diagonal unitary
        let mut phases = vec![ONE; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for k in 0..n.saturating_sub(1) {
            let r = sub[k].norm();
            off[k] = r;
            let ph = if r > 0.0 { sub[k] / r } else { ONE };
            phases[k + 1] = phases[k] * ph;
        }
        let (values, ys) = symmetric_tridiagonal_eigen(&diag, &off, want_vectors)?;
        let vectors = ys.map(|ys| {
            ys.into_iter()
                .map(|y| {
                    let mut x: Vec<C64> =
                        y.iter().zip(&phases).map(|(v, p)| p * *v).collect();
                    for r in reflectors.iter().rev() {
                        r.apply(&mut x);
                    }
                    x
                })
                .collect()
        });
        Ok(HermitianEigen { values, vectors })
    }
}

struct Reflector {
    offset: usize,
    beta: f64,
    u: Vec<C64>,
}

impl Reflector {
    fn apply(&self, x: &mut [C64]) {
        let tail = &mut x[self.offset..];
        let c = dot(&self.u, tail) * self.beta;
        for (t, u) in tail.iter_mut().zip(&self.u) {
            *t -= c * u;
        }
    }
}

/// Householder reduction `A = Q T Q†` with `T` hermitian tridiagonal.
/// Returns (diagonal, sub-diagonal, reflectors making up `Q`).
fn tridiagonalize(a: &mut DenseMatrix) -> (Vec<f64>, Vec<C64>, Vec<Reflector>) {
    let n = a.rows;
    let mut sub = vec![ZERO; n.saturating_sub(1)];
    let mut reflectors = Vec::new();
    let mut p = vec![ZERO; n];
    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        // column k below the diagonal; only the lower triangle is kept current
        let mut u: Vec<C64> = (0..m).map(|i| a[(k + 1 + i, k)]).collect();
        let alpha = norm(&u);
        if alpha == 0.0 || m == 1 {
            sub[k] = u[0];
            continue;
        }
        let phase = if u[0].norm() > 0.0 {
            u[0] / u[0].norm()
        } else {
            ONE
        };
        u[0] += phase * alpha;
        let beta = 2.0 / super::vector::norm_sqr(&u);
        let off = k + 1;
        // p = beta * A22 u from the lower triangle
        p[..m].fill(ZERO);
        for i in 0..m {
            let row = &a.data[(off + i) * n + off..(off + i) * n + off + i];
            let ui = u[i];
            let mut acc = a.data[(off + i) * n + off + i] * ui;
            for (j, x) in row.iter().enumerate() {
                acc += x * u[j];
                p[j] += x.conj() * ui;
            }
            p[i] += acc;
        }
        for x in &mut p[..m] {
            *x *= beta;
        }
        let kk = dot(&u, &p[..m]) * (beta / 2.0);
        let w: Vec<C64> = (0..m).map(|i| p[i] - kk * u[i]).collect();
        for i in 0..m {
            let ui = u[i];
            let wi = w[i];
            let row = &mut a.data[(off + i) * n + off..(off + i) * n + off + i + 1];
            for (j, x) in row.iter_mut().enumerate() {
                *x -= ui * w[j].conj() + wi * u[j].conj();
            }
        }
        sub[k] = -phase * alpha;
        reflectors.push(Reflector {
            offset: off,
            beta,
            u,
        });
    }
    let diag = (0..n).map(|i| a[(i, i)].re).collect();
    (diag, sub, reflectors)
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_hermitian(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = SeededRng::new(seed);
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j {
                    C64::new(rng.normal(), 0.0)
                } else {
                    rng.complex_normal()
                };
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }

    #[test]
    fn diagonal_matrix() {
        let m = DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let e = m.hermitian_eigen(false).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn random_hermitian_residuals_and_orthonormality() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (40, 4)] {
            let m = random_hermitian(n, seed);
            let e = m.hermitian_eigen(true).unwrap();
            let vecs = e.vectors.unwrap();
            for (lam, v) in e.values.iter().zip(&vecs) {
                let mv = m.matvec(v);
                let r: f64 = mv
                    .iter()
                    .zip(v)
                    .map(|(a, b)| (a - b * lam).norm_sqr())
                    .sum();
                assert!(libm::sqrt(r) < 1e-12 * (n as f64), "n={n} residual {r}");
            }
            for i in 0..n {
                for j in 0..n {
                    let d = dot(&vecs[i], &vecs[j]);
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((d - C64::new(target, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trace_is_preserved() {
        let m = random_hermitian(25, 9);
        let e = m.hermitian_eigen(false).unwrap();
        let tr: f64 = (0..25).map(|i| m[(i, i)].re).sum();
        let s: f64 = e.values.iter().sum();
        assert!((tr - s).abs() < 1e-11);
    }
}
