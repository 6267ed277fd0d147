//! Implicit QL iteration for real symmetric tridiagonal matrices.

use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

const MAX_SWEEPS: usize = 60;

/// Eigen-decomposition of a symmetric tridiagonal matrix.
///
/// `diag` has length `n`; `off[i]` couples rows `i` and `i + 1` (length `n - 1`).
/// Returns eigenvalues in ascending order and, when requested, the matching
/// eigenvectors (one `Vec` per eigenvalue).
pub fn symmetric_tridiagonal_eigen(
    diag: &[f64],
    off: &[f64],
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Vec<Vec<f64>>>)> {
    let n = diag.len();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(Vec::new)));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    // rows of `z` are eigenvectors
    let mut z: Vec<f64> = if want_vectors {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        z
    } else {
        Vec::new()
    };

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    iterations: sweeps,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + libm::copysign(r, g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if want_vectors {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..(i + 1) * n];
                    let zi1 = &mut hi[..n];
                    for k in 0..n {
                        let f = zi1[k];
                        zi1[k] = s * zi[k] + c * f;
                        zi[k] = c * zi[k] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = want_vectors.then(|| {
        order
            .iter()
            .map(|&i| z[i * n..(i + 1) * n].to_vec())
            .collect()
    });
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_difference_matrix_has_sine_spectrum() {
        let n = 12;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let (vals, vecs) = symmetric_tridiagonal_eigen(&diag, &off, true).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let t = (k + 1) as f64 * core::f64::consts::PI / (n + 1) as f64;
            assert!((v - (2.0 - 2.0 * libm::cos(t))).abs() < 1e-13);
        }
        let vecs = vecs.unwrap();
        // residual check
        for (lam, v) in vals.iter().zip(&vecs) {
            for i in 0..n {
                let mut y = diag[i] * v[i];
                if i > 0 {
                    y += off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    y += off[i] * v[i + 1];
                }
                assert!((y - lam * v[i]).abs() < 1e-12);
            }
        }
    }
}
