//! Helpers on complex slices. Inner products are conjugate-linear in the
//! first argument.

use super::{C64, ZERO};
use alloc::vec::Vec;

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    libm::sqrt(norm_sqr(a))
}

pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.norm()))
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    for xi in x {
        *xi *= alpha;
    }
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(alpha: C64, x: &[C64]) -> Vec<C64> {
    x.iter().map(|v| alpha * v).collect()
}

/// Normalizes in place and returns the previous norm. A zero vector is left
/// untouched.
pub fn normalize(x: &mut [C64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(C64::new(1.0 / n, 0.0), x);
    }
    n
}

/// Classical Gram–Schmidt against an orthonormal set, applied twice.
pub fn orthogonalize_against(x: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, x);
            axpy(-c, q, x);
        }
    }
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dot_is_conjugate_linear_in_first_slot() {
        let a = vec![C64::new(0.0, 1.0)];
        let b = vec![C64::new(1.0, 0.0)];
        assert_eq!(dot(&a, &b), C64::new(0.0, -1.0));
    }

    #[test]
    fn gram_schmidt_removes_components() {
        let q = vec![vec![C64::new(1.0, 0.0), ZERO]];
        let mut x = vec![C64::new(3.0, 1.0), C64::new(2.0, 0.0)];
        orthogonalize_against(&mut x, &q);
        assert!(x[0].norm() < 1e-15);
        assert_eq!(x[1], C64::new(2.0, 0.0));
    }
}
