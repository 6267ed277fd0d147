//! Dirac–Pauli representation of the Clifford generators.

use crate::linalg::C64;

pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];

const O: C64 = C64::new(0.0, 0.0);
const L: C64 = C64::new(1.0, 0.0);
const J: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CliffordSet {
    pub alpha1: Mat4,
    pub alpha2: Mat4,
    pub alpha3: Mat4,
    pub beta: Mat4,
    pub sigma1: Mat2,
    pub sigma2: Mat2,
    pub sigma3: Mat2,
}

pub fn pauli() -> [Mat2; 3] {
    [[[O, L], [L, O]], [[O, -J], [J, O]], [[L, O], [O, -L]]]
}

/// `β = diag(1, 1, −1, −1)` and `α_j = [[0, σ_j], [σ_j, 0]]`.
pub fn dirac_matrices() -> CliffordSet {
    let [s1, s2, s3] = pauli();
    let off = |s: Mat2| {
        let mut m = [[O; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j + 2] = s[i][j];
                m[i + 2][j] = s[i][j];
            }
        }
        m
    };
    let mut beta = [[O; 4]; 4];
    for (i, row) in beta.iter_mut().enumerate() {
        row[i] = if i < 2 { L } else { -L };
    }
    CliffordSet {
        alpha1: off(s1),
        alpha2: off(s2),
        alpha3: off(s3),
        beta,
        sigma1: s1,
        sigma2: s2,
        sigma3: s3,
    }
}

pub fn mul<const N: usize>(a: &[[C64; N]; N], b: &[[C64; N]; N]) -> [[C64; N]; N] {
    let mut c = [[O; N]; N];
    for i in 0..N {
        for j in 0..N {
            for k in 0..N {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn anticommutator<const N: usize>(a: &[[C64; N]; N], b: &[[C64; N]; N]) -> [[C64; N]; N] {
    let (ab, ba) = (mul(a, b), mul(b, a));
    let mut c = [[O; N]; N];
    for i in 0..N {
        for j in 0..N {
            c[i][j] = ab[i][j] + ba[i][j];
        }
    }
    c
}

pub fn identity<const N: usize>() -> [[C64; N]; N] {
    let mut m = [[O; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = L;
    }
    m
}

/// Largest entry of `|A − c·I|`.
pub fn distance_to_scalar<const N: usize>(a: &[[C64; N]; N], c: f64) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            let t = if i == j { C64::new(c, 0.0) } else { O };
            d = d.max((a[i][j] - t).norm());
        }
    }
    d
}

pub fn hermiticity_defect<const N: usize>(a: &[[C64; N]; N]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            d = d.max((a[i][j] - a[j][i].conj()).norm());
        }
    }
    d
}

pub fn trace<const N: usize>(a: &[[C64; N]; N]) -> C64 {
    (0..N).map(|i| a[i][i]).sum()
}

impl CliffordSet {
    /// The four generators in the order `β, α₁, α₂, α₃`.
    pub fn generators(&self) -> [Mat4; 4] {
        [self.beta, self.alpha1, self.alpha2, self.alpha3]
    }

    /// Maximum defect over the ten relations `{γ_a, γ_b} = 2δ_ab`.
    pub fn anticommutation_defect(&self) -> f64 {
        let g = self.generators();
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in a..4 {
                let target = if a == b { 2.0 } else { 0.0 };
                d = d.max(distance_to_scalar(&anticommutator(&g[a], &g[b]), target));
            }
        }
        d
    }

    pub fn pauli_defect(&self) -> f64 {
        let s = [self.sigma1, self.sigma2, self.sigma3];
        let mut d: f64 = 0.0;
        for a in 0..3 {
            for b in a..3 {
                let target = if a == b { 2.0 } else { 0.0 };
                d = d.max(distance_to_scalar(&anticommutator(&s[a], &s[b]), target));
            }
        }
        let s12 = mul(&self.sigma1, &self.sigma2);
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((s12[i][j] - J * self.sigma3[i][j]).norm());
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_is_an_involution() {
        let c = dirac_matrices();
        assert_eq!(distance_to_scalar(&mul(&c.beta, &c.beta), 1.0), 0.0);
    }

    #[test]
    fn all_relations_hold_exactly() {
        let c = dirac_matrices();
        assert_eq!(c.anticommutation_defect(), 0.0);
        assert_eq!(c.pauli_defect(), 0.0);
        assert_eq!(distance_to_scalar(&anticommutator(&c.alpha1, &c.alpha2), 0.0), 0.0);
        assert_eq!(distance_to_scalar(&anticommutator(&c.alpha3, &c.beta), 0.0), 0.0);
    }

    #[test]
    fn generators_are_hermitian_unitary_traceless() {
        let c = dirac_matrices();
        for g in c.generators() {
            assert_eq!(hermiticity_defect(&g), 0.0);
            assert_eq!(trace(&g), O);
            assert_eq!(distance_to_scalar(&mul(&g, &g), 1.0), 0.0);
        }
        for s in [c.sigma1, c.sigma2, c.sigma3] {
            assert_eq!(hermiticity_defect(&s), 0.0);
            assert_eq!(trace(&s), O);
        }
    }
}
