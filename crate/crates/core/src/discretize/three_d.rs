//! Three-dimensional `H₀ = 1 ⊗ H₀(0) + P₃ ⊗ α₃` on a transverse basis times an
//! `x₃` grid. Vectors are stored slice by slice: index `k₃·T + t`.

use super::{assemble_fiber, InternalParts, OperatorTag, SparseHermitianOperator};
use crate::error::{invalid, Error, Result};
use crate::linalg::{CsrMatrix, LinearOperator, TripletBuilder, C64};
use crate::potential::PotentialModel;
use alloc::vec;
use alloc::vec::Vec;

/// Default cap on the number of stored matrix entries.
pub const DEFAULT_MEMORY_BUDGET: usize = 40_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum P3Scheme {
    /// `(P₃ψ)_j = −i(ψ_{j+1} − ψ_{j−1})/(2h)`, zero outside the box.
    CentralDifference,
    /// Sine-Galerkin momentum, dense; exact on the sine basis of the box.
    SineSpectral,
}

#[derive(Debug, Clone)]
pub struct ThreeD {
    pub parts: InternalParts,
    pub x3: Vec<f64>,
    pub h3: f64,
    pub scheme: P3Scheme,
    /// `P₃` on the `x₃` grid (`n₃ × n₃`).
    pub p3: CsrMatrix,
    /// `H₀(0)` on the transverse four-spinor space.
    pub h_perp: CsrMatrix,
    pub alpha3: CsrMatrix,
    pub memory_budget: usize,
}

fn p3_matrix(n: usize, h: f64, scheme: P3Scheme) -> CsrMatrix {
    let mut b = TripletBuilder::new(n, n);
    match scheme {
        P3Scheme::CentralDifference => {
            for j in 0..n - 1 {
                b.push_hermitian(j, j + 1, C64::new(0.0, -0.5 / h));
            }
        }
        P3Scheme::SineSpectral => {
            // Galerkin matrix −i⟨s_j, s_k'⟩ on the box of length (n+1)h, then
            // mapped to grid values with the orthogonal DST-I.
            let len = (n + 1) as f64 * h;
            let mut hat = vec![C64::new(0.0, 0.0); n * n];
            for j in 1..=n {
                for k in 1..=n {
                    if (j + k) % 2 == 1 {
                        let v = 4.0 * (j * k) as f64 / (len * ((j * j) as f64 - (k * k) as f64));
                        hat[(j - 1) * n + (k - 1)] = C64::new(0.0, -v);
                    }
                }
            }
            let norm = libm::sqrt(2.0 / (n + 1) as f64);
            let s: Vec<f64> = (0..n * n)
                .map(|q| {
                    let (i, k) = (q / n, q % n);
                    norm * libm::sin(core::f64::consts::PI * ((i + 1) * (k + 1)) as f64 / (n + 1) as f64)
                })
                .collect();
            // S·hat·S
            let mut tmp = vec![C64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for k in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for q in 0..n {
                        acc += hat[i * n + q] * s[q * n + k];
                    }
                    tmp[i * n + k] = acc;
                }
            }
            for i in 0..n {
                for k in 0..=i {
                    let mut acc = C64::new(0.0, 0.0);
                    for q in 0..n {
                        acc += s[i * n + q] * tmp[q * n + k];
                    }
                    if acc.norm() > 1e-14 / h {
                        b.push_hermitian(i, k, acc);
                    }
                }
            }
        }
    }
    b.build()
}

pub fn assemble_h0_3d(
    parts: &InternalParts,
    n3: usize,
    half_length3: f64,
    scheme: P3Scheme,
    memory_budget: usize,
) -> Result<ThreeD> {
    if n3 < 4 {
        return Err(invalid("n3", "need at least 4 points along x3"));
    }
    if !(half_length3 > 0.0 && half_length3.is_finite()) {
        return Err(invalid("half_length3", "must be positive and finite"));
    }
    let h3 = 2.0 * half_length3 / (n3 - 1) as f64;
    let x3 = (0..n3).map(|i| -half_length3 + i as f64 * h3).collect();
    let h_perp = assemble_fiber(parts, 0.0)?.matrix;
    let alpha3 = parts.alpha3();
    let t = parts.fiber_dim();
    let p3_nnz = match scheme {
        P3Scheme::CentralDifference => 2 * n3,
        P3Scheme::SineSpectral => n3 * n3,
    };
    let required = n3 * h_perp.nnz() + p3_nnz * alpha3.nnz() + n3 * t;
    if required > memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: memory_budget,
        });
    }
    let p3 = p3_matrix(n3, h3, scheme);
    Ok(ThreeD {
        parts: parts.clone(),
        x3,
        h3,
        scheme,
        p3,
        h_perp,
        alpha3,
        memory_budget,
    })
}

impl ThreeD {
    pub fn n3(&self) -> usize {
        self.x3.len()
    }

    /// Transverse four-spinor dimension `T`.
    pub fn t_dim(&self) -> usize {
        self.h_perp.rows()
    }

    pub fn total_dim(&self) -> usize {
        self.n3() * self.t_dim()
    }

    /// Assembled sparse matrix of `H₀` (checked against the memory budget).
    pub fn operator(&self) -> Result<SparseHermitianOperator> {
        let m = self.kron_sum(&self.h_perp)?;
        Ok(SparseHermitianOperator::new(OperatorTag::Free3d, m))
    }

    /// `1 ⊗ A + P₃ ⊗ α₃` for a transverse matrix `A`.
    fn kron_sum(&self, a: &CsrMatrix) -> Result<CsrMatrix> {
        let required = self.n3() * a.nnz() + self.p3.nnz() * self.alpha3.nnz();
        if required > self.memory_budget {
            return Err(Error::MemoryBudget {
                required,
                budget: self.memory_budget,
            });
        }
        let id = CsrMatrix::identity(self.n3());
        Ok(id.kron(a).add(&self.p3.kron(&self.alpha3)))
    }

    /// Sparse `H = H₀ + V` with `V` sampled slice by slice.
    pub fn perturbed(&self, v: &PotentialModel) -> Result<SparseHermitianOperator> {
        let t = self.t_dim();
        let n = self.total_dim();
        let mut b = TripletBuilder::new(n, n);
        for (k, &z) in self.x3.iter().enumerate() {
            let slice = self.parts.potential_slice(v, z)?;
            for (i, j, val) in slice.triplets() {
                b.push(k * t + i, k * t + j, val);
            }
        }
        let vm = b.build();
        let h0 = self.operator()?.matrix;
        Ok(SparseHermitianOperator::new(OperatorTag::Perturbed3d, h0.add(&vm)))
    }

    /// Coordinate `x₃` of every entry of a 3-D vector.
    pub fn q3_diag(&self) -> Vec<f64> {
        let t = self.t_dim();
        (0..self.total_dim()).map(|i| self.x3[i / t]).collect()
    }

    /// `(f(Q₃) ⊗ 1) x`
    pub fn apply_q3_fn(&self, f: &dyn Fn(f64) -> C64, x: &[C64]) -> Vec<C64> {
        let t = self.t_dim();
        let mut y = x.to_vec();
        for (k, &z) in self.x3.iter().enumerate() {
            let c = f(z);
            for v in &mut y[k * t..(k + 1) * t] {
                *v *= c;
            }
        }
        y
    }

    /// `(P₃ ⊗ 1) x`
    pub fn apply_p3(&self, x: &[C64]) -> Vec<C64> {
        let t = self.t_dim();
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for k in 0..self.n3() {
            for (l, p) in self.p3.row(k) {
                let (src, dst) = (&x[l * t..(l + 1) * t], k * t);
                for (i, s) in src.iter().enumerate() {
                    y[dst + i] += p * s;
                }
            }
        }
        y
    }

    /// `(1 ⊗ α₃) x`
    pub fn apply_alpha3(&self, x: &[C64]) -> Vec<C64> {
        self.apply_transverse(&self.alpha3, x)
    }

    /// `(1 ⊗ A) x` for a transverse matrix `A`.
    pub fn apply_transverse(&self, a: &CsrMatrix, x: &[C64]) -> Vec<C64> {
        let t = self.t_dim();
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for k in 0..self.n3() {
            a.matvec_into(&x[k * t..(k + 1) * t], &mut y[k * t..(k + 1) * t]);
        }
        y
    }
}

impl LinearOperator for ThreeD {
    fn dim(&self) -> usize {
        self.total_dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let a = self.apply_transverse(&self.h_perp, x);
        let z = self.apply_p3(&self.apply_alpha3(x));
        for ((yi, ai), zi) in y.iter_mut().zip(&a).zip(&z) {
            *yi = ai + zi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_internal, Backend};
    use crate::field::FieldModel;
    use crate::rng::SeededRng;

    fn small() -> ThreeD {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        let p = assemble_internal(&f, &Backend::Grid { n: [4, 4], half_length: [1.5, 1.5] }).unwrap();
        assemble_h0_3d(&p, 6, 2.0, P3Scheme::CentralDifference, DEFAULT_MEMORY_BUDGET).unwrap()
    }

    #[test]
    fn structural_apply_matches_assembled_matrix() {
        let h = small();
        let m = h.operator().unwrap();
        assert_eq!(m.hermiticity_defect(), 0.0);
        let x = SeededRng::new(1).complex_vector(h.total_dim());
        let a = m.matrix.matvec(&x);
        let b = h.apply_new(&x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() < 1e-13);
        }
    }

    #[test]
    fn memory_budget_is_checked_before_assembly() {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        let p = assemble_internal(&f, &Backend::Grid { n: [16, 16], half_length: [4.0, 4.0] }).unwrap();
        let r = assemble_h0_3d(&p, 64, 4.0, P3Scheme::CentralDifference, 1000);
        assert!(matches!(r, Err(Error::MemoryBudget { .. })));
    }

    #[test]
    fn sine_spectral_p3_is_hermitian_and_accurate_on_smooth_states() {
        let n = 48;
        let l = 8.0;
        let h = 2.0 * l / (n - 1) as f64;
        let p = p3_matrix(n, h, P3Scheme::SineSpectral);
        assert!(p.hermiticity_defect() < 1e-12);
        let x: Vec<f64> = (0..n).map(|i| -l + i as f64 * h).collect();
        let psi: Vec<C64> = x.iter().map(|&t| C64::new(libm::exp(-t * t), 0.0)).collect();
        let d = p.matvec(&psi);
        for (i, &t) in x.iter().enumerate() {
            let exact = C64::new(0.0, 2.0 * t * libm::exp(-t * t));
            assert!((d[i] - exact).norm() < 1e-6);
        }
    }
}
