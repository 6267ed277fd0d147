//! Inner linear solvers: banded direct with refinement, complex-shift MINRES
//! and the fiber-exact inverse of the three-dimensional `H₀`.

use crate::discretize::ThreeD;
use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm};
use crate::linalg::{BandedCholesky, BandedLu, CsrMatrix, LinearOperator, C64};
use alloc::vec;
use alloc::vec::Vec;

/// Something that applies an inverse.
pub trait InverseApplier {
    fn dim(&self) -> usize;
    fn solve(&self, b: &[C64]) -> Result<Vec<C64>>;
}

const ZERO: C64 = C64::new(0.0, 0.0);

/// Relative pivot below which a shift is treated as an eigenvalue.
pub const SINGULAR_PIVOT: f64 = 1e-13;

/// Direct solver for `(A − z)x = b` with residual-driven iterative refinement.
#[derive(Debug, Clone)]
pub struct DirectSolver {
    shifted: CsrMatrix,
    lu: BandedLu,
    pub tol: f64,
}

impl DirectSolver {
    pub fn new(a: &CsrMatrix, z: C64, tol: f64) -> Result<Self> {
        let shifted = if z == ZERO { a.clone() } else { a.shift_diagonal(-z) };
        let lu = BandedLu::new(&shifted).map_err(|e| match e {
            Error::NearSingular { pivot, .. } => Error::NearSingular {
                pivot,
                ritz: z.re,
            },
            e => e,
        })?;
        if lu.min_relative_pivot() < SINGULAR_PIVOT {
            let ritz = smallest_magnitude_ritz(&shifted, &lu) + z.re;
            return Err(Error::NearSingular {
                pivot: lu.min_relative_pivot(),
                ritz,
            });
        }
        Ok(Self { shifted, lu, tol })
    }

    pub fn factor(&self) -> &BandedLu {
        &self.lu
    }

    /// Solve followed by `steps` rounds of refinement, without a residual
    /// target.
    pub fn refined(&self, b: &[C64], steps: usize) -> Vec<C64> {
        let mut x = self.lu.solve(b);
        for _ in 0..steps {
            let ax = self.shifted.matvec(&x);
            let r: Vec<C64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            let d = self.lu.solve(&r);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
        }
        x
    }
}

/// A few steps of inverse iteration; returns the eigenvalue of `M` closest
/// to zero.
fn smallest_magnitude_ritz(m: &CsrMatrix, lu: &BandedLu) -> f64 {
    let mut rng = crate::rng::SeededRng::new(0x5eed);
    let mut x = rng.complex_vector(m.rows());
    for _ in 0..4 {
        let mut y = lu.solve(&x);
        let n = norm(&y);
        if !(n > 0.0 && n.is_finite()) {
            return 0.0;
        }
        for v in &mut y {
            *v /= n;
        }
        x = y;
    }
    dot(&x, &m.matvec(&x)).re
}

impl InverseApplier for DirectSolver {
    fn dim(&self) -> usize {
        self.shifted.rows()
    }

    fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let nb = norm(b);
        if nb == 0.0 {
            return Ok(vec![ZERO; b.len()]);
        }
        let mut x = self.lu.solve(b);
        let mut res = 0.0;
        for _ in 0..4 {
            let ax = self.shifted.matvec(&x);
            let r: Vec<C64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            res = norm(&r) / nb;
            if res <= self.tol {
                return Ok(x);
            }
            let d = self.lu.solve(&r);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
        }
        Err(Error::NoConvergence {
            iterations: 4,
            residual: res,
        })
    }
}

/// MINRES for `(A − σ)x = b` with hermitian `A` and complex `σ`.
/// Returns the solution, the iteration count and the relative residual.
pub fn minres(
    a: &dyn LinearOperator,
    sigma: C64,
    b: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, usize, f64)> {
    let n = a.dim();
    let beta1 = norm(b);
    let mut x = vec![ZERO; n];
    if beta1 == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut v_prev = vec![ZERO; n];
    let mut v: Vec<C64> = b.iter().map(|z| z / beta1).collect();
    let mut beta = 0.0;
    let (mut w1, mut w2) = (vec![ZERO; n], vec![ZERO; n]);
    // rotations G_{k−2}, G_{k−1}
    let (mut c1, mut s1) = (C64::new(1.0, 0.0), 0.0);
    let (mut c2, mut s2) = (C64::new(1.0, 0.0), 0.0);
    let mut z = C64::new(beta1, 0.0);
    let mut av = vec![ZERO; n];
    for k in 0..max_iter {
        a.apply(&v, &mut av);
        let alpha = dot(&v, &av).re;
        let mut next: Vec<C64> = av
            .iter()
            .zip(&v)
            .zip(&v_prev)
            .map(|((p, q), r)| p - q * alpha - r * beta)
            .collect();
        // local reorthogonalization keeps the three-term recurrence honest
        let c = dot(&v, &next);
        axpy(-c, &v, &mut next);
        let beta_next = norm(&next);

        let d = C64::new(alpha, 0.0) - sigma;
        // previous two rotations applied to the new column
        let (eps, tmp) = if k >= 2 {
            (C64::new(s1, 0.0) * beta, c1.conj() * beta)
        } else {
            (ZERO, C64::new(beta, 0.0))
        };
        let (delta, gbar) = if k >= 1 {
            (c2 * tmp + s2 * d, -tmp * s2 + c2.conj() * d)
        } else {
            (ZERO, d)
        };
        let gamma = libm::sqrt(gbar.norm_sqr() + beta_next * beta_next);
        if gamma == 0.0 {
            return Err(Error::NearSingular {
                pivot: 0.0,
                ritz: sigma.re,
            });
        }
        let ck = gbar.conj() / gamma;
        let sk = beta_next / gamma;
        let tau = ck * z;
        z = -z * sk;
        let w: Vec<C64> = v
            .iter()
            .zip(&w2)
            .zip(&w1)
            .map(|((vi, a2), a1)| (vi - delta * a2 - eps * a1) / gamma)
            .collect();
        axpy(tau, &w, &mut x);
        w1 = core::mem::replace(&mut w2, w);
        c1 = c2;
        s1 = s2;
        c2 = ck;
        s2 = sk;
        let rel = z.norm() / beta1;
        if rel <= tol || beta_next == 0.0 {
            return Ok((x, k + 1, rel));
        }
        v_prev = core::mem::replace(&mut v, next.iter().map(|q| q / beta_next).collect());
        beta = beta_next;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: z.norm() / beta1,
    })
}

/// Krylov inverse of a hermitian operator with an optional complex shift.
pub struct MinresSolver<'a> {
    pub op: &'a dyn LinearOperator,
    pub shift: C64,
    pub tol: f64,
    pub max_iter: usize,
}

impl InverseApplier for MinresSolver<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        minres(self.op, self.shift, b, self.tol, self.max_iter).map(|r| r.0)
    }
}

/// Exact inverse of the free 3-D operator via its fiber structure:
/// `H₀⁻¹ = H₀(P₃)·(K ⊗ 1 + 1 ⊗ P₃²)⁻¹` with `K = H₀(0)²` block diagonal.
/// `P₃` is diagonalized once; each fiber solves `K + s²` by banded Cholesky.
pub struct FiberInverse<'a> {
    h: &'a ThreeD,
    /// eigenvectors of `P₃` (one per eigenvalue)
    s_vecs: Vec<Vec<C64>>,
    s_vals: Vec<f64>,
    up_perm: Vec<usize>,
    dn_perm: Vec<usize>,
    factors: Vec<(BandedCholesky, BandedCholesky)>,
}

impl<'a> FiberInverse<'a> {
    pub fn new(h: &'a ThreeD) -> Result<Self> {
        let parts = &h.parts;
        let m2 = parts.mass() * parts.mass();
        let k_up = parts.pi_minus.matmul(&parts.pi_plus).shift_diagonal(C64::new(m2, 0.0));
        let k_dn = parts.pi_plus.matmul(&parts.pi_minus).shift_diagonal(C64::new(m2, 0.0));
        let up_perm = crate::linalg::banded::reverse_cuthill_mckee(&k_up);
        let dn_perm = crate::linalg::banded::reverse_cuthill_mckee(&k_dn);
        let k_up = k_up.permute(&up_perm);
        let k_dn = k_dn.permute(&dn_perm);
        let band = k_up.bandwidth().0 + 1 + k_dn.bandwidth().0 + 1;
        let required = h.n3() * (k_up.rows() + k_dn.rows()) * band;
        if required > h.memory_budget {
            return Err(Error::MemoryBudget {
                required,
                budget: h.memory_budget,
            });
        }
        let eig = h.p3.to_dense().hermitian_eigen(true)?;
        let s_vecs = eig.vectors.unwrap_or_default();
        let s_vals = eig.values;
        let mut factors = Vec::with_capacity(s_vals.len());
        for &s in &s_vals {
            let shift = C64::new(s * s, 0.0);
            factors.push((
                BandedCholesky::new(&k_up.shift_diagonal(shift))?,
                BandedCholesky::new(&k_dn.shift_diagonal(shift))?,
            ));
        }
        Ok(Self {
            h,
            s_vecs,
            s_vals,
            up_perm,
            dn_perm,
            factors,
        })
    }

    /// Eigenvalues of the discrete `P₃` (the sampled fiber momenta).
    pub fn momenta(&self) -> &[f64] {
        &self.s_vals
    }

    fn to_fibers(&self, x: &[C64]) -> Vec<Vec<C64>> {
        let t = self.h.t_dim();
        self.s_vecs
            .iter()
            .map(|sv| {
                let mut out = vec![ZERO; t];
                for (k, c) in sv.iter().enumerate() {
                    let c = c.conj();
                    if c != ZERO {
                        axpy(c, &x[k * t..(k + 1) * t], &mut out);
                    }
                }
                out
            })
            .collect()
    }

    fn from_fibers(&self, xh: &[Vec<C64>]) -> Vec<C64> {
        let t = self.h.t_dim();
        let n3 = self.h.n3();
        let mut out = vec![ZERO; n3 * t];
        for (sv, f) in self.s_vecs.iter().zip(xh) {
            for (k, c) in sv.iter().enumerate() {
                if *c != ZERO {
                    axpy(*c, f, &mut out[k * t..(k + 1) * t]);
                }
            }
        }
        out
    }

    fn solve_k(&self, j: usize, x: &mut [C64]) {
        let o = self.h.parts.offsets();
        let (fu, fd) = &self.factors[j];
        for c in 0..4 {
            let (perm, f) = if c % 2 == 0 {
                (&self.up_perm, fu)
            } else {
                (&self.dn_perm, fd)
            };
            let seg = &mut x[o[c]..o[c + 1]];
            let mut y: Vec<C64> = perm.iter().map(|&p| seg[p]).collect();
            f.solve_in_place(&mut y);
            for (new, &old) in perm.iter().enumerate() {
                seg[old] = y[new];
            }
        }
    }

    /// Applies `g(P₃-fiber)·H₀⁻¹`-type maps fiber by fiber: for each fiber
    /// `j`, `y_j = op_j(x̂_j)`.
    fn fiberwise(&self, x: &[C64], op: &dyn Fn(usize, &mut Vec<C64>)) -> Vec<C64> {
        let mut xh = self.to_fibers(x);
        for (j, f) in xh.iter_mut().enumerate() {
            op(j, f);
        }
        self.from_fibers(&xh)
    }

    fn h_fiber(&self, j: usize, y: &[C64]) -> Vec<C64> {
        let s = self.s_vals[j];
        let mut w = self.h.h_perp.matvec(y);
        if s != 0.0 {
            let a = self.h.alpha3.matvec(y);
            axpy(C64::new(s, 0.0), &a, &mut w);
        }
        w
    }

    /// `H₀⁻¹ x`
    pub fn apply_inverse(&self, x: &[C64]) -> Vec<C64> {
        self.fiberwise(x, &|j, f| {
            self.solve_k(j, f);
            *f = self.h_fiber(j, f);
        })
    }

    /// `P₃ H₀⁻¹ x`, computed in the fiber basis.
    pub fn apply_p3_inverse(&self, x: &[C64]) -> Vec<C64> {
        self.fiberwise(x, &|j, f| {
            self.solve_k(j, f);
            let s = C64::new(self.s_vals[j], 0.0);
            *f = self.h_fiber(j, f).into_iter().map(|v| v * s).collect();
        })
    }
}

impl InverseApplier for FiberInverse<'_> {
    fn dim(&self) -> usize {
        self.h.total_dim()
    }
    fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        Ok(self.apply_inverse(b))
    }
}

/// `w` with `‖(A − z)w − v‖ ≤ tol·‖v‖`, using a banded direct solve.
pub fn apply_inverse(a: &CsrMatrix, z: C64, v: &[C64], tol: f64) -> Result<Vec<C64>> {
    DirectSolver::new(a, z, tol)?.solve(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_h0_3d, assemble_internal, Backend, P3Scheme};
    use crate::field::FieldModel;
    use crate::linalg::vector::sub;
    use crate::linalg::TripletBuilder;
    use crate::rng::SeededRng;

    fn random_hermitian(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = SeededRng::new(seed);
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, C64::new(rng.normal() * 2.0, 0.0));
            if i + 1 < n {
                b.push_hermitian(i, i + 1, rng.complex_normal());
            }
            let j = rng.index(n);
            if j != i {
                b.push_hermitian(i, j, rng.complex_normal() * 0.2);
            }
        }
        b.build()
    }

    #[test]
    fn inverse_of_scaled_identity() {
        let a = CsrMatrix::from_diagonal(&[2.0; 5]);
        let v = SeededRng::new(1).complex_vector(5);
        let w = apply_inverse(&a, ZERO, &v, 1e-14).unwrap();
        for (x, y) in w.iter().zip(&v) {
            assert!((x - y / 2.0).norm() < 1e-15);
        }
    }

    #[test]
    fn residual_contract_positive_definite() {
        let a = random_hermitian(60, 2);
        let pd = a.matmul(&a).shift_diagonal(C64::new(0.5, 0.0));
        let v = SeededRng::new(3).complex_vector(60);
        let w = apply_inverse(&pd, ZERO, &v, 1e-12).unwrap();
        let r = norm(&sub(&pd.matvec(&w), &v)) / norm(&v);
        assert!(r <= 1e-12);
    }

    #[test]
    fn exact_eigenvalue_shift_is_reported() {
        let a = CsrMatrix::from_diagonal(&[0.9, 1.5, 2.1]);
        match DirectSolver::new(&a, C64::new(1.5, 0.0), 1e-12) {
            Err(Error::NearSingular { ritz, .. }) => assert!((ritz - 1.5).abs() < 1e-8),
            other => panic!("expected near-singular error, got {other:?}"),
        }
    }

    #[test]
    fn minres_with_complex_shift_matches_direct() {
        let a = random_hermitian(80, 4);
        let z = C64::new(0.3, 0.05);
        let v = SeededRng::new(5).complex_vector(80);
        let (x, _, rel) = minres(&a, z, &v, 1e-11, 2000).unwrap();
        assert!(rel <= 1e-11);
        let y = apply_inverse(&a, z, &v, 1e-13).unwrap();
        assert!(norm(&sub(&x, &y)) / norm(&y) < 1e-8);
    }

    #[test]
    fn resolvent_identity() {
        let a = random_hermitian(40, 6);
        let z = C64::new(0.2, 0.1);
        let tol = 1e-12;
        let v = SeededRng::new(7).complex_vector(40);
        let lhs = sub(
            &apply_inverse(&a, z, &v, tol).unwrap(),
            &apply_inverse(&a, z.conj(), &v, tol).unwrap(),
        );
        let inner = apply_inverse(&a, z.conj(), &v, tol).unwrap();
        let rhs: Vec<C64> = apply_inverse(&a, z, &inner, tol)
            .unwrap()
            .iter()
            .map(|w| w * (z - z.conj()))
            .collect();
        assert!(norm(&sub(&lhs, &rhs)) <= 10.0 * tol * norm(&v));
    }

    #[test]
    fn fiber_inverse_is_exact_inverse() {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        for backend in [
            Backend::Grid { n: [5, 4], half_length: [2.0, 1.5] },
            Backend::Oscillator { levels: 3, centres: 2 },
        ] {
            let p = assemble_internal(&f, &backend).unwrap();
            for scheme in [P3Scheme::CentralDifference, P3Scheme::SineSpectral] {
                let h = assemble_h0_3d(&p, 9, 3.0, scheme, 10_000_000).unwrap();
                let inv = FiberInverse::new(&h).unwrap();
                let v = SeededRng::new(8).complex_vector(h.total_dim());
                let w = inv.apply_inverse(&v);
                let back = h.apply_new(&w);
                assert!(norm(&sub(&back, &v)) / norm(&v) < 1e-12);
                let pw = inv.apply_p3_inverse(&v);
                assert!(norm(&sub(&pw, &h.apply_p3(&w))) / norm(&pw) < 1e-12);
            }
        }
    }
}
