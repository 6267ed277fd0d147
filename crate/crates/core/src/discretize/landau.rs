//! Landau-level basis `|n, k⟩` for a constant field `B > 0`: `n` is the
//! cyclotron level (`Π₊ = √(2B)·a` lowers it) and `k` the guiding-centre
//! index. Radial functions `f(r²)` conserve `k − n` and are built sector by
//! sector from a padded tridiagonal representation of `r²`.

use crate::error::{invalid, Result};
use crate::linalg::{CsrMatrix, DenseMatrix, TripletBuilder, C64};
use alloc::vec::Vec;

/// Extra chain length used when evaluating radial functions.
pub const DEFAULT_PAD: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct LandauBasis {
    pub b0: f64,
    pub levels: usize,
    pub centres: usize,
    pub pad: usize,
    sectors: Vec<Sector>,
}

#[derive(Debug, Clone, PartialEq)]
struct Sector {
    /// `k − n`
    ell: isize,
    /// first level of the chain
    n0: usize,
    /// number of chain states kept inside the truncated basis
    kept: usize,
    /// eigen-decomposition of the padded chain of `r²`
    values: Vec<f64>,
    vectors: Vec<Vec<C64>>,
}

impl LandauBasis {
    pub fn new(b0: f64, levels: usize, centres: usize) -> Result<Self> {
        Self::with_pad(b0, levels, centres, DEFAULT_PAD)
    }

    pub fn with_pad(b0: f64, levels: usize, centres: usize, pad: usize) -> Result<Self> {
        if !(b0 > 0.0 && b0.is_finite()) {
            return Err(invalid("b0", "oscillator backend needs a constant field B0 > 0"));
        }
        if levels < 2 {
            return Err(invalid("levels", "need at least 2 Landau levels"));
        }
        if centres < 1 {
            return Err(invalid("centres", "need at least one guiding centre"));
        }
        let mut sectors = Vec::new();
        for ell in -(levels as isize - 1)..centres as isize {
            let n0 = if ell < 0 { (-ell) as usize } else { 0 };
            let kmax_n = (centres as isize - 1 - ell) as usize;
            let kept = levels.min(kmax_n + 1) - n0;
            let len = kept + pad;
            let mut t = DenseMatrix::zeros(len, len);
            for a in 0..len {
                let n = n0 + a;
                let k = (n as isize + ell) as usize;
                t[(a, a)] = C64::new(2.0 / b0 * (n + k + 1) as f64, 0.0);
                if a > 0 {
                    let v = C64::new(0.0, 2.0 / b0 * libm::sqrt((n * k) as f64));
                    t[(a - 1, a)] = v;
                    t[(a, a - 1)] = v.conj();
                }
            }
            let eig = t.hermitian_eigen(true)?;
            sectors.push(Sector {
                ell,
                n0,
                kept,
                values: eig.values,
                vectors: eig.vectors.unwrap_or_default(),
            });
        }
        Ok(Self {
            b0,
            levels,
            centres,
            pad,
            sectors,
        })
    }

    /// Index of `|n, k⟩` in the upper-component space (level-major).
    pub fn index(&self, n: usize, k: usize) -> usize {
        n * self.centres + k
    }

    pub fn label(&self, i: usize) -> (usize, usize) {
        (i / self.centres, i % self.centres)
    }

    pub fn up_dim(&self) -> usize {
        self.levels * self.centres
    }

    /// The lower component carries one level fewer; its indices are a
    /// prefix of the upper ones.
    pub fn dn_dim(&self) -> usize {
        (self.levels - 1) * self.centres
    }

    /// `Π₊ : up → dn`, `Π₊|n, k⟩ = √(2Bn)|n − 1, k⟩`.
    pub fn pi_plus(&self) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.dn_dim(), self.up_dim());
        for n in 1..self.levels {
            for k in 0..self.centres {
                b.push(
                    self.index(n - 1, k),
                    self.index(n, k),
                    C64::new(libm::sqrt(2.0 * self.b0 * n as f64), 0.0),
                );
            }
        }
        b.build()
    }

    /// Matrix of the multiplication operator `f(r²)` on the upper space.
    pub fn radial_matrix(&self, f: &dyn Fn(f64) -> f64) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.up_dim(), self.up_dim());
        for s in &self.sectors {
            let fv: Vec<f64> = s.values.iter().map(|&w| f(w)).collect();
            for a in 0..s.kept {
                for c in 0..=a {
                    let mut acc = C64::new(0.0, 0.0);
                    for (q, v) in s.vectors.iter().enumerate() {
                        acc += v[a] * v[c].conj() * fv[q];
                    }
                    let na = s.n0 + a;
                    let nc = s.n0 + c;
                    let ia = self.index(na, (na as isize + s.ell) as usize);
                    let ic = self.index(nc, (nc as isize + s.ell) as usize);
                    if acc.norm() > 1e-300 {
                        b.push_hermitian(ia, ic, acc);
                    }
                }
            }
        }
        b.build()
    }

    /// `⟨n, k| r² |n, k⟩ = 2(n + k + 1)/B`, useful for localization flags.
    pub fn mean_r2(&self, i: usize) -> f64 {
        let (n, k) = self.label(i);
        2.0 / self.b0 * (n + k + 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector::norm;

    #[test]
    fn commutator_of_ladder_is_2b_away_from_truncation() {
        let basis = LandauBasis::new(1.5, 6, 3).unwrap();
        let p = basis.pi_plus().to_dense();
        let pm = p.adjoint();
        // Π₊Π₋ − Π₋Π₊ restricted to the lower space equals 2B on every kept level
        let a = p.matmul(&pm);
        let c = pm.matmul(&p);
        for i in 0..basis.dn_dim() {
            let d = a[(i, i)] - c[(i, i)];
            assert!((d.re - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_identity_and_r2_are_reproduced() {
        let basis = LandauBasis::new(1.0, 5, 6).unwrap();
        let one = basis.radial_matrix(&|_| 1.0).to_dense();
        let id = DenseMatrix::identity(basis.up_dim());
        assert!(one.sub(&id).max_abs() < 1e-12);
        let r2 = basis.radial_matrix(&|w| w).to_dense();
        for i in 0..basis.up_dim() {
            assert!((r2[(i, i)].re - basis.mean_r2(i)).abs() < 1e-10);
        }
        // ⟨n−1,k−1|r²|n,k⟩ = (2/B)·i·√(nk)
        let (i, j) = (basis.index(1, 2), basis.index(2, 3));
        assert!((r2[(i, j)] - C64::new(0.0, 2.0 * libm::sqrt(6.0))).norm() < 1e-10);
    }

    #[test]
    fn gaussian_is_converged_in_padding() {
        let a = LandauBasis::with_pad(1.0, 4, 5, 30).unwrap();
        let b = LandauBasis::with_pad(1.0, 4, 5, 60).unwrap();
        let f = |w: f64| libm::exp(-w);
        let d = a.radial_matrix(&f).to_dense().sub(&b.radial_matrix(&f).to_dense());
        assert!(d.max_abs() < 1e-12);
        let v = a.radial_matrix(&f).to_dense();
        // ⟨0,0|e^{−r²}|0,0⟩ = B/(B+2)
        assert!((v[(0, 0)].re - 1.0 / 3.0).abs() < 1e-12);
        assert!(norm(&[v[(0, 0)]]) > 0.0);
    }
}
