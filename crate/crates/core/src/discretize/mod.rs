//! Finite hermitian realizations of `H⁰`, `H₀(ξ)` and the three-dimensional
//! `H₀`.
//!
//! Spinor layout of the transverse four-component space: `[u₁ | u₂ | d₁ | d₂]`
//! where `u₁, d₁` live on the upper (`up`) scalar space and `u₂, d₂` on the
//! lower (`dn`) one. On the grid both spaces are the grid points; in the
//! Landau basis the lower space has one level fewer and its indices are a
//! prefix of the upper ones.

pub mod landau;
mod three_d;

pub use landau::LandauBasis;
pub use three_d::{assemble_h0_3d, P3Scheme, ThreeD, DEFAULT_MEMORY_BUDGET};

use crate::error::{invalid, Error, Result};
use crate::field::{transversal_gauge, FieldModel, GAUGE_TOL};
use crate::linalg::{CsrMatrix, LinearOperator, TripletBuilder, C64};
use crate::potential::PotentialModel;
use alloc::vec;
use alloc::vec::Vec;

/// Axis-aligned Dirichlet grid on `Π[−L_j, L_j]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub n: Vec<usize>,
    pub half_length: Vec<f64>,
    pub spacing: Vec<f64>,
}

pub fn make_grid(n: &[usize], half_length: &[f64]) -> Result<Grid> {
    if n.is_empty() || n.len() > 3 {
        return Err(invalid("n", "grid dimension must be 1, 2 or 3"));
    }
    if n.len() != half_length.len() {
        return Err(Error::Dimension {
            expected: n.len(),
            found: half_length.len(),
        });
    }
    if let Some(bad) = n.iter().find(|&&k| k < 4) {
        return Err(invalid("n", alloc::format!("need at least 4 points per axis, got {bad}")));
    }
    if half_length.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(invalid("half_length", "must be positive and finite"));
    }
    let spacing = n
        .iter()
        .zip(half_length)
        .map(|(&k, &l)| 2.0 * l / (k - 1) as f64)
        .collect();
    Ok(Grid {
        n: n.to_vec(),
        half_length: half_length.to_vec(),
        spacing,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn points(&self) -> usize {
        self.n.iter().product()
    }

    pub fn axis(&self, j: usize) -> Vec<f64> {
        (0..self.n[j])
            .map(|i| -self.half_length[j] + i as f64 * self.spacing[j])
            .collect()
    }

    /// Coordinates of a 2-D grid point; the first axis runs fastest.
    pub fn point2(&self, idx: usize) -> [f64; 2] {
        let i1 = idx % self.n[0];
        let i2 = idx / self.n[0];
        [
            -self.half_length[0] + i1 as f64 * self.spacing[0],
            -self.half_length[1] + i2 as f64 * self.spacing[1],
        ]
    }

    /// Distance (in points) of a 2-D grid point from the nearest box face.
    pub fn depth2(&self, idx: usize) -> usize {
        let i1 = idx % self.n[0];
        let i2 = idx / self.n[0];
        i1.min(self.n[0] - 1 - i1).min(i2).min(self.n[1] - 1 - i2)
    }
}

/// Transverse discretization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum Backend {
    /// Dirichlet grid with forward-difference `Π₊` and Peierls link phases.
    Grid { n: [usize; 2], half_length: [f64; 2] },
    /// Landau levels `0..levels` times `centres` guiding centres
    /// (constant `B₀ > 0` only).
    Oscillator {
        levels: usize,
        #[cfg_attr(feature = "serde", serde(default = "one_centre"))]
        centres: usize,
    },
}

#[cfg(feature = "serde")]
fn one_centre() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransverseBasis {
    Grid(Grid),
    Landau(LandauBasis),
}

/// Which physical operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OperatorTag {
    Internal,
    Fiber(f64),
    Free3d,
    Perturbed3d,
    PerturbedFiber(f64),
    Derived,
}

/// Assembled hermitian matrix with its physical tag.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitianOperator {
    pub tag: OperatorTag,
    pub matrix: CsrMatrix,
}

impl SparseHermitianOperator {
    pub fn new(tag: OperatorTag, matrix: CsrMatrix) -> Self {
        Self { tag, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.hermiticity_defect()
    }
}

impl LinearOperator for SparseHermitianOperator {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matrix.matvec_into(x, y)
    }
}

/// Transverse building blocks shared by `H⁰`, `H₀(ξ)` and `H₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalParts {
    pub field: FieldModel,
    pub basis: TransverseBasis,
    pub up_dim: usize,
    pub dn_dim: usize,
    /// `Π₊ : up → dn`
    pub pi_plus: CsrMatrix,
    /// `Π₋ = Π₊†`
    pub pi_minus: CsrMatrix,
    /// `H⁰ = [[m, Π₋], [Π₊, −m]]` on `up ⊕ dn`
    pub operator: SparseHermitianOperator,
}

pub fn assemble_internal(field: &FieldModel, backend: &Backend) -> Result<InternalParts> {
    assemble_internal_with_gauge(field, backend, &|_| [0.0, 0.0])
}

/// As [`assemble_internal`] with `extra(x)` added to the vector potential
/// (grid backend only; used to test gauge covariance).
pub fn assemble_internal_with_gauge(
    field: &FieldModel,
    backend: &Backend,
    extra: &dyn Fn([f64; 2]) -> [f64; 2],
) -> Result<InternalParts> {
    field.validate()?;
    let (basis, pi_plus) = match backend {
        Backend::Oscillator { levels, centres } => {
            let b0 = field.constant_value().ok_or_else(|| {
                Error::Backend("oscillator backend requires a constant field".into())
            })?;
            let basis = LandauBasis::new(b0, *levels, *centres)?;
            let p = basis.pi_plus();
            (TransverseBasis::Landau(basis), p)
        }
        Backend::Grid { n, half_length } => {
            let grid = make_grid(n, half_length)?;
            let p = grid_pi_plus(field, &grid, extra)?;
            (TransverseBasis::Grid(grid), p)
        }
    };
    let up_dim = pi_plus.cols();
    let dn_dim = pi_plus.rows();
    let pi_minus = pi_plus.adjoint();
    let m = field.mass;
    let mut b = TripletBuilder::new(up_dim + dn_dim, up_dim + dn_dim);
    for i in 0..up_dim {
        b.push(i, i, C64::new(m, 0.0));
    }
    for i in 0..dn_dim {
        b.push(up_dim + i, up_dim + i, C64::new(-m, 0.0));
    }
    for (i, j, v) in pi_plus.triplets() {
        b.push_hermitian(up_dim + i, j, v);
    }
    let operator = SparseHermitianOperator::new(OperatorTag::Internal, b.build());
    Ok(InternalParts {
        field: field.clone(),
        basis,
        up_dim,
        dn_dim,
        pi_plus,
        pi_minus,
        operator,
    })
}

/// `Π₊ = Π₁ + iΠ₂` with `Π_j ψ(x) = −i(U_j(x)ψ(x + h_j e_j) − ψ(x))/h_j` and
/// `U_j(x) = exp(−i h_j a_j(x + h_j e_j/2))`.
fn grid_pi_plus(
    field: &FieldModel,
    grid: &Grid,
    extra: &dyn Fn([f64; 2]) -> [f64; 2],
) -> Result<CsrMatrix> {
    let (n1, n2) = (grid.n[0], grid.n[1]);
    let (h1, h2) = (grid.spacing[0], grid.spacing[1]);
    // gauge-invariant aliasing check: flux through one plaquette
    let mut bmax: f64 = 0.0;
    for idx in 0..grid.points() {
        bmax = bmax.max(field.b(grid.point2(idx)).abs());
    }
    if h1 * h2 * bmax > 1.0 {
        return Err(Error::PhaseAliasing {
            value: h1 * h2 * bmax,
        });
    }
    let np = n1 * n2;
    let mut b = TripletBuilder::new(np, np);
    let minus_i = C64::new(0.0, -1.0);
    for i2 in 0..n2 {
        for i1 in 0..n1 {
            let idx = i2 * n1 + i1;
            let x = grid.point2(idx);
            // −i D₁ψ + D₂ψ
            b.push(idx, idx, minus_i * (-1.0 / h1) + C64::new(-1.0 / h2, 0.0));
            if i1 + 1 < n1 {
                let mid = [x[0] + 0.5 * h1, x[1]];
                let a = transversal_gauge(field, mid, GAUGE_TOL)?[0] + extra(mid)[0];
                let u = C64::from_polar(1.0, -h1 * a);
                b.push(idx, idx + 1, minus_i * u / h1);
            }
            if i2 + 1 < n2 {
                let mid = [x[0], x[1] + 0.5 * h2];
                let a = transversal_gauge(field, mid, GAUGE_TOL)?[1] + extra(mid)[1];
                let u = C64::from_polar(1.0, -h2 * a);
                b.push(idx, idx + n1, u / h2);
            }
        }
    }
    Ok(b.build())
}

/// Offsets of the four spinor components `[u₁, u₂, d₁, d₂]`.
pub fn fiber_offsets(up: usize, dn: usize) -> [usize; 5] {
    [0, up, up + dn, 2 * up + dn, 2 * up + 2 * dn]
}

impl InternalParts {
    pub fn mass(&self) -> f64 {
        self.field.mass
    }

    /// Dimension of the four-spinor transverse space.
    pub fn fiber_dim(&self) -> usize {
        2 * (self.up_dim + self.dn_dim)
    }

    pub fn offsets(&self) -> [usize; 5] {
        fiber_offsets(self.up_dim, self.dn_dim)
    }

    /// Scalar dimension of spinor component `c` (0..4).
    pub fn component_dim(&self, c: usize) -> usize {
        if c % 2 == 0 {
            self.up_dim
        } else {
            self.dn_dim
        }
    }

    /// The coefficient of `ξ` in `H₀(ξ)`, i.e. `α₃` on the transverse space.
    pub fn alpha3(&self) -> CsrMatrix {
        let o = self.offsets();
        let mut b = TripletBuilder::new(o[4], o[4]);
        for i in 0..self.up_dim {
            b.push_hermitian(o[0] + i, o[2] + i, C64::new(1.0, 0.0));
        }
        for i in 0..self.dn_dim {
            b.push_hermitian(o[1] + i, o[3] + i, C64::new(-1.0, 0.0));
        }
        b.build()
    }

    /// `β` on the transverse space.
    pub fn beta(&self) -> CsrMatrix {
        let o = self.offsets();
        let d: Vec<f64> = (0..o[4]).map(|i| if i < o[2] { 1.0 } else { -1.0 }).collect();
        CsrMatrix::from_diagonal(&d)
    }

    /// Diagonal projector onto spinor components with `mask[c] = true`.
    pub fn component_projector(&self, mask: [bool; 4]) -> CsrMatrix {
        let o = self.offsets();
        let d: Vec<f64> = (0..o[4])
            .map(|i| {
                let c = (0..4).find(|&c| i < o[c + 1]).unwrap();
                if mask[c] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        CsrMatrix::from_diagonal(&d)
    }

    /// Scalar function of the transverse position on the upper space.
    /// The Landau basis only supports radial functions, passed as `f(r²)`.
    pub fn transverse_multiplier(&self, f: &dyn Fn([f64; 2]) -> f64, radial: Option<&dyn Fn(f64) -> f64>) -> Result<CsrMatrix> {
        match &self.basis {
            TransverseBasis::Grid(g) => {
                let d: Vec<f64> = (0..g.points()).map(|i| f(g.point2(i))).collect();
                Ok(CsrMatrix::from_diagonal(&d))
            }
            TransverseBasis::Landau(l) => {
                let r = radial.ok_or_else(|| {
                    Error::Backend("Landau basis supports only radial transverse functions".into())
                })?;
                Ok(l.radial_matrix(r))
            }
        }
    }

    /// Transverse four-spinor matrix of `Σ_ab M_ab φ` for a 4×4 shape `M`
    /// and scalar multiplier `φ` on the upper space.
    pub fn spinor_multiplier(&self, shape: &crate::clifford::Mat4, phi: &CsrMatrix) -> CsrMatrix {
        let o = self.offsets();
        let mut b = TripletBuilder::new(o[4], o[4]);
        for a in 0..4 {
            for c in 0..4 {
                let mab = shape[a][c];
                if mab == C64::new(0.0, 0.0) {
                    continue;
                }
                let (ra, rc) = (self.component_dim(a), self.component_dim(c));
                for (i, j, v) in phi.triplets() {
                    if i < ra && j < rc {
                        b.push(o[a] + i, o[c] + j, mab * v);
                    }
                }
            }
        }
        b.build()
    }

    /// `V(x₁, x₂, x₃)` at fixed `x₃` on the transverse four-spinor space.
    pub fn potential_slice(&self, v: &PotentialModel, x3: f64) -> Result<CsrMatrix> {
        let prof = v.profile;
        let phi = self.transverse_multiplier(
            &|x| prof.value([x[0], x[1], x3]),
            Some(&|r2| prof.value([libm::sqrt(r2), 0.0, x3])),
        )?;
        Ok(self.spinor_multiplier(&v.shape, &phi))
    }

    /// Fraction of `|ψ|²` of an `up ⊕ dn` (or four-spinor) vector lying near
    /// the truncation boundary: outermost grid layers, or the outermost
    /// guiding centres and top level of the Landau basis.
    pub fn boundary_weight(&self, psi: &[C64]) -> f64 {
        let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let comps: Vec<(usize, usize)> = if psi.len() == self.up_dim + self.dn_dim {
            vec![(0, self.up_dim), (self.up_dim, self.dn_dim)]
        } else {
            let o = self.offsets();
            (0..4).map(|c| (o[c], o[c + 1] - o[c])).collect()
        };
        let mut w = 0.0;
        for (start, len) in comps {
            for i in 0..len {
                let near = match &self.basis {
                    TransverseBasis::Grid(g) => g.depth2(i) < (g.n[0].min(g.n[1]) / 10).max(2),
                    TransverseBasis::Landau(l) => {
                        let (n, k) = l.label(i);
                        (l.centres > 2 && k + 2 >= l.centres) || n + 1 == l.levels
                    }
                };
                if near {
                    w += psi[start + i].norm_sqr();
                }
            }
        }
        w / total
    }
}

/// `H₀(ξ) = [[m, π + ξσ₃], [π + ξσ₃, −m]]` with `π = [[0, Π₋], [Π₊, 0]]`.
pub fn assemble_fiber(parts: &InternalParts, xi: f64) -> Result<SparseHermitianOperator> {
    if parts.pi_plus.rows() != parts.dn_dim || parts.pi_plus.cols() != parts.up_dim {
        return Err(Error::Dimension {
            expected: parts.dn_dim * parts.up_dim,
            found: parts.pi_plus.rows() * parts.pi_plus.cols(),
        });
    }
    let o = parts.offsets();
    let m = parts.mass();
    let mut b = TripletBuilder::new(o[4], o[4]);
    for c in 0..4 {
        let s = if c < 2 { m } else { -m };
        for i in 0..parts.component_dim(c) {
            b.push(o[c] + i, o[c] + i, C64::new(s, 0.0));
        }
    }
    for (i, j, v) in parts.pi_plus.triplets() {
        // d₂ ← Π₊ u₁ and u₂ ← Π₊ d₁ (with their adjoints)
        b.push_hermitian(o[3] + i, o[0] + j, v);
        b.push_hermitian(o[1] + i, o[2] + j, v);
    }
    if xi != 0.0 {
        for i in 0..parts.up_dim {
            b.push_hermitian(o[0] + i, o[2] + i, C64::new(xi, 0.0));
        }
        for i in 0..parts.dn_dim {
            b.push_hermitian(o[1] + i, o[3] + i, C64::new(-xi, 0.0));
        }
    }
    let tag = OperatorTag::Fiber(xi);
    Ok(SparseHermitianOperator::new(tag, b.build()))
}

/// `max |H₀(ξ)² − H₀(0)² − ξ²|` entrywise for each `ξ`.
pub fn fiber_square_defect(parts: &InternalParts, xis: &[f64]) -> Result<Vec<f64>> {
    let h0 = assemble_fiber(parts, 0.0)?.matrix;
    let h0sq = h0.matmul(&h0);
    xis.iter()
        .map(|&xi| {
            let h = assemble_fiber(parts, xi)?.matrix;
            Ok(h.matmul(&h).sub(&h0sq).shift_diagonal(C64::new(-xi * xi, 0.0)).max_abs())
        })
        .collect()
}

/// `H(ξ) = H₀(ξ) + V(·, ·, x₃ = 0)` on the transverse four-spinor space.
pub fn assemble_perturbed_fiber(
    parts: &InternalParts,
    xi: f64,
    v: &PotentialModel,
) -> Result<SparseHermitianOperator> {
    let h = assemble_fiber(parts, xi)?;
    let m = if v.is_zero() {
        h.matrix
    } else {
        h.matrix.add(&parts.potential_slice(v, 0.0)?)
    };
    Ok(SparseHermitianOperator::new(OperatorTag::PerturbedFiber(xi), m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn spectrum(m: &CsrMatrix) -> Vec<f64> {
        m.to_dense().hermitian_eigen(false).unwrap().values
    }

    #[test]
    fn grid_spacing() {
        let g = make_grid(&[64, 64], &[8.0, 8.0]).unwrap();
        assert!((g.spacing[0] - 16.0 / 63.0).abs() < 1e-15);
        assert!(make_grid(&[4, 4], &[1.0, 1.0]).is_ok());
        assert!(make_grid(&[2, 2], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn oscillator_requires_constant_field() {
        let f = FieldModel::new(
            crate::field::FieldProfile::GaussianBump {
                background: 1.0,
                amplitude: 0.5,
                width: 1.0,
            },
            1.0,
        )
        .unwrap();
        let r = assemble_internal(&f, &Backend::Oscillator { levels: 5, centres: 1 });
        assert!(matches!(r, Err(Error::Backend(_))));
    }

    #[test]
    fn oscillator_spectrum_is_landau() {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        let p = assemble_internal(&f, &Backend::Oscillator { levels: 20, centres: 1 }).unwrap();
        let ev = spectrum(&p.operator.matrix);
        let mut expect = vec![1.0];
        for n in 1..20 {
            let e = libm::sqrt(2.0 * n as f64 + 1.0);
            expect.push(e);
            expect.push(-e);
        }
        expect.sort_by(f64::total_cmp);
        assert_eq!(ev.len(), expect.len());
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_grid_has_no_spectrum_in_mass_gap() {
        let f = FieldModel::constant(0.0, 1.0).unwrap();
        let p = assemble_internal(&f, &Backend::Grid { n: [12, 12], half_length: [3.0, 3.0] }).unwrap();
        for e in spectrum(&p.operator.matrix) {
            assert!(e.abs() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn fiber_square_identity_is_exact() {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        for backend in [
            Backend::Oscillator { levels: 6, centres: 2 },
            Backend::Grid { n: [6, 5], half_length: [2.0, 2.0] },
        ] {
            let p = assemble_internal(&f, &backend).unwrap();
            let d = fiber_square_defect(&p, &[0.0, 0.5, -2.0, 10.0]).unwrap();
            assert!(d.iter().all(|x| *x <= 1e-12), "{backend:?} {d:?}");
            assert_eq!(assemble_fiber(&p, 0.5).unwrap().hermiticity_defect(), 0.0);
        }
    }

    #[test]
    fn alpha3_anticommutes_with_transverse_part_and_beta() {
        let f = FieldModel::constant(1.0, 0.7).unwrap();
        let p = assemble_internal(&f, &Backend::Grid { n: [5, 5], half_length: [2.0, 2.0] }).unwrap();
        let h0 = assemble_fiber(&p, 0.0).unwrap().matrix;
        let a3 = p.alpha3();
        let anti = a3.matmul(&h0).add(&h0.matmul(&a3));
        assert!(anti.max_abs() < 1e-14);
        let b = p.beta();
        assert!(a3.matmul(&b).add(&b.matmul(&a3)).max_abs() == 0.0);
    }

    #[test]
    fn gauge_covariance_under_quadratic_gauge_function() {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        let backend = Backend::Grid { n: [8, 8], half_length: [2.0, 2.0] };
        let p = assemble_internal(&f, &backend).unwrap();
        // χ = 0.3 x₁² − 0.2 x₁x₂ + 0.1 x₂², ∇χ integrated exactly by the midpoint rule
        let q = assemble_internal_with_gauge(&f, &backend, &|x| {
            [0.6 * x[0] - 0.2 * x[1], -0.2 * x[0] + 0.2 * x[1]]
        })
        .unwrap();
        let a = spectrum(&p.operator.matrix);
        let b = spectrum(&q.operator.matrix);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        // and the two matrices differ, so the check is not vacuous
        assert!(p.operator.matrix.sub(&q.operator.matrix).max_abs() > 1e-3);
    }

    #[test]
    fn spinor_multiplier_of_identity_shape_is_block_diagonal() {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        let p = assemble_internal(&f, &Backend::Oscillator { levels: 3, centres: 2 }).unwrap();
        let phi = CsrMatrix::identity(p.up_dim);
        let m = p.spinor_multiplier(&crate::clifford::identity::<4>(), &phi);
        let dense = m.to_dense();
        assert!(dense.sub(&DenseMatrix::identity(p.fiber_dim())).max_abs() == 0.0);
    }
}
