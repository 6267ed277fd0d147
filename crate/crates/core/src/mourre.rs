//! Conjugate operator `A`, commutator `T = (P₃H₀⁻¹)²`, the optimal Mourre
//! constants `ρ(λ; ε)`, commutator identities under mesh refinement and the
//! limiting-absorption probe.

use crate::discretize::{assemble_fiber, assemble_h0_3d, InternalParts, P3Scheme, ThreeD};
use crate::eigensolve::{eig_dense, spectral_projector, DirectSolver, FiberInverse, InverseApplier};
use crate::error::{invalid, Error, Result};
use crate::linalg::vector::{axpy, dot, norm, sub};
use crate::linalg::{CsrMatrix, DenseMatrix, LinearOperator, C64};
use crate::rng::SeededRng;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Target {
    Free3d,
    Perturbed3d,
    /// all fibers on a momentum grid
    Fibers,
    Fiber(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MourreQuery {
    pub lambda: f64,
    pub epsilon: f64,
    pub target: Target,
    pub inner_tol: f64,
}

impl MourreQuery {
    pub fn new(lambda: f64, epsilon: f64, target: Target, inner_tol: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", "window half-width must be positive"));
        }
        if !lambda.is_finite() {
            return Err(invalid("lambda", "must be finite"));
        }
        if !(inner_tol > 0.0) {
            return Err(invalid("inner_tol", "must be positive"));
        }
        Ok(Self {
            lambda,
            epsilon,
            target,
            inner_tol,
        })
    }
}

/// Uniform momentum grid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct XiGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl XiGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo <= hi) || points == 0 || (points == 1 && lo != hi) {
            return Err(invalid("xi_grid", "need lo ≤ hi and at least one point"));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn nodes(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MourreReport {
    pub query: MourreQuery,
    /// min eigenvalue of the compressed commutator; `+∞` for an empty window
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub rho: f64,
    /// `inf{(λ² − μ²)/λ² : μ ∈ σ⁰_sym ∩ [0, |λ|]}`, `+∞` if the set is empty
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub lower_bound: f64,
    pub margin: f64,
    pub passed: bool,
    pub window_rank: usize,
    /// fiber mode: largest deviation from the per-fiber closed form
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::option"))]
    pub closed_form_defect: Option<f64>,
    pub xi_grid: Option<XiGrid>,
    pub argmin_xi: Option<f64>,
    /// the minimizing fiber sits on the edge of the momentum grid
    pub argmin_at_grid_boundary: bool,
}

impl MourreReport {
    fn new(query: MourreQuery, rho: f64, lower_bound: f64, margin: f64, rank: usize) -> Self {
        Self {
            query,
            rho,
            lower_bound,
            margin,
            passed: passes(rho, lower_bound, margin),
            window_rank: rank,
            closed_form_defect: None,
            xi_grid: None,
            argmin_xi: None,
            argmin_at_grid_boundary: false,
        }
    }
}

fn passes(rho: f64, bound: f64, margin: f64) -> bool {
    if bound == f64::INFINITY {
        rho == f64::INFINITY
    } else {
        rho >= bound - margin
    }
}

/// `inf{(λ² − μ²)/λ² : μ ∈ σ⁰_sym ∩ [0, |λ|]}`; the flag marks the
/// degenerate case `λ = 0 ∈ σ⁰_sym`, reported as `0`.
pub fn rho_lower_bound(sym: &[f64], lambda: f64) -> (f64, bool) {
    let a = lambda.abs();
    let best = sym.iter().copied().filter(|&mu| mu >= 0.0 && mu <= a).fold(f64::NAN, f64::max);
    if best.is_nan() {
        return (f64::INFINITY, false);
    }
    if a == 0.0 {
        return (0.0, true);
    }
    ((a * a - best * best) / (a * a), false)
}

/// `inf{ξ²/ρ² : ρ ∈ (λ − ε, λ + ε) ∩ σ[H₀(ξ)]}`
pub fn rho_closed_form(fiber_eigs: &[f64], xi: f64, lambda: f64, eps: f64) -> f64 {
    fiber_eigs
        .iter()
        .filter(|&&r| r > lambda - eps && r < lambda + eps)
        .map(|&r| xi * xi / (r * r))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of `⟨b_i, S b_j⟩` on an orthonormal basis; `+∞` if empty.
pub fn compress_min(basis: &[Vec<C64>], s: &dyn Fn(&[C64]) -> Result<Vec<C64>>) -> Result<f64> {
    let k = basis.len();
    if k == 0 {
        return Ok(f64::INFINITY);
    }
    let images: Vec<Vec<C64>> = basis.iter().map(|b| s(b)).collect::<Result<_>>()?;
    let g = DenseMatrix::from_fn(k, k, |i, j| {
        0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]).conj())
    });
    Ok(g.hermitian_eigen(false)?.values[0])
}

/// `ρ^S_H(λ; ε)` for a sparse `H` and symmetric applier `S`.
pub fn rho_of_window(h: &CsrMatrix, s: &dyn LinearOperator, query: MourreQuery) -> Result<MourreReport> {
    let w = spectral_projector(h, query.lambda, query.epsilon, query.inner_tol)?;
    let rho = compress_min(&w.basis, &|v| Ok(s.apply_new(v)))?;
    let mut r = MourreReport::new(query, rho, f64::NEG_INFINITY, 0.0, w.rank());
    r.passed = true;
    Ok(r)
}

/// `T(ξ) = ξ²H₀(ξ)⁻²` through two direct solves.
pub struct FiberT {
    pub xi: f64,
    solver: Option<DirectSolver>,
    dim: usize,
}

pub fn operator_t_fiber(parts: &InternalParts, xi: f64, tol: f64) -> Result<FiberT> {
    let h = assemble_fiber(parts, xi)?;
    let dim = h.dim();
    let solver = if xi == 0.0 {
        None
    } else {
        Some(DirectSolver::new(&h.matrix, ZERO, tol)?)
    };
    Ok(FiberT { xi, solver, dim })
}

impl FiberT {
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        match &self.solver {
            None => Ok(vec![ZERO; v.len()]),
            Some(s) => {
                let w = s.solve(&s.solve(v)?)?;
                Ok(w.into_iter().map(|z| z * (self.xi * self.xi)).collect())
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Per-fiber sample of the Mourre constant.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiberSample {
    pub xi: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub rho: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub closed_form: f64,
    pub rank: usize,
}

/// Compresses `T(ξ)` to the window of `H₀(ξ)` and compares with the closed form.
pub fn fiber_sample(parts: &InternalParts, xi: f64, lambda: f64, eps: f64, tol: f64) -> Result<FiberSample> {
    let h = assemble_fiber(parts, xi)?;
    let all = eig_dense(&h.matrix, true)?;
    let vecs = all.vectors.clone().unwrap_or_default();
    let basis: Vec<Vec<C64>> = all
        .eigenvalues
        .iter()
        .zip(vecs)
        .filter(|(e, _)| **e > lambda - eps && **e < lambda + eps)
        .map(|(_, v)| v)
        .collect();
    let t = operator_t_fiber(parts, xi, tol)?;
    let rho = compress_min(&basis, &|v| t.apply(v))?;
    Ok(FiberSample {
        xi,
        rho,
        closed_form: rho_closed_form(&all.eigenvalues, xi, lambda, eps),
        rank: basis.len(),
    })
}

/// Essential infimum over `ξ` realized as a minimum over the grid samples.
pub fn combine_fiber_samples(
    query: MourreQuery,
    samples: &[FiberSample],
    grid: XiGrid,
    sym: &[f64],
    margin: f64,
) -> MourreReport {
    let (bound, _) = rho_lower_bound(sym, query.lambda);
    let mut best: Option<&FiberSample> = None;
    let mut defect: f64 = 0.0;
    let mut rank = 0;
    for s in samples {
        rank += s.rank;
        if s.rank > 0 {
            defect = defect.max((s.rho - s.closed_form).abs());
        }
        if best.map_or(true, |b| s.rho < b.rho) {
            best = Some(s);
        }
    }
    let rho = best.map_or(f64::INFINITY, |b| b.rho);
    let mut r = MourreReport::new(query, rho, bound, margin, rank);
    r.closed_form_defect = Some(defect);
    r.xi_grid = Some(grid);
    if rho.is_finite() {
        let xi = best.map(|b| b.xi);
        r.argmin_xi = xi;
        let edge = xi.is_some_and(|x| x == grid.lo || x == grid.hi);
        r.argmin_at_grid_boundary = edge;
    }
    r
}

pub fn mourre_verify_fibers(
    parts: &InternalParts,
    sym: &[f64],
    query: MourreQuery,
    grid: XiGrid,
    margin: f64,
) -> Result<MourreReport> {
    let samples = grid
        .nodes()
        .into_iter()
        .map(|xi| fiber_sample(parts, xi, query.lambda, query.epsilon, query.inner_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine_fiber_samples(query, &samples, grid, sym, margin))
}

/// Direct compression of `T` on a window of the assembled 3-D `H₀`.
pub fn mourre_verify_3d(h: &ThreeD, sym: &[f64], query: MourreQuery, margin: f64) -> Result<MourreReport> {
    let op = h.operator()?;
    let w = spectral_projector(&op.matrix, query.lambda, query.epsilon, query.inner_tol)?;
    let t = operator_t(h)?;
    let rho = compress_min(&w.basis, &|v| Ok(t.apply_new(v)))?;
    let (bound, _) = rho_lower_bound(sym, query.lambda);
    Ok(MourreReport::new(query, rho, bound, margin, w.rank()))
}

/// True when `ρ(λ; ε′) ≤ ρ(λ; ε) + tol` for every pair with `ε′ > ε` at the
/// same `λ`.
pub fn epsilon_monotone(reports: &[MourreReport], tol: f64) -> bool {
    reports.iter().all(|a| {
        reports.iter().all(|b| {
            a.query.lambda != b.query.lambda
                || b.query.epsilon <= a.query.epsilon
                || b.rho <= a.rho + tol
                || a.rho == f64::INFINITY
        })
    })
}

/// `T = P₃H₀⁻¹P₃H₀⁻¹` on the 3-D grid.
pub struct TOperator<'a> {
    pub inverse: FiberInverse<'a>,
}

pub fn operator_t(h: &ThreeD) -> Result<TOperator<'_>> {
    Ok(TOperator {
        inverse: FiberInverse::new(h)?,
    })
}

impl LinearOperator for TOperator<'_> {
    fn dim(&self) -> usize {
        self.inverse.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let w = self.inverse.apply_p3_inverse(&self.inverse.apply_p3_inverse(x));
        y.copy_from_slice(&w);
    }
}

/// `A = ½(H₀⁻¹P₃Q₃ + Q₃P₃H₀⁻¹)`, never assembled.
pub struct ConjugateA<'a, 'b> {
    pub h: &'a ThreeD,
    pub inverse: &'b FiberInverse<'a>,
}

pub fn conjugate_a<'a, 'b>(h: &'a ThreeD, inverse: &'b FiberInverse<'a>) -> ConjugateA<'a, 'b> {
    ConjugateA { h, inverse }
}

impl LinearOperator for ConjugateA<'_, '_> {
    fn dim(&self) -> usize {
        self.h.total_dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let q = self.h.apply_q3_fn(&|z| C64::new(z, 0.0), x);
        let a = self.inverse.apply_p3_inverse(&q);
        let b = self.h.apply_q3_fn(&|z| C64::new(z, 0.0), &self.inverse.apply_p3_inverse(x));
        for ((yi, ai), bi) in y.iter_mut().zip(&a).zip(&b) {
            *yi = 0.5 * (ai + bi);
        }
    }
}

/// `max |⟨Sv, w⟩ − ⟨v, Sw⟩| / (‖v‖‖w‖)` over random pairs.
pub fn symmetry_defect(s: &dyn LinearOperator, pairs: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let n = s.dim();
    let mut d: f64 = 0.0;
    for _ in 0..pairs {
        let v = rng.complex_vector(n);
        let w = rng.complex_vector(n);
        let lhs = dot(&s.apply_new(&v), &w);
        let rhs = dot(&v, &s.apply_new(&w));
        d = d.max((lhs - rhs).norm() / (norm(&v) * norm(&w)));
    }
    d
}

/// Functions of `Q₃` with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum TestFunction {
    /// `x`
    Coordinate,
    /// `⟨x⟩ = √(1 + x²)`
    Japanese,
    /// `⟨x⟩^{1/2}`
    SqrtJapanese,
    /// `(⟨x⟩ + ir)⁻¹`
    Resolvent { r: f64 },
    Constant { c: f64 },
}

fn japanese(x: f64) -> f64 {
    libm::sqrt(1.0 + x * x)
}

impl TestFunction {
    pub fn standard() -> Vec<Self> {
        vec![
            Self::Coordinate,
            Self::Japanese,
            Self::SqrtJapanese,
            Self::Resolvent { r: 1.0 },
            Self::Resolvent { r: 10.0 },
        ]
    }

    pub fn value(&self, x: f64) -> C64 {
        match *self {
            Self::Coordinate => C64::new(x, 0.0),
            Self::Japanese => C64::new(japanese(x), 0.0),
            Self::SqrtJapanese => C64::new(libm::sqrt(japanese(x)), 0.0),
            Self::Resolvent { r } => C64::new(1.0, 0.0) / C64::new(japanese(x), r),
            Self::Constant { c } => C64::new(c, 0.0),
        }
    }

    pub fn derivative(&self, x: f64) -> C64 {
        let j = japanese(x);
        match *self {
            Self::Coordinate => C64::new(1.0, 0.0),
            Self::Japanese => C64::new(x / j, 0.0),
            Self::SqrtJapanese => C64::new(0.5 * x * libm::pow(j, -1.5), 0.0),
            Self::Resolvent { r } => {
                let d = C64::new(j, r);
                -C64::new(x / j, 0.0) / (d * d)
            }
            Self::Constant { .. } => ZERO,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Coordinate => "q".into(),
            Self::Japanese => "<q>".into(),
            Self::SqrtJapanese => "<q>^1/2".into(),
            Self::Resolvent { r } => format!("(<q>+{r}i)^-1"),
            Self::Constant { c } => format!("const {c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SuiteConfig {
    pub base_n3: usize,
    pub refinements: usize,
    pub half_length3: f64,
    /// test state: Gaussian in `x₃` centred here …
    pub centre: f64,
    /// … with this standard deviation, times random transverse coefficients
    pub width: f64,
    pub seed: u64,
    pub functions: Vec<TestFunction>,
    pub memory_budget: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            base_n3: 32,
            refinements: 3,
            half_length3: 10.0,
            centre: 0.0,
            width: 1.5,
            seed: 7,
            functions: TestFunction::standard(),
            memory_budget: 60_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunctionResiduals {
    pub function: String,
    pub resolvent_commutator: f64,
    pub momentum_commutator: f64,
    pub conjugation: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeshResiduals {
    pub n3: usize,
    pub h3: f64,
    pub anticommutator: f64,
    pub commutator_t: f64,
    pub a_symmetry: f64,
    pub functions: Vec<FunctionResiduals>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceOrder {
    pub identity: String,
    /// `log₂(r_k / r_{k+1})` for consecutive meshes
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::seq"))]
    pub orders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IdentityResiduals {
    pub half_length3: f64,
    pub meshes: Vec<MeshResiduals>,
    pub orders: Vec<ConvergenceOrder>,
}

impl IdentityResiduals {
    /// Smallest observed order over identities whose name starts with
    /// `prefix`; identities with vanishing residuals are skipped.
    pub fn min_order(&self, prefix: &str) -> Option<f64> {
        self.orders
            .iter()
            .filter(|o| o.identity.starts_with(prefix))
            .flat_map(|o| o.orders.iter().copied())
            .filter(|x| x.is_finite())
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))))
    }

    pub fn max_anticommutator(&self) -> f64 {
        self.meshes.iter().map(|m| m.anticommutator).fold(0.0, f64::max)
    }
}

/// Point counts with `h₃` halved at fixed box: `n ↦ 2(n − 1) + 1`.
pub fn mesh_ladder(base: usize, refinements: usize) -> Vec<usize> {
    let mut out = vec![base];
    for _ in 0..refinements {
        let last = *out.last().unwrap_or(&base);
        out.push(2 * (last - 1) + 1);
    }
    out
}

fn ip(a: &[C64], b: &[C64], h: f64) -> C64 {
    dot(a, b) * h
}

fn scaled_norm(a: &[C64], h: f64) -> f64 {
    norm(a) * libm::sqrt(h)
}

/// Residuals of one mesh.
pub fn identity_residuals_on(h: &ThreeD, cfg: &SuiteConfig) -> Result<MeshResiduals> {
    let inv = FiberInverse::new(h)?;
    let hx = h.h3;
    let t = h.t_dim();
    let mut rng = SeededRng::new(cfg.seed);
    let coef = rng.complex_vector(t);
    let mut psi = Vec::with_capacity(h.total_dim());
    for &z in &h.x3 {
        let g = libm::exp(-(z - cfg.centre) * (z - cfg.centre) / (2.0 * cfg.width * cfg.width));
        psi.extend(coef.iter().map(|c| c * g));
    }
    let psi_norm = scaled_norm(&psi, hx);
    let hp = inv.apply_inverse(&psi);
    let p3hp = inv.apply_p3_inverse(&psi);

    // α₃H⁻¹ + H⁻¹α₃ = 2P₃H⁻² on a random vector
    let v = SeededRng::new(cfg.seed ^ 0xf2).complex_vector(h.total_dim());
    let hv = inv.apply_inverse(&v);
    let lhs = inv.apply_inverse(&h.apply_alpha3(&v));
    let mut r2 = h.apply_alpha3(&hv);
    axpy(C64::new(1.0, 0.0), &lhs, &mut r2);
    axpy(C64::new(-2.0, 0.0), &inv.apply_p3_inverse(&hv), &mut r2);
    let anticommutator = norm(&r2) / norm(&v);

    // ⟨ψ, [H⁻¹, iA]ψ⟩ + ⟨H⁻¹ψ, T H⁻¹ψ⟩ = 0 with Aψ = ½(H⁻¹P₃Q₃ψ + Q₃P₃H⁻¹ψ)
    let a = ConjugateA { h, inverse: &inv };
    let apsi = a.apply_new(&psi);
    let i = C64::new(0.0, 1.0);
    let iap: Vec<C64> = apsi.iter().map(|z| z * i).collect();
    let ihp: Vec<C64> = hp.iter().map(|z| z * i).collect();
    let t_hp = inv.apply_p3_inverse(&inv.apply_p3_inverse(&hp));
    let r3 = ip(&hp, &iap, hx) - ip(&apsi, &ihp, hx) + ip(&hp, &t_hp, hx);
    let commutator_t = r3.norm() / (psi_norm * psi_norm);

    // symmetry of A on two smooth states
    let phi = {
        let c2 = rng.complex_vector(t);
        let mut out = Vec::with_capacity(h.total_dim());
        for &z in &h.x3 {
            let g = libm::exp(-(z + 0.5) * (z + 0.5) / (2.0 * cfg.width * cfg.width));
            out.extend(c2.iter().map(|c| c * g));
        }
        out
    };
    let aphi = a.apply_new(&phi);
    let a_symmetry = (ip(&apsi, &phi, hx) - ip(&psi, &aphi, hx)).norm()
        / (scaled_norm(&apsi, hx) * scaled_norm(&phi, hx)).max(f64::MIN_POSITIVE);

    let hpsi = h.apply_new(&psi);
    let mut functions = Vec::with_capacity(cfg.functions.len());
    for f in &cfg.functions {
        let fv = |x: &[C64]| h.apply_q3_fn(&|z| f.value(z), x);
        let dv = |x: &[C64]| h.apply_q3_fn(&|z| f.derivative(z), x);
        let f_psi = fv(&psi);
        let h_f_psi = inv.apply_inverse(&f_psi);
        let a3_dhp = h.apply_alpha3(&dv(&hp));
        let h_a3_dhp = inv.apply_inverse(&a3_dhp);
        // (a) i(H⁻¹F − FH⁻¹)ψ + H⁻¹α₃F′H⁻¹ψ
        let mut ra: Vec<C64> = sub(&h_f_psi, &fv(&hp)).into_iter().map(|z| z * i).collect();
        axpy(C64::new(1.0, 0.0), &h_a3_dhp, &mut ra);
        // (b) (P₃H⁻¹F − FP₃H⁻¹)ψ − i(P₃H⁻¹α₃F′H⁻¹ − F′H⁻¹)ψ
        let mut rb = sub(&h.apply_p3(&h_f_psi), &fv(&p3hp));
        let inner = sub(&h.apply_p3(&h_a3_dhp), &dv(&hp));
        axpy(-i, &inner, &mut rb);
        // conjugation: iH⁻¹FHψ + H⁻¹α₃F′ψ − iFψ
        let mut rn: Vec<C64> = inv.apply_inverse(&fv(&hpsi)).into_iter().map(|z| z * i).collect();
        axpy(C64::new(1.0, 0.0), &inv.apply_inverse(&h.apply_alpha3(&dv(&psi))), &mut rn);
        axpy(-i, &f_psi, &mut rn);
        functions.push(FunctionResiduals {
            function: f.label(),
            resolvent_commutator: scaled_norm(&ra, hx) / psi_norm,
            momentum_commutator: scaled_norm(&rb, hx) / psi_norm,
            conjugation: scaled_norm(&rn, hx) / psi_norm,
        });
    }
    Ok(MeshResiduals {
        n3: h.n3(),
        h3: hx,
        anticommutator,
        commutator_t,
        a_symmetry,
        functions,
    })
}

/// Runs the identity suite over the `x₃` mesh ladder with central-difference
/// `P₃`.
pub fn identity_suite(parts: &InternalParts, cfg: &SuiteConfig) -> Result<IdentityResiduals> {
    identity_suite_with(parts, cfg, &mut |_| {})
}

/// As [`identity_suite`], reporting each finished mesh to `progress`.
pub fn identity_suite_with(
    parts: &InternalParts,
    cfg: &SuiteConfig,
    progress: &mut dyn FnMut(&MeshResiduals),
) -> Result<IdentityResiduals> {
    if cfg.refinements == 0 {
        return Err(invalid("refinements", "need at least one refinement for an order"));
    }
    let mut meshes = Vec::new();
    for n3 in mesh_ladder(cfg.base_n3, cfg.refinements) {
        let h = assemble_h0_3d(parts, n3, cfg.half_length3, P3Scheme::CentralDifference, cfg.memory_budget)?;
        let m = identity_residuals_on(&h, cfg)?;
        progress(&m);
        meshes.push(m);
    }
    let order = |r: &[f64]| -> Vec<f64> {
        r.windows(2)
            .map(|w| {
                if w[0] > 0.0 && w[1] > 0.0 {
                    libm::log2(w[0] / w[1])
                } else {
                    f64::NAN
                }
            })
            .collect()
    };
    let mut orders = Vec::new();
    orders.push(ConvergenceOrder {
        identity: "commutator_t".into(),
        orders: order(&meshes.iter().map(|m| m.commutator_t).collect::<Vec<_>>()),
    });
    for (k, f) in cfg.functions.iter().enumerate() {
        if matches!(f, TestFunction::Constant { .. }) {
            continue;
        }
        let series = |g: &dyn Fn(&FunctionResiduals) -> f64| -> Vec<f64> {
            order(&meshes.iter().map(|m| g(&m.functions[k])).collect::<Vec<_>>())
        };
        orders.push(ConvergenceOrder {
            identity: format!("resolvent_commutator[{}]", f.label()),
            orders: series(&|r| r.resolvent_commutator),
        });
        orders.push(ConvergenceOrder {
            identity: format!("momentum_commutator[{}]", f.label()),
            orders: series(&|r| r.momentum_commutator),
        });
        orders.push(ConvergenceOrder {
            identity: format!("conjugation[{}]", f.label()),
            orders: series(&|r| r.conjugation),
        });
    }
    Ok(IdentityResiduals {
        half_length3: cfg.half_length3,
        meshes,
        orders,
    })
}

/// One row of the limiting-absorption table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LapRow {
    pub epsilon: f64,
    /// `⟨ψ, (H − λ − iε)⁻¹ψ⟩`
    pub f_plus: C64,
    /// `⟨ψ, (H − λ + iε)⁻¹ψ⟩`
    pub f_minus: C64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LapTable {
    pub lambda: f64,
    pub rows: Vec<LapRow>,
    /// `|F(ε_{k+1}) − F(ε_k)|`
    pub increments: Vec<f64>,
    pub increments_decreasing: bool,
    /// log–log slope of `|Im F(ε)|` against `ε`
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::option"))]
    pub im_slope: Option<f64>,
}

/// `F(ε)` for each `ε` of a decreasing list.
pub fn lap_probe(h: &CsrMatrix, psi: &[C64], lambda: f64, eps_list: &[f64], tol: f64) -> Result<LapTable> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("eps_list", "must be positive and strictly decreasing"));
    }
    if psi.len() != h.rows() {
        return Err(Error::Dimension {
            expected: h.rows(),
            found: psi.len(),
        });
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut pair = [ZERO; 2];
        let mut residual: f64 = 0.0;
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let z = C64::new(lambda, sign * eps);
            let s = DirectSolver::new(h, z, tol)?;
            let w = s.solve(psi)?;
            let mut r = h.matvec(&w);
            axpy(-z, &w, &mut r);
            let res = norm(&sub(&r, psi)) / norm(psi).max(f64::MIN_POSITIVE);
            residual = residual.max(if norm(psi) == 0.0 { 0.0 } else { res });
            pair[k] = dot(psi, &w);
        }
        rows.push(LapRow {
            epsilon: eps,
            f_plus: pair[0],
            f_minus: pair[1],
            residual,
        });
    }
    let increments: Vec<f64> = rows.windows(2).map(|w| (w[1].f_plus - w[0].f_plus).norm()).collect();
    let increments_decreasing = increments.windows(2).all(|w| w[1] < w[0]);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.f_plus.im != 0.0)
        .map(|r| (libm::log(r.epsilon), libm::log(r.f_plus.im.abs())))
        .collect();
    let im_slope = (pts.len() >= 2).then(|| linear_fit_slope(&pts));
    Ok(LapTable {
        lambda,
        rows,
        increments,
        increments_decreasing,
        im_slope,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn linear_fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `⟨Q₃⟩^{−s}` as a diagonal on the 3-D grid.
pub fn q3_weight(h: &ThreeD, s: f64) -> CsrMatrix {
    let d: Vec<f64> = h.q3_diag().into_iter().map(|z| libm::pow(1.0 + z * z, -s / 2.0)).collect();
    CsrMatrix::from_diagonal(&d)
}

/// `(1 + |x_⊥|²)^{−s/2}` on the transverse four-spinor space; the stand-in
/// weight when probing a single fiber.
pub fn transverse_weight(parts: &InternalParts, s: f64) -> Result<CsrMatrix> {
    let w = |r2: f64| libm::pow(1.0 + r2, -s / 2.0);
    let phi = parts.transverse_multiplier(&|x| w(x[0] * x[0] + x[1] * x[1]), Some(&w))?;
    Ok(parts.spinor_multiplier(&crate::clifford::identity::<4>(), &phi))
}

/// `ψ = W φ` for random `φ`, one per trial.
pub fn weighted_states(weight: &CsrMatrix, trials: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = SeededRng::new(seed);
    (0..trials)
        .map(|_| weight.matvec(&rng.complex_vector(weight.rows())))
        .collect()
}
