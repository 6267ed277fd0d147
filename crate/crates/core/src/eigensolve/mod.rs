//! Hermitian eigensolvers: dense, windowed shift-invert Lanczos, spectral
//! projectors for energy windows, and the inner linear solvers.

mod solvers;

pub use solvers::{
    apply_inverse, minres, DirectSolver, FiberInverse, InverseApplier, MinresSolver, SINGULAR_PIVOT,
};

use crate::error::{invalid, Error, Result};
use crate::linalg::vector::{axpy, dot, norm, normalize, orthogonalize_against};
use crate::linalg::{CsrMatrix, DenseMatrix, LinearOperator, C64};
use crate::rng::SeededRng;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Largest dimension accepted by [`eig_dense`].
pub const DENSE_THRESHOLD: usize = 4096;

/// Seed for all starting blocks.
pub const START_SEED: u64 = 0x6d61_6764_6972_6163;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Dense,
    ShiftInvertLanczos,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cluster {
    pub center: f64,
    pub first: usize,
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumResult {
    /// ascending
    pub eigenvalues: Vec<f64>,
    /// `‖Mv − λv‖` for unit `v`
    pub residuals: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// per eigenvalue: suspected truncation or boundary artifact
    pub artifact_flags: Vec<bool>,
    pub tolerance: f64,
    /// false when `k_max` stopped the search before the window was exhausted
    pub exhausted: bool,
    pub method: Method,
    pub provenance: String,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub vectors: Option<Vec<Vec<C64>>>,
}

impl SpectrumResult {
    fn build(
        mut pairs: Vec<(f64, f64, Option<Vec<C64>>)>,
        tolerance: f64,
        exhausted: bool,
        method: Method,
        cluster_tol: f64,
    ) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let residuals = pairs.iter().map(|p| p.1).collect();
        let vectors = if pairs.iter().all(|p| p.2.is_some()) && !pairs.is_empty() {
            Some(pairs.into_iter().map(|p| p.2.unwrap_or_default()).collect())
        } else {
            None
        };
        let clusters = cluster(&eigenvalues, cluster_tol);
        Self {
            artifact_flags: vec![false; eigenvalues.len()],
            eigenvalues,
            residuals,
            clusters,
            tolerance,
            exhausted,
            method,
            provenance: String::new(),
            vectors,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Multiplicity of the cluster containing eigenvalue `i`.
    pub fn multiplicity_of(&self, i: usize) -> usize {
        self.clusters
            .iter()
            .find(|c| i >= c.first && i < c.first + c.multiplicity)
            .map_or(1, |c| c.multiplicity)
    }

    pub fn with_provenance(mut self, p: impl Into<String>) -> Self {
        self.provenance = p.into();
        self
    }

    /// Re-cluster with an explicit tolerance.
    pub fn recluster(&mut self, tol: f64) {
        self.clusters = cluster(&self.eigenvalues, tol);
    }

    /// Eigenvalues inside the open interval `(lo, hi)`.
    pub fn in_interval(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.eigenvalues.iter().copied().filter(|&e| e > lo && e < hi).collect()
    }
}

/// Groups sorted values whose consecutive gaps are at most `tol`.
pub fn cluster(sorted: &[f64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    let mut sum = 0.0;
    for (i, &e) in sorted.iter().enumerate() {
        match out.last_mut() {
            Some(c) if e - sorted[i - 1] <= tol => {
                c.multiplicity += 1;
                sum += e;
                c.center = sum / c.multiplicity as f64;
            }
            _ => {
                sum = e;
                out.push(Cluster {
                    center: e,
                    first: i,
                    multiplicity: 1,
                });
            }
        }
    }
    out
}

fn default_cluster_tol(values: &[f64]) -> f64 {
    match (values.first(), values.last()) {
        (Some(a), Some(b)) if b > a => 1e-8 * (b - a),
        _ => 1e-8,
    }
}

fn residual(op: &dyn LinearOperator, lambda: f64, v: &[C64]) -> f64 {
    let mut r = op.apply_new(v);
    axpy(C64::new(-lambda, 0.0), v, &mut r);
    norm(&r)
}

/// Full spectrum of a hermitian sparse matrix of size at most
/// [`DENSE_THRESHOLD`].
pub fn eig_dense(op: &CsrMatrix, want_vectors: bool) -> Result<SpectrumResult> {
    eig_dense_with_threshold(op, want_vectors, DENSE_THRESHOLD)
}

pub fn eig_dense_with_threshold(
    op: &CsrMatrix,
    want_vectors: bool,
    threshold: usize,
) -> Result<SpectrumResult> {
    let n = op.rows();
    if n > threshold {
        return Err(Error::DenseThreshold { dim: n, threshold });
    }
    if n != op.cols() {
        return Err(Error::Dimension {
            expected: n,
            found: op.cols(),
        });
    }
    let dense = op.to_dense();
    let eig = dense.hermitian_eigen(true)?;
    let vecs = eig.vectors.unwrap_or_default();
    let pairs = eig
        .values
        .iter()
        .zip(vecs)
        .map(|(&l, v)| {
            let r = residual(op, l, &v);
            (l, r, want_vectors.then_some(v))
        })
        .collect();
    let tol = 1e-12 * op.norm_inf().max(f64::MIN_POSITIVE);
    let ct = default_cluster_tol(&eig.values);
    Ok(SpectrumResult::build(pairs, tol, true, Method::Dense, ct))
}

/// Knobs for the windowed solver.
#[derive(Debug, Clone, Copy)]
pub struct WindowOptions {
    pub block: usize,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
    pub want_vectors: bool,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            block: 4,
            krylov_dim: 120,
            max_restarts: 400,
            seed: START_SEED,
            want_vectors: true,
        }
    }
}

/// All eigenvalues of `op` in the open interval `(lo, hi)`, up to `k_max`,
/// each with residual at most `tol`.
pub fn eig_window(op: &CsrMatrix, lo: f64, hi: f64, k_max: usize, tol: f64) -> Result<SpectrumResult> {
    eig_window_with(op, lo, hi, k_max, tol, WindowOptions::default())
}

pub fn eig_window_with(
    op: &CsrMatrix,
    lo: f64,
    hi: f64,
    k_max: usize,
    tol: f64,
    opts: WindowOptions,
) -> Result<SpectrumResult> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid("interval", "need finite lo < hi"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let n = op.rows();
    if n == 0 {
        return Err(Error::Empty("operator"));
    }
    let half = 0.5 * (hi - lo);
    let mut sigma = 0.5 * (lo + hi);
    // pick a midpoint shift away from eigenvalues
    let mut solver = None;
    for attempt in 0..6 {
        match DirectSolver::new(op, C64::new(sigma, 0.0), 1e-12) {
            Ok(s) => {
                solver = Some(s);
                break;
            }
            Err(Error::NearSingular { .. }) => {
                sigma += half * 0.0618 * (attempt + 1) as f64;
            }
            Err(e) => return Err(e),
        }
    }
    let solver = solver.ok_or(Error::NearSingular {
        pivot: 0.0,
        ritz: sigma,
    })?;
    let opts = WindowOptions {
        krylov_dim: opts.krylov_dim.min(n).max(1),
        block: opts.block.clamp(1, n),
        ..opts
    };

    let mut rng = SeededRng::new(opts.seed);
    let mut locked: Vec<Vec<C64>> = Vec::new();
    let mut pairs: Vec<(f64, f64, Option<Vec<C64>>)> = Vec::new();
    let mut carry: Vec<Vec<C64>> = Vec::new();
    let mut exhausted = false;
    let mut quiet_rounds = 0;
    let mut stalled = 0;
    let strict = (1e-2 * tol).max(1e-14 * op.norm_inf());

    let mut rounds = 0;
    for _ in 0..opts.max_restarts {
        rounds += 1;
        if locked.len() >= n {
            exhausted = true;
            break;
        }
        // starting block: unconverged Ritz vectors from the last round, topped
        // up with random vectors
        let mut basis: Vec<Vec<C64>> = Vec::new();
        let mut images: Vec<Vec<C64>> = Vec::new();
        let mut block: Vec<Vec<C64>> = Vec::new();
        let mut start = core::mem::take(&mut carry);
        while start.len() < opts.block {
            start.push(rng.complex_vector(n));
        }
        for mut v in start {
            orthogonalize_against(&mut v, &locked);
            orthogonalize_against(&mut v, &block);
            if normalize(&mut v) > 1e-10 {
                block.push(v);
            }
        }
        // thick restart: room for the carried Ritz vectors plus fresh directions
        let dim = opts.krylov_dim.max(3 * block.len()).min(n - locked.len());
        while !block.is_empty() && basis.len() < dim {
            let mut next = Vec::new();
            for v in block {
                if basis.len() >= dim {
                    break;
                }
                let w = solver.refined(&v, 0);
                basis.push(v);
                next.push(w.clone());
                images.push(w);
            }
            block = Vec::new();
            for mut w in next {
                let before = norm(&w);
                orthogonalize_against(&mut w, &locked);
                orthogonalize_against(&mut w, &basis);
                orthogonalize_against(&mut w, &block);
                let after = norm(&w);
                if after > 1e-13 * before && after > 0.0 {
                    for z in &mut w {
                        *z /= after;
                    }
                    block.push(w);
                }
            }
        }
        let m = basis.len();
        if m == 0 {
            exhausted = true;
            break;
        }
        // Rayleigh–Ritz for the shift-inverted operator
        let mut t = DenseMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                t[(i, j)] = dot(&basis[i], &images[j]);
            }
        }
        let t = DenseMatrix::from_fn(m, m, |i, j| 0.5 * (t[(i, j)] + t[(j, i)].conj()));
        let eig = t.hermitian_eigen(true)?;
        let ys = eig.vectors.unwrap_or_default();
        let mut new_locked = 0;
        let mut pending: Vec<(f64, f64, Vec<C64>)> = Vec::new();
        for (theta, y) in eig.values.iter().zip(&ys) {
            if theta.abs() * half < 0.999 {
                continue;
            }
            let mut x = vec![C64::new(0.0, 0.0); n];
            for (c, b) in y.iter().zip(&basis) {
                axpy(*c, b, &mut x);
            }
            orthogonalize_against(&mut x, &locked);
            if normalize(&mut x) < 0.5 {
                continue;
            }
            let ax = op.matvec(&x);
            let lambda = dot(&x, &ax).re;
            if !(lambda > lo && lambda < hi) {
                continue;
            }
            let mut r = ax;
            axpy(C64::new(-lambda, 0.0), &x, &mut r);
            let res = norm(&r);
            if res <= strict && locked.len() < k_max {
                locked.push(x.clone());
                pairs.push((lambda, res, Some(x)));
                new_locked += 1;
            } else if res > strict {
                pending.push((lambda, res, x));
            }
        }
        // locked vectors carry small errors that put a floor under the
        // residuals of later ones; a stalled round triggers a joint
        // Rayleigh–Ritz over everything found so far
        if new_locked == 0 && !pending.is_empty() {
            stalled += 1;
            if stalled >= 2 {
                let mut all: Vec<Vec<C64>> = core::mem::take(&mut locked);
                all.extend(pending.drain(..).map(|p| p.2));
                let before = all.len();
                locked.clear();
                pairs.clear();
                for (lambda, res, x) in joint_refine(op, &solver, all, lo, hi)? {
                    if res <= tol && locked.len() < k_max {
                        locked.push(x.clone());
                        pairs.push((lambda, res, Some(x)));
                    } else {
                        pending.push((lambda, res, x));
                    }
                }
                if locked.len() + pending.len() < before || pending.is_empty() {
                    new_locked = 1;
                }
                stalled = 0;
            }
        } else {
            stalled = 0;
        }
        if locked.len() >= k_max {
            exhausted = pending.is_empty() && new_locked == 0;
            break;
        }
        if new_locked == 0 && pending.is_empty() {
            quiet_rounds += 1;
            if quiet_rounds >= 2 {
                exhausted = true;
                break;
            }
        } else {
            quiet_rounds = 0;
        }
        let mut pending: Vec<Vec<C64>> = pending.into_iter().map(|p| p.2).collect();
        pending.truncate(n.saturating_sub(locked.len()));
        carry = pending;
    }
    if !exhausted && locked.len() < k_max {
        let worst = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
        return Err(Error::NoConvergence {
            iterations: opts.max_restarts,
            residual: worst,
        });
    }
    let pairs = polish(op, pairs)?;
    let pairs = if opts.want_vectors {
        pairs
    } else {
        pairs.into_iter().map(|(l, r, _)| (l, r, None)).collect()
    };
    let ct = default_cluster_tol(&[lo, hi]);
    let mut res = SpectrumResult::build(pairs, tol, exhausted, Method::ShiftInvertLanczos, ct);
    res.provenance = format!("shift-invert at {sigma}, {rounds} restarts");
    Ok(res)
}

/// One step of subspace iteration with Rayleigh–Ritz on `span(V, Op V)`;
/// returns the in-window pairs.
fn joint_refine(
    op: &CsrMatrix,
    solver: &DirectSolver,
    vs: Vec<Vec<C64>>,
    lo: f64,
    hi: f64,
) -> Result<Vec<(f64, f64, Vec<C64>)>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let images: Vec<Vec<C64>> = vs.iter().map(|v| solver.refined(v, 1)).collect();
    for mut v in vs.into_iter().chain(images) {
        let before = norm(&v);
        orthogonalize_against(&mut v, &basis);
        if normalize(&mut v) > 1e-13 * before {
            basis.push(v);
        }
    }
    let k = basis.len();
    let av: Vec<Vec<C64>> = basis.iter().map(|v| op.matvec(v)).collect();
    let g = DenseMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&basis[i], &av[j]) + dot(&basis[j], &av[i]).conj()));
    let eig = g.hermitian_eigen(true)?;
    let mut out = Vec::new();
    for (l, y) in eig.values.iter().zip(eig.vectors.unwrap_or_default()) {
        if !(*l > lo && *l < hi) {
            continue;
        }
        let n = basis[0].len();
        let mut x = vec![C64::new(0.0, 0.0); n];
        let mut ax = vec![C64::new(0.0, 0.0); n];
        for ((c, v), a) in y.iter().zip(&basis).zip(&av) {
            axpy(*c, v, &mut x);
            axpy(*c, a, &mut ax);
        }
        axpy(C64::new(-*l, 0.0), &x, &mut ax);
        out.push((*l, norm(&ax), x));
    }
    Ok(out)
}

/// Rayleigh–Ritz of `op` on the span of the locked vectors; keeps a pair's
/// old values when the rotation does not improve its residual.
fn polish(op: &CsrMatrix, pairs: Vec<(f64, f64, Option<Vec<C64>>)>) -> Result<Vec<(f64, f64, Option<Vec<C64>>)>> {
    let k = pairs.len();
    if k < 2 || pairs.iter().any(|p| p.2.is_none()) {
        return Ok(pairs);
    }
    let vs: Vec<&Vec<C64>> = pairs.iter().filter_map(|p| p.2.as_ref()).collect();
    let avs: Vec<Vec<C64>> = vs.iter().map(|v| op.matvec(v)).collect();
    let g = DenseMatrix::from_fn(k, k, |i, j| 0.5 * (dot(vs[i], &avs[j]) + dot(vs[j], &avs[i]).conj()));
    let eig = g.hermitian_eigen(true)?;
    let ys = eig.vectors.unwrap_or_default();
    let n = vs[0].len();
    let mut out = Vec::with_capacity(k);
    for (l, y) in eig.values.iter().zip(&ys) {
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (c, v) in y.iter().zip(&vs) {
            axpy(*c, v, &mut x);
        }
        normalize(&mut x);
        let r = residual(op, *l, &x);
        out.push((*l, r, Some(x)));
    }
    let worst_old = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let worst_new = out.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(if worst_new <= worst_old { out } else { pairs })
}

/// Orthonormal eigenbasis of the spectral window `(λ − ε, λ + ε)`.
#[derive(Debug, Clone)]
pub struct SpectralWindow {
    pub center: f64,
    pub half_width: f64,
    pub eigenvalues: Vec<f64>,
    pub basis: Vec<Vec<C64>>,
    pub exhausted: bool,
}

impl SpectralWindow {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// `E x` for the window projector.
    pub fn project(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for b in &self.basis {
            axpy(dot(b, x), b, &mut y);
        }
        y
    }

    /// `max |⟨b_i, b_j⟩ − δ_ij|`
    pub fn orthonormality_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                d = d.max((dot(a, b) - target).norm());
            }
        }
        d
    }

    /// Largest distance of a unit vector of `other` from this window's span.
    pub fn containment_defect(&self, other: &SpectralWindow) -> f64 {
        other
            .basis
            .iter()
            .map(|v| {
                let p = self.project(v);
                let mut r = v.clone();
                axpy(C64::new(-1.0, 0.0), &p, &mut r);
                norm(&r)
            })
            .fold(0.0, f64::max)
    }
}

pub fn spectral_projector(op: &CsrMatrix, lambda: f64, eps: f64, tol: f64) -> Result<SpectralWindow> {
    spectral_projector_with(op, lambda, eps, tol, op.rows())
}

pub fn spectral_projector_with(
    op: &CsrMatrix,
    lambda: f64,
    eps: f64,
    tol: f64,
    k_max: usize,
) -> Result<SpectralWindow> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon", "window half-width must be positive"));
    }
    let r = if op.rows() <= 512 {
        let all = eig_dense(op, true)?;
        let vecs = all.vectors.clone().unwrap_or_default();
        let sel: Vec<usize> = (0..all.len())
            .filter(|&i| all.eigenvalues[i] > lambda - eps && all.eigenvalues[i] < lambda + eps)
            .collect();
        SpectralWindow {
            center: lambda,
            half_width: eps,
            eigenvalues: sel.iter().map(|&i| all.eigenvalues[i]).collect(),
            basis: sel.iter().map(|&i| vecs[i].clone()).collect(),
            exhausted: true,
        }
    } else {
        let res = eig_window(op, lambda - eps, lambda + eps, k_max, tol)?;
        SpectralWindow {
            center: lambda,
            half_width: eps,
            eigenvalues: res.eigenvalues.clone(),
            basis: res.vectors.unwrap_or_default(),
            exhausted: res.exhausted,
        }
    };
    Ok(r)
}
