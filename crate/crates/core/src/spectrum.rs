//! Symmetrized internal spectrum, its gaps, the fiber spectrum formula and
//! the block decomposition of `H₀(0)`.

use crate::discretize::{InternalParts, SparseHermitianOperator, TransverseBasis};
use crate::eigensolve::{eig_dense, eig_window, SpectrumResult, DENSE_THRESHOLD};
use crate::error::{invalid, Error, Result};
use crate::linalg::CsrMatrix;
use alloc::vec;
use alloc::vec::Vec;

/// Boundary weight above which an eigenvector counts as a truncation artifact.
pub const ARTIFACT_WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Origin {
    /// eigenvalue of `H⁰`
    Direct,
    /// added as the negative of an eigenvalue of `H⁰`
    Negated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymValue {
    pub value: f64,
    pub origin: Origin,
    pub flagged: bool,
}

/// `σ(H⁰) ∪ σ(−H⁰)` as a multiset: each value appears as often as the larger
/// of its multiplicity and that of its negative.
pub fn symmetrized_spectrum(spec: &SpectrumResult) -> Vec<SymValue> {
    let scale = spec.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let tol = (10.0 * spec.tolerance).max(1e-10 * scale.max(1.0));
    let vals = &spec.eigenvalues;
    let flags = &spec.artifact_flags;
    let mut used = vec![false; vals.len()];
    let mut out = Vec::with_capacity(2 * vals.len());
    for i in 0..vals.len() {
        let flagged = flags.get(i).copied().unwrap_or(false);
        out.push(SymValue {
            value: vals[i],
            origin: Origin::Direct,
            flagged,
        });
        if used[i] {
            continue;
        }
        used[i] = true;
        // a partner −λ already present in σ(H⁰)?
        let target = -vals[i];
        let partner = (0..vals.len()).find(|&j| !used[j] && (vals[j] - target).abs() <= tol);
        match partner {
            Some(j) => used[j] = true,
            None => out.push(SymValue {
                value: target,
                origin: Origin::Negated,
                flagged,
            }),
        }
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value));
    out
}

pub fn values(sym: &[SymValue]) -> Vec<f64> {
    sym.iter().map(|s| s.value).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapStructure {
    /// sorted values of `σ⁰_sym ∩ [−Λ, Λ]`
    pub sym: Vec<f64>,
    pub range: f64,
    pub cluster_tol: f64,
    pub mu0: f64,
    /// merged clusters, each a closed band `[lo, hi]`
    pub bands: Vec<Interval>,
    /// open gaps between consecutive bands, sorted
    pub gaps: Vec<Interval>,
    pub central_gap: Interval,
    /// gaps derived from a sampled continuous spectrum (periodic fields)
    pub uncertified: bool,
}

impl GapStructure {
    /// Gap containing `x`, if any.
    pub fn gap_containing(&self, x: f64) -> Option<Interval> {
        self.gaps.iter().copied().find(|g| g.contains(x))
    }

    /// Positive gap directly above `μ₀`.
    pub fn first_positive_gap(&self) -> Option<Interval> {
        self.gaps.iter().copied().find(|g| g.lo > 0.0)
    }
}

pub fn gap_structure(sym: &[f64], cluster_tol: f64, range: f64) -> Result<GapStructure> {
    if sym.is_empty() {
        return Err(Error::Empty("symmetrized spectrum"));
    }
    if !(cluster_tol > 0.0) {
        return Err(invalid("cluster_tol", "must be positive"));
    }
    if !(range > 0.0) {
        return Err(invalid("range", "must be positive"));
    }
    let mut v: Vec<f64> = sym.iter().copied().filter(|x| x.abs() <= range).collect();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return Err(Error::Empty("symmetrized spectrum inside the range"));
    }
    let mut bands: Vec<Interval> = Vec::new();
    for &x in &v {
        match bands.last_mut() {
            Some(b) if x - b.hi <= cluster_tol => b.hi = x,
            _ => bands.push(Interval { lo: x, hi: x }),
        }
    }
    let mut gaps: Vec<Interval> = bands
        .windows(2)
        .map(|w| Interval {
            lo: w[0].hi,
            hi: w[1].lo,
        })
        .collect();
    gaps.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mu0 = v.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    Ok(GapStructure {
        sym: v,
        range,
        cluster_tol,
        mu0,
        bands,
        gaps,
        central_gap: Interval { lo: -mu0, hi: mu0 },
        uncertified: false,
    })
}

/// Default computed range: 80th percentile of `|λ|` over unflagged values.
pub fn default_range(sym: &[SymValue]) -> Option<f64> {
    let mut a: Vec<f64> = sym.iter().filter(|s| !s.flagged).map(|s| s.value.abs()).collect();
    if a.is_empty() {
        return None;
    }
    a.sort_by(f64::total_cmp);
    let k = (libm::ceil(0.8 * a.len() as f64) as usize).clamp(1, a.len()) - 1;
    Some(a[k])
}

/// `σ[H₀(ξ)]` from `σ⁰_sym`: each `μ` maps to `sign(μ)·√(μ² + ξ²)`; zero
/// values are split evenly between the two signs.
pub fn fiber_spectrum_formula(sym: &[f64], xi: f64) -> Vec<f64> {
    let mut zeros = 0usize;
    let mut out: Vec<f64> = sym
        .iter()
        .map(|&mu| {
            let r = libm::sqrt(mu * mu + xi * xi);
            if mu > 0.0 {
                r
            } else if mu < 0.0 {
                -r
            } else {
                zeros += 1;
                if zeros % 2 == 1 {
                    -r
                } else {
                    r
                }
            }
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Explicit permutation splitting `H₀(0)` into `H⁰` and its partner.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    /// `perm[new] = old`: order `[u₁, d₂, u₂, d₁]`
    pub perm: Vec<usize>,
    /// `[[m, Π₋], [Π₊, −m]]` on `up ⊕ dn`
    pub block1: CsrMatrix,
    /// `[[m, Π₊], [Π₋, −m]]` on `dn ⊕ up`
    pub block2: CsrMatrix,
    pub off_block_residual: f64,
}

pub fn block_decompose_h00(
    parts: &InternalParts,
    h00: &SparseHermitianOperator,
) -> Result<BlockDecomposition> {
    let o = parts.offsets();
    if h00.dim() != o[4] {
        return Err(Error::Dimension {
            expected: o[4],
            found: h00.dim(),
        });
    }
    let order = [0usize, 3, 1, 2];
    let perm: Vec<usize> = order.iter().flat_map(|&c| o[c]..o[c + 1]).collect();
    let p = h00.matrix.permute(&perm);
    let n1 = parts.up_dim + parts.dn_dim;
    let first: Vec<usize> = (0..n1).collect();
    let second: Vec<usize> = (n1..o[4]).collect();
    let off = p.select(&first, &second);
    let residual = off.max_abs();
    if residual > 1e-12 {
        return Err(Error::BlockResidual(residual));
    }
    Ok(BlockDecomposition {
        block1: p.select(&first, &first),
        block2: p.select(&second, &second),
        perm,
        off_block_residual: residual,
    })
}

/// `(−∞, −μ₀] ∪ [μ₀, ∞)`
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HalfLines {
    pub mu0: f64,
}

impl HalfLines {
    pub fn contains(&self, x: f64) -> bool {
        x.abs() >= self.mu0
    }
}

impl core::fmt::Display for HalfLines {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "(-inf, {}] U [{}, +inf)", -self.mu0, self.mu0)
    }
}

pub fn h0_spectrum_3d(gaps: &GapStructure) -> Result<HalfLines> {
    if !gaps.mu0.is_finite() {
        return Err(invalid("mu0", "must be finite"));
    }
    Ok(HalfLines { mu0: gaps.mu0 })
}

/// Spectrum of `H⁰` with artifact flags from eigenvector boundary weights.
/// Uses the dense solver when possible, otherwise a window `(lo, hi)`.
pub fn internal_spectrum(
    parts: &InternalParts,
    window: Option<(f64, f64)>,
    tol: f64,
) -> Result<SpectrumResult> {
    let h = &parts.operator.matrix;
    let mut r = match window {
        Some((lo, hi)) if h.rows() > DENSE_THRESHOLD => eig_window(h, lo, hi, h.rows(), tol)?,
        Some((lo, hi)) => {
            let all = eig_dense(h, true)?;
            restrict(all, lo, hi)
        }
        None => eig_dense(h, true)?,
    };
    if let Some(vs) = &r.vectors {
        r.artifact_flags = vs.iter().map(|v| parts.boundary_weight(v) > ARTIFACT_WEIGHT).collect();
    }
    let prov = match &parts.basis {
        TransverseBasis::Grid(g) => alloc::format!("grid {}x{} half-length {:?}", g.n[0], g.n[1], g.half_length),
        TransverseBasis::Landau(l) => alloc::format!("landau levels {} centres {}", l.levels, l.centres),
    };
    Ok(r.with_provenance(prov))
}

fn restrict(all: SpectrumResult, lo: f64, hi: f64) -> SpectrumResult {
    let keep: Vec<usize> = (0..all.len())
        .filter(|&i| all.eigenvalues[i] > lo && all.eigenvalues[i] < hi)
        .collect();
    let vectors = all
        .vectors
        .as_ref()
        .map(|v| keep.iter().map(|&i| v[i].clone()).collect());
    let eigenvalues: Vec<f64> = keep.iter().map(|&i| all.eigenvalues[i]).collect();
    let ct = 1e-8 * (hi - lo);
    SpectrumResult {
        residuals: keep.iter().map(|&i| all.residuals[i]).collect(),
        artifact_flags: keep.iter().map(|&i| all.artifact_flags[i]).collect(),
        clusters: crate::eigensolve::cluster(&eigenvalues, ct),
        eigenvalues,
        vectors,
        ..all
    }
}

/// Location of a Landau-type level recovered from a truncated basis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelEstimate {
    pub target: f64,
    /// `|E|` of the most bulk-localized eigenvector in the search window
    pub estimate: Option<f64>,
    pub relative_error: Option<f64>,
    /// number of eigenvalues found in the search window
    pub window_count: usize,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub boundary_weight: f64,
}

/// For each `target > 0`, searches `|E| ∈ target·(1 ± rel)` in `σ⁰_sym` and
/// returns the eigenvalue whose eigenvector has the least weight near the
/// truncation boundary. Works on `Π₋Π₊ + m²`, whose eigenvalues are the
/// squares of `σ⁰_sym` away from `±m`.
pub fn level_estimates(parts: &InternalParts, targets: &[f64], rel: f64, tol: f64) -> Result<Vec<LevelEstimate>> {
    if !(rel > 0.0 && rel < 1.0) {
        return Err(invalid("rel", "search window must be in (0, 1)"));
    }
    let m2 = parts.mass() * parts.mass();
    let k = parts
        .pi_minus
        .matmul(&parts.pi_plus)
        .shift_diagonal(crate::C64::new(m2, 0.0));
    let pad = vec![crate::C64::new(0.0, 0.0); parts.dn_dim];
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        if !(t > 0.0) {
            return Err(invalid("target", "levels are searched at positive energies"));
        }
        let (a, b) = (t * (1.0 - rel), t * (1.0 + rel));
        let (lo, hi) = (a * a, b * b);
        let r = if k.rows() <= 1024 {
            restrict(eig_dense(&k, true)?, lo, hi)
        } else {
            eig_window(&k, lo, hi, k.rows(), tol * t)?
        };
        let mut best: Option<(f64, f64)> = None;
        for (e, v) in r.eigenvalues.iter().zip(r.vectors.iter().flatten()) {
            let mut full = v.clone();
            full.extend_from_slice(&pad);
            let w = parts.boundary_weight(&full);
            if best.map_or(true, |b| w < b.0) {
                best = Some((w, libm::sqrt(e.max(0.0))));
            }
        }
        out.push(LevelEstimate {
            target: t,
            estimate: best.map(|b| b.1),
            relative_error: best.map(|b| (b.1 - t).abs() / t),
            window_count: r.len(),
            boundary_weight: best.map_or(1.0, |b| b.0),
        });
    }
    Ok(out)
}
