//! Perturbations `H = H₀ + V`: decay classification of `V`, gap eigenvalues,
//! an essential-spectrum consistency probe and the structural inequalities
//! `H₀² ≥ 2B·diag(0,1,0,1)`, `H₀² ≥ −2B·diag(1,0,1,0)`.

use crate::discretize::{assemble_perturbed_fiber, InternalParts, SparseHermitianOperator, ThreeD, TransverseBasis};
use crate::eigensolve::{cluster, eig_dense, eig_window, Cluster, SpectrumResult, DENSE_THRESHOLD};
use crate::error::{invalid, Error, Result};
use crate::field::cutoff_theta;
use crate::linalg::{CsrMatrix, C64};
use crate::potential::PotentialModel;
use crate::spectrum::Interval;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ClassifyParams {
    pub r_max: f64,
    /// log-spaced samples of `r ∈ [1, r_max]`
    pub r_points: usize,
    /// samples of the cutoff argument `t = ⟨·⟩/r ∈ [1, t_max]`
    pub t_points: usize,
    pub t_max: f64,
    /// transverse sample box `[−X, X]²` for the `x₃`-weighted norms
    pub transverse_extent: f64,
    pub transverse_points: usize,
    /// directions on the unit sphere for the isotropic weight
    pub directions: usize,
    /// exclusion zone around the critical exponent
    pub exponent_margin: f64,
    pub min_r_squared: f64,
    pub sample_budget: usize,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            r_max: 1e4,
            r_points: 81,
            t_points: 48,
            t_max: 64.0,
            transverse_extent: 8.0,
            transverse_points: 17,
            directions: 96,
            exponent_margin: 0.1,
            min_r_squared: 0.99,
            sample_budget: 20_000_000,
        }
    }
}

/// Power-law fit `g ≈ c·r^{−p}` on the last decade of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailFit {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub exponent: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub r_squared: f64,
    /// all samples in the decade vanish
    pub vanishing: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayEstimate {
    pub verdict: Verdict,
    pub r: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::seq"))]
    pub g: Vec<f64>,
    /// trapezoid integral over `[1, r_max]`
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub partial_integral: f64,
    /// power-law extrapolation beyond `r_max`; `+∞` when divergent
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub tail_integral: f64,
    pub fit: TailFit,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PotentialClassification {
    /// `g∞(r) = ‖ϑ(⟨Q⟩/r)V‖`
    pub small_at_infinity: DecayEstimate,
    /// `g(r) = ‖ϑ(⟨Q₃⟩/r)V‖`, integrated in `dr`
    pub short_range: DecayEstimate,
    /// `‖ϑ(⟨Q₃⟩/r)⟨Q₃⟩∂_jV‖` for `j = 1, 2, 3`, integrated in `dr/r`
    pub long_range: [DecayEstimate; 3],
    pub long_range_verdict: Verdict,
    pub params: ClassifyParams,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..n).map(|i| libm::exp(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

fn japanese(x: f64) -> f64 {
    libm::sqrt(1.0 + x * x)
}

/// Least-squares fit of `log g` against `log r` over `r ≥ r_max/10`.
pub fn fit_tail(r: &[f64], g: &[f64]) -> TailFit {
    let r_last = r.last().copied().unwrap_or(1.0);
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(g)
        .filter(|(x, _)| **x >= r_last / 10.0 * (1.0 - 1e-12))
        .map(|(x, y)| (*x, *y))
        .collect();
    if pts.iter().all(|p| p.1 == 0.0) {
        return TailFit {
            exponent: f64::INFINITY,
            r_squared: 1.0,
            vanishing: true,
        };
    }
    if pts.len() < 2 || pts.iter().any(|p| p.1 <= 0.0) {
        return TailFit {
            exponent: f64::NAN,
            r_squared: 0.0,
            vanishing: false,
        };
    }
    let xs: Vec<f64> = pts.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = pts.iter().map(|p| libm::log(p.1)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let d = y - my - slope * (x - mx);
            d * d
        })
        .sum();
    let scale = ys.iter().fold(0.0f64, |a, y| a.max(y.abs())).max(1.0);
    let r_squared = if syy <= 1e-24 * scale * scale * n { 1.0 } else { 1.0 - sse / syy };
    TailFit {
        exponent: -slope,
        r_squared,
        vanishing: false,
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// Integral of `g` against `r^{−k} dr` with tail extrapolation and verdict;
/// convergence needs an exponent above `1 − k` by the margin.
fn integrate_decay(r: Vec<f64>, g: Vec<f64>, k: f64, params: &ClassifyParams) -> DecayEstimate {
    let fit = fit_tail(&r, &g);
    let w: Vec<f64> = r.iter().zip(&g).map(|(x, y)| y / libm::pow(*x, k)).collect();
    let partial_integral = trapezoid(&r, &w);
    let critical = 1.0 - k;
    let r_end = *r.last().unwrap_or(&1.0);
    let g_end = *g.last().unwrap_or(&0.0);
    let (tail_integral, verdict) = if fit.vanishing {
        (0.0, Verdict::Yes)
    } else if !(fit.r_squared >= params.min_r_squared) {
        (f64::NAN, Verdict::Inconclusive)
    } else if fit.exponent > critical + params.exponent_margin {
        let e = fit.exponent + k - 1.0;
        let tail = g_end * r_end / libm::pow(r_end, k) / e;
        let converged = tail <= 0.5 * partial_integral.max(f64::MIN_POSITIVE);
        (tail, if converged { Verdict::Yes } else { Verdict::Inconclusive })
    } else if fit.exponent < critical - params.exponent_margin {
        (f64::INFINITY, Verdict::No)
    } else {
        (f64::INFINITY, Verdict::Inconclusive)
    };
    DecayEstimate {
        verdict,
        r,
        g,
        partial_integral,
        tail_integral,
        fit,
    }
}

fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = libm::sqrt(1.0 - z * z);
            let phi = golden * i as f64;
            [rho * libm::cos(phi), rho * libm::sin(phi), z]
        })
        .collect()
}

/// Evidence-graded decay classification of `V` by sampling.
pub fn classify_potential(v: &PotentialModel, params: &ClassifyParams) -> Result<PotentialClassification> {
    if !(params.r_max > 1.0) || params.r_points < 4 || params.t_points < 2 || !(params.t_max > 2.0) {
        return Err(invalid("classify_params", "need r_max > 1, r_points ≥ 4, t_points ≥ 2, t_max > 2"));
    }
    let np = params.transverse_points.max(1);
    let required = params.r_points * params.t_points * (params.directions + 8 * np * np);
    if required > params.sample_budget {
        return Err(Error::SamplingBudget {
            required,
            budget: params.sample_budget,
        });
    }
    let r = log_grid(1.0, params.r_max, params.r_points);
    let t = log_grid(1.0, params.t_max, params.t_points);
    let theta = |x: f64| cutoff_theta(x).unwrap_or(0.0);
    let dirs = fibonacci_sphere(params.directions);
    let perp: Vec<[f64; 2]> = {
        let x = params.transverse_extent;
        let step = if np > 1 { 2.0 * x / (np - 1) as f64 } else { 0.0 };
        let axis: Vec<f64> = (0..np).map(|i| if np > 1 { -x + i as f64 * step } else { 0.0 }).collect();
        axis.iter().flat_map(|&a| axis.iter().map(move |&b| [a, b])).collect()
    };

    // sup over points with ⟨x⟩ = t·r of ϑ(t)‖V(x)‖
    let g_inf: Vec<f64> = r
        .iter()
        .map(|&rr| {
            let mut best: f64 = 0.0;
            for &tt in &t {
                let w = theta(tt);
                if w == 0.0 {
                    continue;
                }
                let s = libm::sqrt(((tt * rr) * (tt * rr) - 1.0).max(0.0));
                for d in &dirs {
                    best = best.max(w * v.norm_at([s * d[0], s * d[1], s * d[2]]));
                }
            }
            best
        })
        .collect();

    // x₃-weighted sups over the transverse box, both signs of x₃
    let x3_sup = |rr: f64, f: &dyn Fn([f64; 3]) -> f64| -> f64 {
        let mut best: f64 = 0.0;
        for &tt in &t {
            let w = theta(tt);
            if w == 0.0 {
                continue;
            }
            let z = libm::sqrt(((tt * rr) * (tt * rr) - 1.0).max(0.0));
            for p in &perp {
                for s in [z, -z] {
                    best = best.max(w * f([p[0], p[1], s]));
                }
            }
        }
        best
    };
    let g3: Vec<f64> = r.iter().map(|&rr| x3_sup(rr, &|x| v.norm_at(x))).collect();
    let lr: [Vec<f64>; 3] = core::array::from_fn(|j| {
        r.iter()
            .map(|&rr| x3_sup(rr, &|x| japanese(x[2]) * v.gradient_norms_at(x)[j]))
            .collect()
    });

    let mut small = integrate_decay(r.clone(), g_inf, 0.0, params);
    small.verdict = limit_verdict(&small, params);
    small.partial_integral = f64::NAN;
    small.tail_integral = f64::NAN;
    let short_range = integrate_decay(r.clone(), g3, 0.0, params);
    let [a, b, c] = lr;
    let long_range = [
        integrate_decay(r.clone(), a, 1.0, params),
        integrate_decay(r.clone(), b, 1.0, params),
        integrate_decay(r, c, 1.0, params),
    ];
    let long_range_verdict = if long_range.iter().all(|d| d.verdict == Verdict::Yes) {
        Verdict::Yes
    } else if long_range.iter().any(|d| d.verdict == Verdict::No) {
        Verdict::No
    } else {
        Verdict::Inconclusive
    };
    Ok(PotentialClassification {
        small_at_infinity: small,
        short_range,
        long_range,
        long_range_verdict,
        params: params.clone(),
    })
}

/// `lim g∞(r) = 0`: a decaying tail fit, or an identically vanishing tail.
fn limit_verdict(d: &DecayEstimate, params: &ClassifyParams) -> Verdict {
    if d.fit.vanishing {
        return Verdict::Yes;
    }
    if !(d.fit.r_squared >= params.min_r_squared) {
        return Verdict::Inconclusive;
    }
    if d.fit.exponent > params.exponent_margin {
        Verdict::Yes
    } else if d.fit.exponent.abs() <= params.exponent_margin {
        Verdict::No
    } else {
        Verdict::Inconclusive
    }
}

/// `H = H₀ + V` on the 3-D grid.
pub fn assemble_h(h0: &ThreeD, v: &PotentialModel) -> Result<SparseHermitianOperator> {
    if v.is_zero() {
        let mut op = h0.operator()?;
        op.tag = crate::discretize::OperatorTag::Perturbed3d;
        return Ok(op);
    }
    h0.perturbed(v)
}

/// `H(ξ) = H₀(ξ) + V(·, ·, 0)`, the fiber surrogate of `H`.
pub fn assemble_h_fiber(parts: &InternalParts, xi: f64, v: &PotentialModel) -> Result<SparseHermitianOperator> {
    assemble_perturbed_fiber(parts, xi, v)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StableEigenvalue {
    pub value: f64,
    /// largest deviation of the matched values across the ladder
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub spread: f64,
    pub multiplicity: usize,
    pub stable: bool,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapEigenvalues {
    pub gap: Interval,
    pub margin: f64,
    pub search: Interval,
    pub per_level: Vec<SpectrumResult>,
    /// eigenvalues of the finest level matched across the ladder
    pub tracked: Vec<StableEigenvalue>,
    pub clusters: Vec<Cluster>,
    /// some window search stopped before exhausting its interval
    pub count_is_lower_bound: bool,
}

impl GapEigenvalues {
    pub fn stable_values(&self) -> Vec<f64> {
        self.tracked.iter().filter(|e| e.stable).map(|e| e.value).collect()
    }
}

/// Default margin: 5% of the gap width.
pub const DEFAULT_GAP_MARGIN: f64 = 0.05;

/// Eigenvalues strictly inside the gap shrunk by `margin_fraction·width`
/// from both edges, on each operator of a refinement ladder (coarse to fine).
pub fn gap_eigenvalues(
    ladder: &[CsrMatrix],
    gap: Interval,
    margin_fraction: f64,
    stability_tol: f64,
    tol: f64,
) -> Result<GapEigenvalues> {
    if ladder.is_empty() {
        return Err(Error::Empty("grid ladder"));
    }
    if !(gap.hi > gap.lo) || !(0.0..0.5).contains(&margin_fraction) {
        return Err(invalid("gap", "need lo < hi and a margin fraction in [0, 0.5)"));
    }
    let margin = margin_fraction * gap.width();
    let search = Interval {
        lo: gap.lo + margin,
        hi: gap.hi - margin,
    };
    let per_level = ladder
        .iter()
        .map(|h| window_eigenvalues(h, search, tol))
        .collect::<Result<Vec<_>>>()?;
    let count_is_lower_bound = per_level.iter().any(|s| !s.exhausted);
    let finest = per_level.last().map(|s| s.eigenvalues.clone()).unwrap_or_default();
    let clusters = cluster(&finest, stability_tol);
    let tracked = clusters
        .iter()
        .map(|c| {
            let mut spread: f64 = 0.0;
            let mut found = true;
            for level in &per_level[..per_level.len() - 1] {
                match nearest(&level.eigenvalues, c.center) {
                    Some(x) => spread = spread.max((x - c.center).abs()),
                    None => found = false,
                }
            }
            StableEigenvalue {
                value: c.center,
                spread: if found { spread } else { f64::INFINITY },
                multiplicity: c.multiplicity,
                stable: found && spread <= stability_tol,
            }
        })
        .collect();
    Ok(GapEigenvalues {
        gap,
        margin,
        search,
        per_level,
        tracked,
        clusters,
        count_is_lower_bound,
    })
}

fn nearest(values: &[f64], x: f64) -> Option<f64> {
    values.iter().copied().min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
}

/// All eigenvalues in the open interval, dense below the threshold.
pub fn window_eigenvalues(h: &CsrMatrix, w: Interval, tol: f64) -> Result<SpectrumResult> {
    if h.rows() <= DENSE_THRESHOLD {
        let all = eig_dense(h, false)?;
        let keep: Vec<usize> = (0..all.len()).filter(|&i| w.contains(all.eigenvalues[i])).collect();
        let mut out = all.clone();
        out.eigenvalues = keep.iter().map(|&i| all.eigenvalues[i]).collect();
        out.residuals = keep.iter().map(|&i| all.residuals[i]).collect();
        out.artifact_flags = keep.iter().map(|&i| all.artifact_flags[i]).collect();
        let ct = out.tolerance.max(1e-10);
        out.recluster(ct);
        return Ok(out.with_provenance("dense restriction"));
    }
    eig_window(h, w.lo, w.hi, h.rows(), tol)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountRow {
    pub level: usize,
    pub window: Interval,
    pub count_h: usize,
    pub count_h0: usize,
    /// `|N_H − N_H₀| / max(N_H₀, 1)`
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EssentialSpectrumReport {
    pub rows: Vec<CountRow>,
    /// worst discrepancy per ladder level
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::seq"))]
    pub per_level: Vec<f64>,
    pub shrinking: bool,
    pub note: alloc::string::String,
}

/// Compares counting functions of `H` and `H₀` on band windows along a
/// ladder of `(H, H₀)` pairs. A heuristic consistency check.
pub fn essential_spectrum_probe(
    ladder: &[(CsrMatrix, CsrMatrix)],
    windows: &[Interval],
    tol: f64,
) -> Result<EssentialSpectrumReport> {
    let mut rows = Vec::new();
    let mut per_level = Vec::new();
    for (level, (h, h0)) in ladder.iter().enumerate() {
        let mut worst: f64 = 0.0;
        let na = window_counts(h, windows, tol)?;
        let nb = window_counts(h0, windows, tol)?;
        for ((&w, a), b) in windows.iter().zip(na).zip(nb) {
            let d = (a as f64 - b as f64).abs() / (b.max(1) as f64);
            worst = worst.max(d);
            rows.push(CountRow {
                level,
                window: w,
                count_h: a,
                count_h0: b,
                discrepancy: d,
            });
        }
        per_level.push(worst);
    }
    let shrinking = per_level.windows(2).all(|p| p[1] <= p[0]);
    Ok(EssentialSpectrumReport {
        rows,
        per_level,
        shrinking,
        note: "heuristic counting-function comparison, not a proof surrogate".into(),
    })
}

/// Number of eigenvalues in each window; one dense solve when small enough.
fn window_counts(h: &CsrMatrix, windows: &[Interval], tol: f64) -> Result<Vec<usize>> {
    if h.rows() <= DENSE_THRESHOLD {
        let all = h.to_dense().hermitian_eigen(false)?.values;
        return Ok(windows.iter().map(|w| all.iter().filter(|&&e| w.contains(e)).count()).collect());
    }
    windows.iter().map(|&w| Ok(window_eigenvalues(h, w, tol)?.len())).collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StructuralReport {
    /// `min eig(H₀² − 2B·diag(0,1,0,1))`
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub min_lower_spin: f64,
    /// `min eig(H₀² + 2B·diag(1,0,1,0))`
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub min_upper_spin: f64,
    pub norm_h0_squared: f64,
    pub tol: f64,
    pub lower_spin_holds: bool,
    pub upper_spin_holds: bool,
    /// points along `x₃`; `None` for the transverse operator alone
    pub n3: Option<usize>,
}

impl StructuralReport {
    pub fn holds(&self) -> bool {
        self.lower_spin_holds && self.upper_spin_holds
    }
}

/// Field values on the up and down transverse spaces.
fn field_diagonals(parts: &InternalParts) -> Result<(Vec<f64>, Vec<f64>)> {
    match &parts.basis {
        TransverseBasis::Grid(g) => {
            let b: Vec<f64> = (0..g.points()).map(|i| parts.field.b(g.point2(i))).collect();
            Ok((b.clone(), b))
        }
        TransverseBasis::Landau(_) => {
            let b0 = parts
                .field
                .constant_value()
                .ok_or_else(|| Error::Backend("Landau basis needs a constant field".into()))?;
            Ok((vec![b0; parts.up_dim], vec![b0; parts.dn_dim]))
        }
    }
}

/// Smallest and largest eigenvalue of a sparse hermitian matrix.
pub fn extreme_eigenvalues(m: &CsrMatrix, tol: f64) -> Result<(f64, f64)> {
    if m.rows() <= DENSE_THRESHOLD {
        let e = m.to_dense().hermitian_eigen(false)?.values;
        let lo = e.first().copied().ok_or(Error::Empty("matrix"))?;
        let hi = e.last().copied().ok_or(Error::Empty("matrix"))?;
        return Ok((lo, hi));
    }
    let g = m.norm_inf();
    let lo = edge_eigenvalue(m, -g, g, tol)?;
    let hi = -edge_eigenvalue(&m.scale(C64::new(-1.0, 0.0)), -g, g, tol)?;
    Ok((lo, hi))
}

/// Lowest eigenvalue above the lower Gershgorin bound by windows of growing width.
fn edge_eigenvalue(m: &CsrMatrix, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let mut w = (hi - lo) / 256.0;
    loop {
        let top = (lo + w).min(hi);
        let s = eig_window(m, lo - 1e-3 * w, top, 8, tol * (hi - lo))?;
        if let Some(&x) = s.eigenvalues.first() {
            return Ok(x);
        }
        if top >= hi {
            return Err(Error::Empty("spectrum window"));
        }
        w *= 4.0;
    }
}

/// Checks both structural inequalities for `H₀² = K ⊗ 1 + 1 ⊗ P₃²` where
/// `K = diag(K_up, K_dn, K_up, K_dn)`; with `p3 = None` only the
/// transverse part (the fiber `ξ = 0`) is tested.
pub fn structural_inequality_check(parts: &InternalParts, p3: Option<&CsrMatrix>, tol: f64) -> Result<StructuralReport> {
    let m2 = parts.mass() * parts.mass();
    let k_up = parts.pi_minus.matmul(&parts.pi_plus).shift_diagonal(C64::new(m2, 0.0));
    let k_dn = parts.pi_plus.matmul(&parts.pi_minus).shift_diagonal(C64::new(m2, 0.0));
    let (b_up, b_dn) = field_diagonals(parts)?;
    let two = |b: &[f64], s: f64| CsrMatrix::from_diagonal(&b.iter().map(|x| s * 2.0 * x).collect::<Vec<_>>());
    let lower = k_dn.sub(&two(&b_dn, 1.0));
    let upper = k_up.add(&two(&b_up, 1.0));
    let (lower_min, _) = extreme_eigenvalues(&lower, tol)?;
    let (upper_min, _) = extreme_eigenvalues(&upper, tol)?;
    let (_, kmax_up) = extreme_eigenvalues(&k_up, tol)?;
    let (_, kmax_dn) = extreme_eigenvalues(&k_dn, tol)?;
    let (p_min, p_max) = match p3 {
        Some(p) => {
            let e = eig_dense(p, false)?;
            let min = e.eigenvalues.iter().fold(f64::INFINITY, |a, x| a.min(x * x));
            let max = e.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x * x));
            (min, max)
        }
        None => (0.0, 0.0),
    };
    // each inequality only shifts one spin; the other keeps its bare K
    let min_lower_spin = lower_min.min(kmin(&k_up, tol)?) + p_min;
    let min_upper_spin = upper_min.min(kmin(&k_dn, tol)?) + p_min;
    let norm = kmax_up.max(kmax_dn) + p_max;
    let floor = -tol * norm;
    Ok(StructuralReport {
        min_lower_spin,
        min_upper_spin,
        norm_h0_squared: norm,
        tol,
        lower_spin_holds: min_lower_spin >= floor,
        upper_spin_holds: min_upper_spin >= floor,
        n3: p3.map(|p| p.rows()),
    })
}

fn kmin(k: &CsrMatrix, tol: f64) -> Result<f64> {
    Ok(extreme_eigenvalues(k, tol)?.0)
}

pub fn structural_inequality_check_3d(h: &ThreeD, tol: f64) -> Result<StructuralReport> {
    structural_inequality_check(&h.parts, Some(&h.p3), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_fiber, assemble_h0_3d, assemble_internal, Backend, P3Scheme};
    use crate::field::{FieldModel, FieldProfile};
    use crate::potential::{make_potential, PotentialSpec};

    fn power(p: f64) -> PotentialModel {
        make_potential(&PotentialSpec::PowerLaw { amplitude: 1.0, p }).unwrap()
    }

    #[test]
    fn classifier_power_laws() {
        let params = ClassifyParams::default();
        for p in [1.5, 2.0, 3.0] {
            let c = classify_potential(&power(p), &params).unwrap();
            assert_eq!(c.short_range.verdict, Verdict::Yes, "p = {p}");
            assert!((c.short_range.fit.exponent - p).abs() < 0.05);
        }
        let c = classify_potential(&power(0.5), &params).unwrap();
        assert_eq!(c.short_range.verdict, Verdict::No);
        assert_eq!(c.long_range_verdict, Verdict::Yes);
        let c = classify_potential(&power(1.0), &params).unwrap();
        assert_eq!(c.short_range.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn classifier_constant_and_zero() {
        let params = ClassifyParams::default();
        let c = classify_potential(&make_potential(&PotentialSpec::Scalar { value: 1.0 }).unwrap(), &params).unwrap();
        assert_eq!(c.small_at_infinity.verdict, Verdict::No);
        assert!(c.small_at_infinity.g.iter().all(|g| (g - 1.0).abs() < 1e-12));
        assert_eq!(c.short_range.verdict, Verdict::No);
        let z = classify_potential(&make_potential(&PotentialSpec::Zero).unwrap(), &params).unwrap();
        assert_eq!(z.small_at_infinity.verdict, Verdict::Yes);
        assert_eq!(z.short_range.verdict, Verdict::Yes);
        assert_eq!(z.long_range_verdict, Verdict::Yes);
        let g = make_potential(&PotentialSpec::Gaussian { v0: -0.5, width: 1.0 }).unwrap();
        let c = classify_potential(&g, &params).unwrap();
        assert_eq!(c.small_at_infinity.verdict, Verdict::Yes);
        assert_eq!(c.short_range.verdict, Verdict::Yes);
    }

    #[test]
    fn classifier_budget() {
        let mut params = ClassifyParams::default();
        params.sample_budget = 10;
        assert!(matches!(
            classify_potential(&power(2.0), &params),
            Err(Error::SamplingBudget { .. })
        ));
    }

    fn landau(levels: usize, centres: usize) -> InternalParts {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        assemble_internal(&f, &Backend::Oscillator { levels, centres }).unwrap()
    }

    #[test]
    fn assemble_h_shifts_and_zero() {
        let f = FieldModel::constant(1.0, 1.0).unwrap();
        let p = assemble_internal(&f, &Backend::Oscillator { levels: 3, centres: 2 }).unwrap();
        let h0 = assemble_h0_3d(&p, 8, 4.0, P3Scheme::CentralDifference, 1_000_000).unwrap();
        let zero = make_potential(&PotentialSpec::Zero).unwrap();
        let a = assemble_h(&h0, &zero).unwrap();
        assert_eq!(a.matrix.sub(&h0.operator().unwrap().matrix).max_abs(), 0.0);
        let c = make_potential(&PotentialSpec::Scalar { value: 0.7 }).unwrap();
        let s = eig_dense(&assemble_h(&h0, &c).unwrap().matrix, false).unwrap();
        let e = eig_dense(&a.matrix, false).unwrap();
        for (x, y) in s.eigenvalues.iter().zip(&e.eigenvalues) {
            assert!((x - y - 0.7).abs() < 1e-10);
        }
        let g = make_potential(&PotentialSpec::Gaussian { v0: -0.5, width: 1.0 }).unwrap();
        assert_eq!(assemble_h(&h0, &g).unwrap().hermiticity_defect(), 0.0);
    }

    #[test]
    fn free_fiber_has_empty_gap() {
        let p = landau(8, 8);
        let zero = make_potential(&PotentialSpec::Zero).unwrap();
        let h = assemble_h_fiber(&p, 0.0, &zero).unwrap();
        let gap = Interval { lo: 1.0, hi: libm::sqrt(3.0) };
        let r = gap_eigenvalues(&[h.matrix], gap, DEFAULT_GAP_MARGIN, 1e-2, 1e-10).unwrap();
        assert!(r.tracked.is_empty());
        assert!(!r.count_is_lower_bound);
    }

    #[test]
    fn gaussian_well_binds_in_gap() {
        let g = make_potential(&PotentialSpec::Gaussian { v0: -0.5, width: 1.0 }).unwrap();
        let ladder: Vec<CsrMatrix> = [(10, 20), (14, 28)]
            .iter()
            .map(|&(l, c)| assemble_h_fiber(&landau(l, c), 0.0, &g).unwrap().matrix)
            .collect();
        let gap = Interval { lo: 1.0, hi: libm::sqrt(3.0) };
        let r = gap_eigenvalues(&ladder, gap, DEFAULT_GAP_MARGIN, 1e-2, 1e-10).unwrap();
        let stable = r.stable_values();
        assert!(!stable.is_empty());
        for e in &stable {
            assert!(r.search.contains(*e));
        }
        // window solver against the dense oracle
        let coarse = &ladder[0];
        let w = eig_window(coarse, r.search.lo, r.search.hi, 50, 1e-11).unwrap();
        let d = &r.per_level[0].eigenvalues;
        assert_eq!(w.len(), d.len());
        for (a, b) in w.eigenvalues.iter().zip(d) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenvalues_are_monotone_in_the_well_depth() {
        let p = landau(8, 16);
        let gap = Interval { lo: 1.0, hi: libm::sqrt(3.0) };
        let mut prev: Option<Vec<f64>> = None;
        let mut prev_count = usize::MAX;
        for v0 in [-0.6, -0.5, -0.4, -0.3, -0.1] {
            let g = make_potential(&PotentialSpec::Gaussian { v0, width: 1.0 }).unwrap();
            let h = assemble_h_fiber(&p, 0.0, &g).unwrap().matrix;
            let all = eig_dense(&h, false).unwrap().eigenvalues;
            if let Some(q) = &prev {
                assert!(q.iter().zip(&all).all(|(a, b)| *a <= b + 1e-10));
            }
            let count = gap_eigenvalues(&[h], gap, 0.0, 1e-2, 1e-10).unwrap().tracked.len();
            assert!(count <= prev_count);
            prev_count = count;
            prev = Some(all);
        }
    }

    #[test]
    fn essential_probe_zero_potential() {
        let p = landau(5, 4);
        let h0 = assemble_fiber(&p, 0.0).unwrap().matrix;
        let w = [Interval { lo: 1.5, hi: 2.5 }];
        let r = essential_spectrum_probe(&[(h0.clone(), h0)], &w, 1e-10).unwrap();
        assert_eq!(r.per_level, vec![0.0]);
    }

    #[test]
    fn structural_constant_field() {
        let p = landau(6, 4);
        let r = structural_inequality_check(&p, None, 1e-6).unwrap();
        assert!(r.holds());
        assert!((r.min_lower_spin - 1.0).abs() < 1e-10);
        let h = assemble_h0_3d(&p, 12, 6.0, P3Scheme::CentralDifference, 10_000_000).unwrap();
        let r3 = structural_inequality_check_3d(&h, 1e-6).unwrap();
        assert!(r3.holds());
        // compare with a dense eigensolve of the assembled square
        let op = h.operator().unwrap().matrix;
        let sq = op.matmul(&op);
        let b_dn = CsrMatrix::from_diagonal(
            &(0..h.total_dim())
                .map(|i| {
                    let t = i % h.t_dim();
                    let o = p.offsets();
                    let dn = (o[1]..o[2]).contains(&t) || (o[3]..o[4]).contains(&t);
                    if dn { 2.0 } else { 0.0 }
                })
                .collect::<Vec<_>>(),
        );
        let e = eig_dense(&sq.sub(&b_dn), false).unwrap();
        assert!((e.eigenvalues[0] - r3.min_lower_spin).abs() < 1e-8);
    }

    #[test]
    fn structural_zero_field_and_reflection() {
        let f0 = FieldModel::new(FieldProfile::Constant { b0: 0.0 }, 1.0).unwrap();
        let p0 = assemble_internal(&f0, &Backend::Grid { n: [12, 12], half_length: [3.0, 3.0] }).unwrap();
        let r0 = structural_inequality_check(&p0, None, 1e-6).unwrap();
        assert!((r0.min_lower_spin - r0.min_upper_spin).abs() < 1e-10);
        assert!(r0.min_lower_spin >= 1.0 - 1e-10);

        let f = FieldModel::constant(0.5, 1.0).unwrap();
        let grid = Backend::Grid { n: [14, 14], half_length: [3.0, 3.0] };
        let a = structural_inequality_check(&assemble_internal(&f, &grid).unwrap(), None, 1e-6).unwrap();
        let b = structural_inequality_check(&assemble_internal(&f.reflected(), &grid).unwrap(), None, 1e-6).unwrap();
        assert!((a.min_lower_spin - b.min_upper_spin).abs() < 1e-8);
        assert!((a.min_upper_spin - b.min_lower_spin).abs() < 1e-8);
    }
}
