//! Executes the analyses of a scenario in dependency order.

use crate::config::{Analysis, ScenarioConfig};
use crate::error::CliError;
use magdirac_core::discretize::{
    assemble_fiber, assemble_h0_3d, assemble_internal, fiber_square_defect, Backend, InternalParts, P3Scheme,
    DEFAULT_MEMORY_BUDGET,
};
use magdirac_core::eigensolve::{eig_dense, SpectrumResult, DENSE_THRESHOLD};
use magdirac_core::linalg::CsrMatrix;
use magdirac_core::mourre::{
    combine_fiber_samples, epsilon_monotone, fiber_sample, identity_suite, lap_probe, transverse_weight,
    weighted_states, IdentityResiduals, LapTable, MourreQuery, MourreReport, Target, XiGrid,
};
use magdirac_core::perturbation::{
    assemble_h_fiber, classify_potential, essential_spectrum_probe, gap_eigenvalues,
    structural_inequality_check_3d, EssentialSpectrumReport, GapEigenvalues, PotentialClassification,
    StructuralReport, Verdict,
};
use magdirac_core::potential::{make_potential, PotentialModel};
use magdirac_core::spectrum::{
    default_range, gap_structure, h0_spectrum_3d, internal_spectrum, symmetrized_spectrum, values, GapStructure,
    HalfLines, Interval, SymValue,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
    Skipped,
}

/// Outcome of one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub analysis: Analysis,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub analysis: Analysis,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InternalSpectrumResult {
    pub tolerance: f64,
    pub spectrum: SpectrumResult,
    pub symmetrized: Vec<SymValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapsResult {
    pub tolerance: f64,
    pub structure: GapStructure,
    /// `σ(H₀)` as two half-lines
    pub h0_3d: HalfLines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberCheckResult {
    pub tolerance: f64,
    pub xis: Vec<f64>,
    /// `‖H₀(ξ)² − H₀(0)² − ξ²‖_max` per `ξ`
    pub square_defect: Vec<f64>,
    /// distance between `σ[H₀(ξ)]` and the image of `σ(H⁰) ⊎ σ(−H⁰)`;
    /// absent above the dense threshold
    pub spectrum_defect: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub lambda: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MourreResult {
    pub tolerance: f64,
    pub reports: Vec<MourreReport>,
    pub epsilon_monotone: Vec<MonotoneCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitiesResult {
    pub tolerance: f64,
    pub residuals: IdentityResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResult {
    /// minimal `R²` accepted for a tail fit
    pub tolerance: f64,
    pub classification: PotentialClassification,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapEigenvaluesResult {
    pub tolerance: f64,
    pub xi: f64,
    pub ladder: Vec<Backend>,
    pub perturbed: GapEigenvalues,
    /// eigenvalues of the unperturbed operator in the search window, per level
    pub free_counts: Vec<usize>,
    /// coarse-level deviation from a dense solve of the same matrix
    pub dense_oracle_defect: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LapRole {
    /// energy inside the gap away from eigenvalues
    Gap,
    /// energy on a tracked gap eigenvalue
    Eigenvalue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapEntry {
    pub role: LapRole,
    pub trial: usize,
    pub table: LapTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapResult {
    pub tolerance: f64,
    pub s: f64,
    /// distance from the gap energy to the nearest tracked eigenvalue
    pub gap_lambda_clearance: Option<f64>,
    pub entries: Vec<LapEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralResult {
    pub tolerance: f64,
    pub report: StructuralReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialResult {
    pub tolerance: f64,
    pub report: EssentialSpectrumReport,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Results {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_spectrum: Option<InternalSpectrumResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<GapsResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_check: Option<FiberCheckResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mourre: Option<MourreResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identities: Option<IdentitiesResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_eigenvalues: Option<GapEigenvaluesResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lap_probe: Option<LapResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural_check: Option<StructuralResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ess_spectrum_probe: Option<EssentialResult>,
}

/// Everything a run produced. Wall-clock timings are kept out of the
/// serialized form so that reruns are byte-identical; `emit_report` writes
/// them to a separate file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ScenarioConfig,
    pub stages: Vec<StageRecord>,
    pub results: Results,
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl RunReport {
    pub fn all_ok(&self) -> bool {
        self.stages.iter().all(|s| s.status == Status::Ok)
    }

    pub fn stage(&self, a: Analysis) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.analysis == a)
    }
}

/// Validates the config and runs its analyses on a pool of `config.threads`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, CliError> {
    run_scenario_with(config, &mut |_, _| {})
}

/// As [`run_scenario`], calling `progress` after each analysis.
pub fn run_scenario_with(
    config: &ScenarioConfig,
    progress: &mut dyn FnMut(&StageRecord, f64),
) -> Result<RunReport, CliError> {
    config.validate()?;
    let order = config.execution_order()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        stages: Vec::new(),
        results: Results::default(),
        timings: Vec::new(),
    };
    let mut ctx = Context::new(config);
    for a in order {
        let t0 = Instant::now();
        let tolerance = stage_tolerance(config, a);
        let blocked = a
            .prerequisites()
            .iter()
            .find(|p| report.stage(**p).map_or(true, |s| s.status != Status::Ok));
        let record = match blocked {
            Some(p) => StageRecord {
                analysis: a,
                status: Status::Skipped,
                message: Some(format!("prerequisite `{p}` did not complete")),
                tolerance,
            },
            None => match pool.install(|| ctx.run(a, &mut report.results)) {
                Ok(()) => StageRecord {
                    analysis: a,
                    status: Status::Ok,
                    message: None,
                    tolerance,
                },
                Err(message) => StageRecord {
                    analysis: a,
                    status: Status::Failed,
                    message: Some(message),
                    tolerance,
                },
            },
        };
        let seconds = t0.elapsed().as_secs_f64();
        progress(&record, seconds);
        report.timings.push(StageTiming { analysis: a, seconds });
        report.stages.push(record);
    }
    Ok(report)
}

fn stage_tolerance(c: &ScenarioConfig, a: Analysis) -> f64 {
    let t = &c.tolerances;
    match a {
        Analysis::InternalSpectrum => t.eig,
        Analysis::Gaps => t.cluster,
        Analysis::FiberCheck | Analysis::Mourre | Analysis::LapProbe => t.inner,
        Analysis::Identities => t.inner,
        Analysis::Classify => c.classify.min_r_squared,
        Analysis::GapEigenvalues => c.gap.stability_tol,
        Analysis::StructuralCheck => t.structural,
        Analysis::EssSpectrumProbe => t.eig,
    }
}

type Stage<T> = Result<T, String>;

fn msg<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Intermediate state shared between analyses.
struct Context<'a> {
    cfg: &'a ScenarioConfig,
    parts: Option<InternalParts>,
    potential: Option<PotentialModel>,
    /// finest perturbed operator and its parts, kept for the LAP probe
    finest: Option<(InternalParts, CsrMatrix)>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Self {
            cfg,
            parts: None,
            potential: None,
            finest: None,
        }
    }

    fn parts(&mut self) -> Stage<InternalParts> {
        if self.parts.is_none() {
            self.parts = Some(assemble_internal(&self.cfg.field, &self.cfg.backend).map_err(msg)?);
        }
        Ok(self.parts.clone().unwrap_or_else(|| unreachable!()))
    }

    fn potential(&mut self) -> Stage<PotentialModel> {
        if self.potential.is_none() {
            self.potential = Some(make_potential(&self.cfg.potential).map_err(msg)?);
        }
        Ok(self.potential.clone().unwrap_or_else(|| unreachable!()))
    }

    fn ladder_parts(&self, ladder: &[Backend]) -> Stage<Vec<InternalParts>> {
        let backends: Vec<Backend> = if ladder.is_empty() {
            vec![self.cfg.backend.clone()]
        } else {
            ladder.to_vec()
        };
        backends
            .par_iter()
            .map(|b| assemble_internal(&self.cfg.field, b).map_err(msg))
            .collect()
    }

    fn run(&mut self, a: Analysis, out: &mut Results) -> Stage<()> {
        match a {
            Analysis::InternalSpectrum => out.internal_spectrum = Some(self.internal_spectrum()?),
            Analysis::Gaps => {
                let sym = &out.internal_spectrum.as_ref().ok_or("no internal spectrum")?.symmetrized;
                out.gaps = Some(self.gaps(sym)?);
            }
            Analysis::FiberCheck => out.fiber_check = Some(self.fiber_check()?),
            Analysis::Mourre => {
                let sym = values(&out.internal_spectrum.as_ref().ok_or("no internal spectrum")?.symmetrized);
                out.mourre = Some(self.mourre(&sym)?);
            }
            Analysis::Identities => out.identities = Some(self.identities()?),
            Analysis::Classify => out.classify = Some(self.classify()?),
            Analysis::GapEigenvalues => {
                let gaps = &out.gaps.as_ref().ok_or("no gap structure")?.structure;
                out.gap_eigenvalues = Some(self.gap_eigenvalues(gaps)?);
            }
            Analysis::LapProbe => {
                let ge = out.gap_eigenvalues.as_ref().ok_or("no gap eigenvalues")?;
                out.lap_probe = Some(self.lap_probe(ge)?);
            }
            Analysis::StructuralCheck => out.structural_check = Some(self.structural()?),
            Analysis::EssSpectrumProbe => {
                let cls = &out.classify.as_ref().ok_or("no classification")?.classification;
                let gaps = &out.gaps.as_ref().ok_or("no gap structure")?.structure;
                out.ess_spectrum_probe = Some(self.essential(cls, gaps)?);
            }
        }
        Ok(())
    }

    fn internal_spectrum(&mut self) -> Stage<InternalSpectrumResult> {
        let parts = self.parts()?;
        let tol = self.cfg.tolerances.eig;
        let window = self.cfg.spectrum.window.map(|[lo, hi]| (lo, hi));
        let spectrum = internal_spectrum(&parts, window, tol).map_err(msg)?;
        let symmetrized = symmetrized_spectrum(&spectrum);
        Ok(InternalSpectrumResult {
            tolerance: tol,
            spectrum,
            symmetrized,
        })
    }

    fn gaps(&self, sym: &[SymValue]) -> Stage<GapsResult> {
        let range = match self.cfg.spectrum.range {
            Some(r) => r,
            None => default_range(sym).ok_or("every eigenvalue is flagged as an artifact")?,
        };
        let tol = self.cfg.tolerances.cluster;
        let structure = gap_structure(&values(sym), tol, range).map_err(msg)?;
        let h0_3d = h0_spectrum_3d(&structure).map_err(msg)?;
        Ok(GapsResult {
            tolerance: tol,
            structure,
            h0_3d,
        })
    }

    fn fiber_check(&mut self) -> Stage<FiberCheckResult> {
        let parts = self.parts()?;
        let xis = self.cfg.fiber_check.xis.clone();
        let square_defect = fiber_square_defect(&parts, &xis).map_err(msg)?;
        let spectrum_defect = if parts.fiber_dim() <= DENSE_THRESHOLD {
            let h = eig_dense(&parts.operator.matrix, false).map_err(msg)?;
            let both: Vec<f64> = h.eigenvalues.iter().flat_map(|&e| [e, -e]).collect();
            let defects = xis
                .par_iter()
                .map(|&xi| {
                    let fiber = assemble_fiber(&parts, xi).map_err(msg)?;
                    let got = fiber.matrix.to_dense().hermitian_eigen(false).map_err(msg)?.values;
                    let want = magdirac_core::spectrum::fiber_spectrum_formula(&both, xi);
                    if got.len() != want.len() {
                        return Ok(f64::INFINITY);
                    }
                    Ok(got.iter().zip(&want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
                })
                .collect::<Stage<Vec<f64>>>()?;
            Some(defects)
        } else {
            None
        };
        Ok(FiberCheckResult {
            tolerance: self.cfg.tolerances.inner,
            xis,
            square_defect,
            spectrum_defect,
        })
    }

    fn mourre(&mut self, sym: &[f64]) -> Stage<MourreResult> {
        let parts = self.parts()?;
        let m = &self.cfg.mourre;
        let g = &self.cfg.xi_grid;
        let grid = XiGrid::new(g.lo, g.hi, g.points).map_err(msg)?;
        let nodes = grid.nodes();
        let tol = self.cfg.tolerances.inner;
        let mut reports = Vec::new();
        let mut monotone = Vec::new();
        for &lambda in &m.lambdas {
            let mut row = Vec::new();
            for &eps in &m.epsilons {
                let query = MourreQuery::new(lambda, eps, Target::Fibers, tol).map_err(msg)?;
                let samples = nodes
                    .par_iter()
                    .map(|&xi| fiber_sample(&parts, xi, lambda, eps, tol))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(msg)?;
                row.push(combine_fiber_samples(query, &samples, grid, sym, m.margin));
            }
            monotone.push(MonotoneCheck {
                lambda,
                monotone: epsilon_monotone(&row, 1e-10),
            });
            reports.extend(row);
        }
        Ok(MourreResult {
            tolerance: tol,
            reports,
            epsilon_monotone: monotone,
        })
    }

    fn identities(&mut self) -> Stage<IdentitiesResult> {
        let parts = self.parts()?;
        let mut cfg = self.cfg.identities.clone();
        cfg.seed = self.cfg.seed;
        let residuals = identity_suite(&parts, &cfg).map_err(msg)?;
        Ok(IdentitiesResult {
            tolerance: self.cfg.tolerances.inner,
            residuals,
        })
    }

    fn classify(&mut self) -> Stage<ClassifyResult> {
        let v = self.potential()?;
        let classification = classify_potential(&v, &self.cfg.classify).map_err(msg)?;
        Ok(ClassifyResult {
            tolerance: self.cfg.classify.min_r_squared,
            classification,
        })
    }

    fn gap_eigenvalues(&mut self, gaps: &GapStructure) -> Stage<GapEigenvaluesResult> {
        let g = &self.cfg.gap;
        let gap = match g.interval {
            Some([lo, hi]) => Interval { lo, hi },
            None => gaps.first_positive_gap().ok_or("no positive gap in the computed range")?,
        };
        let v = self.potential()?;
        let ladder = self.ladder_parts(&g.ladder)?;
        let xi = g.xi;
        let pairs = ladder
            .par_iter()
            .map(|p| {
                let h = assemble_h_fiber(p, xi, &v).map_err(msg)?.matrix;
                let h0 = assemble_fiber(p, xi).map_err(msg)?.matrix;
                Ok((h, h0))
            })
            .collect::<Stage<Vec<_>>>()?;
        let (hs, h0s): (Vec<CsrMatrix>, Vec<CsrMatrix>) = pairs.into_iter().unzip();
        let tol = self.cfg.tolerances.eig;
        let perturbed = gap_eigenvalues(&hs, gap, g.margin_fraction, g.stability_tol, tol).map_err(msg)?;
        let free = gap_eigenvalues(&h0s, gap, g.margin_fraction, g.stability_tol, tol).map_err(msg)?;
        let dense_oracle_defect = if hs[0].rows() <= DENSE_THRESHOLD {
            let all = hs[0].to_dense().hermitian_eigen(false).map_err(msg)?.values;
            let want: Vec<f64> = all.into_iter().filter(|&e| perturbed.search.contains(e)).collect();
            let got = &perturbed.per_level[0].eigenvalues;
            Some(if want.len() == got.len() {
                got.iter().zip(&want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            } else {
                f64::INFINITY
            })
        } else {
            None
        };
        let ladder_backends = if g.ladder.is_empty() {
            vec![self.cfg.backend.clone()]
        } else {
            g.ladder.clone()
        };
        if let (Some(p), Some(h)) = (ladder.last(), hs.last()) {
            self.finest = Some((p.clone(), h.clone()));
        }
        Ok(GapEigenvaluesResult {
            tolerance: g.stability_tol,
            xi,
            ladder: ladder_backends,
            perturbed,
            free_counts: free.per_level.iter().map(|s| s.len()).collect(),
            dense_oracle_defect,
        })
    }

    fn lap_probe(&mut self, ge: &GapEigenvaluesResult) -> Stage<LapResult> {
        let (parts, h) = self.finest.clone().ok_or("no perturbed operator")?;
        let l = &self.cfg.lap;
        let tol = self.cfg.tolerances.inner;
        let search = ge.perturbed.search;
        let gap_lambda = l.lambda.unwrap_or(0.5 * (search.lo + search.hi));
        let stable = ge.perturbed.stable_values();
        let clearance = stable
            .iter()
            .map(|e| (e - gap_lambda).abs())
            .min_by(f64::total_cmp);
        let weight = transverse_weight(&parts, l.s).map_err(msg)?;
        let states = weighted_states(&weight, l.trials, self.cfg.seed);
        let mut jobs: Vec<(LapRole, usize, f64)> = (0..states.len()).map(|t| (LapRole::Gap, t, gap_lambda)).collect();
        let mut eigen_eps = Vec::new();
        if let Some(&e) = stable.first() {
            jobs.extend((0..states.len()).map(|t| (LapRole::Eigenvalue, t, e)));
            eigen_eps = match &l.eigen_epsilons {
                Some(list) => list.clone(),
                None => {
                    let gap = ge.perturbed.gap;
                    let d = stable[1..]
                        .iter()
                        .chain([gap.lo, gap.hi].iter())
                        .map(|x| (x - e).abs())
                        .fold(f64::INFINITY, f64::min);
                    let scale = (0.1 * d / l.epsilons[0]).min(1.0);
                    l.epsilons.iter().map(|x| x * scale).collect()
                }
            };
        }
        let entries = jobs
            .par_iter()
            .map(|&(role, trial, lambda)| {
                let eps = match role {
                    LapRole::Gap => &l.epsilons,
                    LapRole::Eigenvalue => &eigen_eps,
                };
                let table = lap_probe(&h, &states[trial], lambda, eps, tol).map_err(msg)?;
                Ok(LapEntry { role, trial, table })
            })
            .collect::<Stage<Vec<_>>>()?;
        Ok(LapResult {
            tolerance: tol,
            s: l.s,
            gap_lambda_clearance: clearance,
            entries,
        })
    }

    fn structural(&mut self) -> Stage<StructuralResult> {
        let parts = self.parts()?;
        let s = &self.cfg.structural;
        let budget = DEFAULT_MEMORY_BUDGET.max(self.cfg.identities.memory_budget);
        let h = assemble_h0_3d(&parts, s.n3, s.half_length3, P3Scheme::CentralDifference, budget).map_err(msg)?;
        let tol = self.cfg.tolerances.structural;
        let report = structural_inequality_check_3d(&h, tol).map_err(msg)?;
        Ok(StructuralResult { tolerance: tol, report })
    }

    fn essential(&mut self, cls: &PotentialClassification, gaps: &GapStructure) -> Stage<EssentialResult> {
        if cls.small_at_infinity.verdict != Verdict::Yes {
            return Err(format!(
                "potential is not classified small at infinity (verdict {:?})",
                cls.small_at_infinity.verdict
            ));
        }
        let v = self.potential()?;
        let ladder = self.ladder_parts(&self.cfg.essential.ladder)?;
        let pairs = ladder
            .par_iter()
            .map(|p| {
                let h = assemble_h_fiber(p, 0.0, &v).map_err(msg)?.matrix;
                let h0 = assemble_fiber(p, 0.0).map_err(msg)?.matrix;
                Ok((h, h0))
            })
            .collect::<Stage<Vec<_>>>()?;
        let windows: Vec<Interval> = if self.cfg.essential.windows.is_empty() {
            band_windows(gaps, 3)
        } else {
            self.cfg.essential.windows.iter().map(|&[lo, hi]| Interval { lo, hi }).collect()
        };
        if windows.is_empty() {
            return Err("no band windows available".into());
        }
        let tol = self.cfg.tolerances.eig;
        let report = essential_spectrum_probe(&pairs, &windows, tol).map_err(msg)?;
        Ok(EssentialResult { tolerance: tol, report })
    }
}

/// Windows around the first `count` bands at or above zero, reaching a
/// quarter of the way into each neighbouring gap.
pub fn band_windows(gaps: &GapStructure, count: usize) -> Vec<Interval> {
    gaps.gaps
        .windows(2)
        .filter(|w| w[1].lo >= 0.0)
        .take(count)
        .map(|w| Interval {
            lo: w[0].hi - 0.25 * w[0].width(),
            hi: w[1].lo + 0.25 * w[1].width(),
        })
        .collect()
}
