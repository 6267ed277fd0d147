//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

use magdirac_core::discretize::{
    assemble_fiber, assemble_h0_3d, assemble_internal, fiber_square_defect, Backend, InternalParts, P3Scheme,
};
use magdirac_core::eigensolve::{eig_dense, eig_window};
use magdirac_core::field::{FieldModel, FieldProfile};
use magdirac_core::linalg::CsrMatrix;
use magdirac_core::mourre::{
    epsilon_monotone, identity_suite, lap_probe, mourre_verify_fibers, transverse_weight, weighted_states,
    MourreQuery, MourreReport, SuiteConfig, Target, XiGrid,
};
use magdirac_core::perturbation::{
    assemble_h_fiber, classify_potential, gap_eigenvalues, structural_inequality_check_3d, ClassifyParams,
    Verdict, DEFAULT_GAP_MARGIN,
};
use magdirac_core::potential::{make_potential, PotentialSpec};
use magdirac_core::spectrum::{
    block_decompose_h00, internal_spectrum, level_estimates, symmetrized_spectrum, values, Interval,
};
use std::panic;
use std::process::ExitCode;
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn constant() -> FieldModel {
    FieldModel::constant(1.0, 1.0).unwrap()
}

fn bump() -> FieldModel {
    FieldModel::new(
        FieldProfile::GaussianBump {
            background: 1.0,
            amplitude: 0.5,
            width: 1.0,
        },
        1.0,
    )
    .unwrap()
}

fn oscillator(levels: usize, centres: usize) -> InternalParts {
    assemble_internal(&constant(), &Backend::Oscillator { levels, centres }).unwrap()
}

fn grid(field: &FieldModel, n: usize, l: f64) -> InternalParts {
    assemble_internal(field, &Backend::Grid { n: [n, n], half_length: [l, l] }).unwrap()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn landau_levels() -> Outcome {
    let t0 = Instant::now();
    let parts = oscillator(40, 1);
    let spec = internal_spectrum(&parts, None, 1e-12).map_err(|e| e.to_string())?;
    let sym = values(&symmetrized_spectrum(&spec));
    let mut osc_err: f64 = 0.0;
    for n in 0..=38 {
        let level = ((2 * n + 1) as f64).sqrt();
        for target in [level, -level] {
            let d = sym.iter().map(|s| (s - target).abs()).fold(f64::INFINITY, f64::min);
            osc_err = osc_err.max(d);
        }
    }
    let g = grid(&constant(), 64, 8.0);
    let targets: Vec<f64> = (0..=3).map(|n| ((2 * n + 1) as f64).sqrt()).collect();
    let est = level_estimates(&g, &targets, 0.05, 1e-10).map_err(|e| e.to_string())?;
    let grid_err = est
        .iter()
        .map(|e| e.relative_error.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!(
        "oscillator max |err| {osc_err:.1e} (need 1e-12); grid 64² L=8 worst relative error n≤3 {:.2}% (need 2%), per level {:?}; {secs:.1} s",
        100.0 * grid_err,
        est.iter().map(|e| e.relative_error.map(|r| format!("{:.2}%", 100.0 * r))).collect::<Vec<_>>()
    );
    check(osc_err <= 1e-12 && grid_err <= 0.02 && secs <= 60.0, detail)
}

fn fiber_square() -> Outcome {
    let xis = [0.0, 0.5, -0.5, 2.0, -2.0, 10.0, -10.0];
    let mut worst: f64 = 0.0;
    for parts in [oscillator(40, 1), oscillator(8, 6), grid(&constant(), 32, 6.0), grid(&bump(), 24, 5.0)] {
        let d = fiber_square_defect(&parts, &xis).map_err(|e| e.to_string())?;
        worst = d.into_iter().fold(worst, f64::max);
    }
    check(worst <= 1e-12, format!("max defect {worst:.1e} (need 1e-12)"))
}

fn block_decomposition() -> Outcome {
    let mut residual: f64 = 0.0;
    let mut spectral: f64 = 0.0;
    for parts in [oscillator(30, 1), oscillator(6, 5), grid(&constant(), 16, 4.0), grid(&bump(), 14, 4.0)] {
        let h00 = assemble_fiber(&parts, 0.0).map_err(|e| e.to_string())?;
        let b = block_decompose_h00(&parts, &h00).map_err(|e| e.to_string())?;
        residual = residual.max(b.off_block_residual);
        let full = eig_dense(&h00.matrix, false).map_err(|e| e.to_string())?.eigenvalues;
        let h = eig_dense(&parts.operator.matrix, false).map_err(|e| e.to_string())?.eigenvalues;
        let mut union: Vec<f64> = h.iter().flat_map(|&e| [e, -e]).collect();
        union.sort_by(f64::total_cmp);
        spectral = spectral.max(max_dev(&full, &union));
    }
    check(
        residual <= 1e-12 && spectral <= 1e-10,
        format!("off-block residual {residual:.1e} (need 1e-12), multiset deviation {spectral:.1e} (need 1e-10)"),
    )
}

fn identities() -> Outcome {
    let t0 = Instant::now();
    let parts = grid(&constant(), 32, 6.0);
    let r = identity_suite(&parts, &SuiteConfig::default()).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let f2 = r.max_anticommutator();
    let mut orders = Vec::new();
    let mut ok = f2 <= 1e-10 && secs <= 300.0;
    for prefix in ["commutator_t", "resolvent_commutator", "momentum_commutator", "conjugation"] {
        let o = r.min_order(prefix).unwrap_or(f64::NAN);
        ok &= o >= 1.9;
        orders.push(format!("{prefix} {o:.3}"));
    }
    let meshes: Vec<usize> = r.meshes.iter().map(|m| m.n3).collect();
    check(
        ok,
        format!("anticommutator {f2:.1e} (need 1e-10); min orders {} (need 1.9); n3 {meshes:?}; {secs:.1} s", orders.join(", ")),
    )
}

const LAMBDAS: [f64; 3] = [1.3, 1.5, 1.6];
const EPSILONS: [f64; 3] = [0.05, 0.02, 0.01];

fn mourre_reports() -> Result<(Vec<Vec<MourreReport>>, Vec<MourreReport>), String> {
    let parts = oscillator(20, 1);
    let spec = internal_spectrum(&parts, None, 1e-12).map_err(|e| e.to_string())?;
    let sym = values(&symmetrized_spectrum(&spec));
    let grid = XiGrid::new(-5.0, 5.0, 401).map_err(|e| e.to_string())?;
    let run = |lambda: f64, eps: f64| {
        let q = MourreQuery::new(lambda, eps, Target::Fibers, 1e-12).map_err(|e| e.to_string())?;
        mourre_verify_fibers(&parts, &sym, q, grid, 0.02).map_err(|e| e.to_string())
    };
    let mut table = Vec::new();
    for lambda in LAMBDAS {
        table.push(EPSILONS.iter().map(|&e| run(lambda, e)).collect::<Result<Vec<_>, _>>()?);
    }
    let edge = EPSILONS
        .iter()
        .map(|&e| run(3f64.sqrt(), e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((table, edge))
}

fn mourre_bound() -> Outcome {
    let (table, edge) = mourre_reports()?;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut defect: f64 = 0.0;
    for row in &table {
        for r in row {
            defect = defect.max(r.closed_form_defect.unwrap_or(f64::INFINITY));
        }
        let at = |eps: f64| row.iter().find(|r| r.query.epsilon == eps).unwrap_or_else(|| unreachable!());
        let r = at(0.05);
        let need = r.lower_bound - 0.02;
        ok &= r.rho >= need;
        lines.push(format!(
            "λ={} ρ(ε=0.05)={:.4} need ≥{:.4}, ρ(ε=0.01)={:.4}",
            r.query.lambda,
            r.rho,
            need,
            at(0.01).rho
        ));
    }
    let edge_rho = edge.last().map_or(f64::NAN, |r| r.rho);
    ok &= defect <= 1e-10 && edge_rho.abs() <= 0.05;
    check(
        ok,
        format!(
            "{}; closed-form defect {defect:.1e} (need 1e-10); ρ(√3; 0.01) = {edge_rho:.2e} (need |ρ| ≤ 0.05)",
            lines.join("; ")
        ),
    )
}

fn mourre_monotone() -> Outcome {
    let (table, edge) = mourre_reports()?;
    let mut ok = true;
    let mut parts = Vec::new();
    for row in table.iter().chain(std::iter::once(&edge)) {
        let m = epsilon_monotone(row, 1e-10);
        ok &= m;
        let rhos: Vec<String> = row.iter().map(|r| format!("{:.4}", r.rho)).collect();
        parts.push(format!("λ={:.4}: [{}]", row[0].query.lambda, rhos.join(", ")));
    }
    check(ok, format!("ρ over ε = {EPSILONS:?}: {}", parts.join("; ")))
}

struct GapSetup {
    parts: Vec<InternalParts>,
    perturbed: Vec<CsrMatrix>,
    free: Vec<CsrMatrix>,
    gap: Interval,
}

fn gap_setup() -> GapSetup {
    let v = make_potential(&PotentialSpec::Gaussian { v0: -0.5, width: 1.0 }).unwrap();
    let parts = vec![oscillator(10, 20), oscillator(14, 28)];
    let perturbed = parts.iter().map(|p| assemble_h_fiber(p, 0.0, &v).unwrap().matrix).collect();
    let free = parts.iter().map(|p| assemble_fiber(p, 0.0).unwrap().matrix).collect();
    GapSetup {
        parts,
        perturbed,
        free,
        gap: Interval { lo: 1.0, hi: 3f64.sqrt() },
    }
}

fn gap_spectrum() -> Outcome {
    let s = gap_setup();
    let e = |x: magdirac_core::Error| x.to_string();
    let r = gap_eigenvalues(&s.perturbed, s.gap, DEFAULT_GAP_MARGIN, 1e-2, 1e-10).map_err(e)?;
    let stable = r.stable_values();
    let coarse = eig_window(&s.perturbed[0], r.search.lo, r.search.hi, s.perturbed[0].rows(), 1e-12)
        .map_err(e)?
        .eigenvalues;
    let oracle: Vec<f64> = s.perturbed[0]
        .to_dense()
        .hermitian_eigen(false)
        .map_err(e)?
        .values
        .into_iter()
        .filter(|&x| r.search.contains(x))
        .collect();
    let oracle_dev = max_dev(&coarse, &oracle);
    let free = gap_eigenvalues(&s.free, s.gap, DEFAULT_GAP_MARGIN, 1e-2, 1e-10).map_err(e)?;
    let free_counts: Vec<usize> = free.per_level.iter().map(|l| l.len()).collect();
    let ok = !stable.is_empty() && oracle_dev <= 1e-8 && free_counts.iter().all(|&c| c == 0);
    check(
        ok,
        format!(
            "stable eigenvalues in ({:.3}, {:.3}): {:?}; coarse Lanczos vs dense {oracle_dev:.1e} (need 1e-8); V=0 counts {free_counts:?}",
            r.search.lo,
            r.search.hi,
            stable.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>()
        ),
    )
}

fn lap() -> Outcome {
    let s = gap_setup();
    let r = gap_eigenvalues(&s.perturbed, s.gap, DEFAULT_GAP_MARGIN, 1e-2, 1e-10).map_err(|e| e.to_string())?;
    let stable = r.stable_values();
    let h = &s.perturbed[1];
    let parts = &s.parts[1];
    let lambda = 1.5;
    let finest = &r.per_level[1].eigenvalues;
    let clearance = finest.iter().map(|e| (e - lambda).abs()).fold(f64::INFINITY, f64::min);
    let w = transverse_weight(parts, 1.0).map_err(|e| e.to_string())?;
    let states = weighted_states(&w, 3, 2024);
    let eps = [1e-1, 3e-2, 1e-2, 3e-3];
    let mut ok = clearance > 10.0 * eps[eps.len() - 1];
    let mut decreasing = Vec::new();
    for psi in &states {
        let t = lap_probe(h, psi, lambda, &eps, 1e-12).map_err(|e| e.to_string())?;
        ok &= t.increments_decreasing;
        decreasing.push(t.increments_decreasing);
    }
    let e0 = *stable.first().ok_or("no gap eigenvalue to probe")?;
    let nearest = finest
        .iter()
        .filter(|&&x| x != e0)
        .chain([s.gap.lo, s.gap.hi].iter())
        .map(|x| (x - e0).abs())
        .fold(f64::INFINITY, f64::min);
    let scale = (0.1 * nearest / eps[0]).min(1.0);
    let eig_eps: Vec<f64> = eps.iter().map(|x| x * scale).collect();
    let mut slopes = Vec::new();
    for psi in &states {
        let t = lap_probe(h, psi, e0, &eig_eps, 1e-12).map_err(|e| e.to_string())?;
        let slope = t.im_slope.unwrap_or(f64::NAN);
        ok &= (slope + 1.0).abs() <= 0.1;
        slopes.push(format!("{slope:.3}"));
    }
    check(
        ok,
        format!(
            "λ=1.5 clearance {clearance:.3}, increments decreasing {decreasing:?}; at E={e0:.5} with ε from {:.1e}: Im F slopes [{}] (need −1 ± 0.1)",
            eig_eps[0],
            slopes.join(", ")
        ),
    )
}

fn classifier() -> Outcome {
    let params = ClassifyParams::default();
    let classify = |spec: PotentialSpec| {
        classify_potential(&make_potential(&spec).map_err(|e| e.to_string())?, &params).map_err(|e| e.to_string())
    };
    let mut ok = true;
    let mut lines = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let c = classify(PotentialSpec::PowerLaw { amplitude: 1.0, p })?;
        ok &= c.short_range.verdict == Verdict::Yes;
        lines.push(format!("p={p}: short {:?}", c.short_range.verdict));
    }
    let c = classify(PotentialSpec::PowerLaw { amplitude: 1.0, p: 0.5 })?;
    ok &= c.short_range.verdict == Verdict::No && c.long_range_verdict == Verdict::Yes;
    lines.push(format!(
        "p=0.5: short {:?}, long {:?}",
        c.short_range.verdict, c.long_range_verdict
    ));
    let c = classify(PotentialSpec::Scalar { value: 1.0 })?;
    ok &= c.small_at_infinity.verdict == Verdict::No;
    lines.push(format!("constant: small at infinity {:?}", c.small_at_infinity.verdict));
    check(ok, lines.join("; "))
}

fn structural() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, field) in [("constant", constant()), ("bump", bump())] {
        let parts = grid(&field, 32, 6.0);
        let h = assemble_h0_3d(&parts, 16, 6.0, P3Scheme::CentralDifference, 40_000_000).map_err(|e| e.to_string())?;
        let r = structural_inequality_check_3d(&h, 1e-6).map_err(|e| e.to_string())?;
        ok &= r.holds();
        lines.push(format!(
            "{name}: lower {:.4} upper {:.4} floor {:.1e}",
            r.min_lower_spin,
            r.min_upper_spin,
            -1e-6 * r.norm_h0_squared
        ));
    }
    check(ok, lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Landau levels", landau_levels),
        ("fiber square identity", fiber_square),
        ("block decomposition", block_decomposition),
        ("commutator identities", identities),
        ("Mourre lower bound", mourre_bound),
        ("ε-monotonicity", mourre_monotone),
        ("gap eigenvalues", gap_spectrum),
        ("LAP probe", lap),
        ("classifier", classifier),
        ("structural inequalities", structural),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name} [{secs:.1} s]: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
