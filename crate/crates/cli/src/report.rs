//! Report writers: `report.json`, one CSV per table and two-column plot files.

use crate::error::CliError;
use crate::runner::{LapRole, RunReport};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const PLOT_DIR: &str = "plot";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn report_json(report: &RunReport) -> Result<String, serde_json::Error> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn load_report(path: &Path) -> Result<RunReport, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

/// Writes every artifact of `report` below `dir`; returns the files written.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let plots = dir.join(PLOT_DIR);
    fs::create_dir_all(&plots).map_err(io_err(&plots))?;
    let mut w = Writer { dir, files: Vec::new() };

    let path = dir.join(REPORT_FILE);
    let json = report_json(report).map_err(|e| format_err(&path, e))?;
    w.text(REPORT_FILE, &json)?;
    let timings = serde_json::to_string_pretty(&report.timings).map_err(|e| format_err(&path, e))?;
    w.text(TIMINGS_FILE, &(timings + "\n"))?;

    let r = &report.results;
    if let Some(s) = &r.internal_spectrum {
        let sp = &s.spectrum;
        let rows = (0..sp.len()).map(|i| SpectrumRow {
            index: i,
            eigenvalue: sp.eigenvalues[i],
            residual: sp.residuals[i],
            multiplicity: sp.multiplicity_of(i),
            flags: if sp.artifact_flags.get(i).copied().unwrap_or(false) {
                "artifact"
            } else {
                ""
            },
        });
        w.csv("spectrum.csv", rows)?;
        let pts: Vec<(f64, f64)> = sp.eigenvalues.iter().enumerate().map(|(i, e)| (i as f64, *e)).collect();
        w.plot("spectrum.dat", "index eigenvalue", &pts)?;
        let sym: Vec<(f64, f64)> = s.symmetrized.iter().enumerate().map(|(i, v)| (i as f64, v.value)).collect();
        w.plot("symmetrized.dat", "index value", &sym)?;
    }
    if let Some(g) = &r.gaps {
        let st = &g.structure;
        let rows = st
            .bands
            .iter()
            .map(|b| IntervalRow { kind: "band", lo: b.lo, hi: b.hi })
            .chain(st.gaps.iter().map(|b| IntervalRow { kind: "gap", lo: b.lo, hi: b.hi }));
        w.csv("gaps.csv", rows)?;
    }
    if let Some(f) = &r.fiber_check {
        let rows = f.xis.iter().enumerate().map(|(i, &xi)| FiberRow {
            xi,
            square_defect: f.square_defect[i],
            spectrum_defect: f.spectrum_defect.as_ref().map(|d| d[i]),
        });
        w.csv("fiber_check.csv", rows)?;
    }
    if let Some(m) = &r.mourre {
        let rows = m.reports.iter().map(|x| MourreRow {
            lambda: x.query.lambda,
            epsilon: x.query.epsilon,
            rho: x.rho,
            lower_bound: x.lower_bound,
            margin: x.margin,
            passed: x.passed,
            window_rank: x.window_rank,
            closed_form_defect: x.closed_form_defect,
            argmin_xi: x.argmin_xi,
        });
        w.csv("mourre.csv", rows)?;
        let mut eps: Vec<f64> = m.reports.iter().map(|x| x.query.epsilon).collect();
        eps.sort_by(f64::total_cmp);
        eps.dedup();
        for e in eps {
            let pts: Vec<(f64, f64)> = m
                .reports
                .iter()
                .filter(|x| x.query.epsilon == e)
                .map(|x| (x.query.lambda, x.rho))
                .collect();
            w.plot(&format!("rho_eps_{e}.dat"), "lambda rho", &pts)?;
        }
    }
    if let Some(id) = &r.identities {
        let rows = id.residuals.meshes.iter().flat_map(|m| {
            let head = [("anticommutator".to_string(), m.anticommutator), ("commutator_t".to_string(), m.commutator_t), ("a_symmetry".to_string(), m.a_symmetry)];
            let per_fn = m.functions.iter().flat_map(|f| {
                [
                    (format!("resolvent_commutator[{}]", f.function), f.resolvent_commutator),
                    (format!("momentum_commutator[{}]", f.function), f.momentum_commutator),
                    (format!("conjugation[{}]", f.function), f.conjugation),
                ]
            });
            head.into_iter().chain(per_fn).map(|(identity, residual)| IdentityRow {
                n3: m.n3,
                h3: m.h3,
                identity,
                residual,
            })
        });
        w.csv("identities.csv", rows)?;
        let rows = id.residuals.orders.iter().flat_map(|o| {
            o.orders.iter().enumerate().map(|(step, &order)| OrderRow {
                identity: o.identity.clone(),
                step,
                order,
            })
        });
        w.csv("identity_orders.csv", rows)?;
    }
    if let Some(c) = &r.classify {
        let cl = &c.classification;
        let named = [
            ("small_at_infinity", &cl.small_at_infinity),
            ("short_range", &cl.short_range),
            ("long_range_1", &cl.long_range[0]),
            ("long_range_2", &cl.long_range[1]),
            ("long_range_3", &cl.long_range[2]),
        ];
        let rows = named.iter().map(|(name, d)| ClassifyRow {
            test: name,
            verdict: format!("{:?}", d.verdict).to_lowercase(),
            partial_integral: d.partial_integral,
            tail_integral: d.tail_integral,
            exponent: d.fit.exponent,
            r_squared: d.fit.r_squared,
        });
        w.csv("classify.csv", rows)?;
        for (name, d) in named {
            let pts: Vec<(f64, f64)> = d.r.iter().copied().zip(d.g.iter().copied()).collect();
            w.plot(&format!("decay_{name}.dat"), "r g", &pts)?;
        }
    }
    if let Some(g) = &r.gap_eigenvalues {
        let rows = g.perturbed.tracked.iter().map(|t| TrackedRow {
            value: t.value,
            spread: t.spread,
            multiplicity: t.multiplicity,
            stable: t.stable,
        });
        w.csv("gap_eigenvalues.csv", rows)?;
    }
    if let Some(l) = &r.lap_probe {
        let rows = l.entries.iter().flat_map(|e| {
            e.table.rows.iter().map(move |row| LapCsvRow {
                role: role_name(e.role),
                trial: e.trial,
                lambda: e.table.lambda,
                epsilon: row.epsilon,
                re_f_plus: row.f_plus.re,
                im_f_plus: row.f_plus.im,
                re_f_minus: row.f_minus.re,
                im_f_minus: row.f_minus.im,
                residual: row.residual,
            })
        });
        w.csv("lap.csv", rows)?;
        for e in &l.entries {
            let stem = format!("lap_{}_{}", role_name(e.role), e.trial);
            let re: Vec<(f64, f64)> = e.table.rows.iter().map(|r| (r.epsilon, r.f_plus.re)).collect();
            let im: Vec<(f64, f64)> = e.table.rows.iter().map(|r| (r.epsilon, r.f_plus.im)).collect();
            w.plot(&format!("{stem}_re.dat"), "epsilon re_F", &re)?;
            w.plot(&format!("{stem}_im.dat"), "epsilon im_F", &im)?;
        }
    }
    if let Some(s) = &r.structural_check {
        let x = &s.report;
        let rows = [
            ("min_lower_spin", x.min_lower_spin),
            ("min_upper_spin", x.min_upper_spin),
            ("norm_h0_squared", x.norm_h0_squared),
            ("tol", x.tol),
        ]
        .into_iter()
        .map(|(quantity, value)| QuantityRow { quantity, value });
        w.csv("structural.csv", rows)?;
    }
    if let Some(e) = &r.ess_spectrum_probe {
        let rows = e.report.rows.iter().map(|c| EssentialRow {
            level: c.level,
            lo: c.window.lo,
            hi: c.window.hi,
            count_h: c.count_h,
            count_h0: c.count_h0,
            discrepancy: c.discrepancy,
        });
        w.csv("essential.csv", rows)?;
    }
    Ok(w.files)
}

fn role_name(r: LapRole) -> &'static str {
    match r {
        LapRole::Gap => "gap",
        LapRole::Eigenvalue => "eigenvalue",
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        self.files.push(path);
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut out = csv::Writer::from_path(&path).map_err(|e| format_err(&path, e))?;
        for row in rows {
            out.serialize(row).map_err(|e| format_err(&path, e))?;
        }
        out.flush().map_err(io_err(&path))?;
        self.files.push(path);
        Ok(())
    }

    /// Two whitespace-separated columns after a `#` header line.
    fn plot(&mut self, name: &str, header: &str, pts: &[(f64, f64)]) -> Result<(), CliError> {
        let path = self.dir.join(PLOT_DIR).join(name);
        let mut f = std::io::BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
        writeln!(f, "# {header}").map_err(io_err(&path))?;
        for (x, y) in pts {
            writeln!(f, "{x} {y}").map_err(io_err(&path))?;
        }
        f.flush().map_err(io_err(&path))?;
        self.files.push(path);
        Ok(())
    }
}

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    eigenvalue: f64,
    residual: f64,
    multiplicity: usize,
    flags: &'static str,
}

#[derive(Serialize)]
struct IntervalRow {
    kind: &'static str,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct FiberRow {
    xi: f64,
    square_defect: f64,
    spectrum_defect: Option<f64>,
}

#[derive(Serialize)]
struct MourreRow {
    lambda: f64,
    epsilon: f64,
    rho: f64,
    lower_bound: f64,
    margin: f64,
    passed: bool,
    window_rank: usize,
    closed_form_defect: Option<f64>,
    argmin_xi: Option<f64>,
}

#[derive(Serialize)]
struct IdentityRow {
    n3: usize,
    h3: f64,
    identity: String,
    residual: f64,
}

#[derive(Serialize)]
struct OrderRow {
    identity: String,
    step: usize,
    order: f64,
}

#[derive(Serialize)]
struct ClassifyRow {
    test: &'static str,
    verdict: String,
    partial_integral: f64,
    tail_integral: f64,
    exponent: f64,
    r_squared: f64,
}

#[derive(Serialize)]
struct TrackedRow {
    value: f64,
    spread: f64,
    multiplicity: usize,
    stable: bool,
}

#[derive(Serialize)]
struct LapCsvRow {
    role: &'static str,
    trial: usize,
    lambda: f64,
    epsilon: f64,
    re_f_plus: f64,
    im_f_plus: f64,
    re_f_minus: f64,
    im_f_minus: f64,
    residual: f64,
}

#[derive(Serialize)]
struct QuantityRow {
    quantity: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct EssentialRow {
    level: usize,
    lo: f64,
    hi: f64,
    count_h: usize,
    count_h0: usize,
    discrepancy: f64,
}
