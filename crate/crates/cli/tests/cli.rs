use magdirac::config::{Analysis, ScenarioConfig};
use magdirac::report::{emit_report, load_report, report_json, REPORT_FILE};
use magdirac::runner::{run_scenario, Status};
use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn reference() -> ScenarioConfig {
    ScenarioConfig::load(&scenario("landau_reference.toml")).unwrap()
}

fn quick_reference() -> ScenarioConfig {
    let mut c = reference();
    c.xi_grid.points = 41;
    c.threads = 1;
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_magdirac"))
}

#[test]
fn reference_scenario_reproduces_landau_gaps() {
    let r = run_scenario(&reference()).unwrap();
    assert!(r.all_ok(), "{:?}", r.stages);
    let g = &r.results.gaps.as_ref().unwrap().structure;
    assert!((g.mu0 - 1.0).abs() <= 1e-12, "mu0 = {}", g.mu0);
    let positive: Vec<_> = g.gaps.iter().filter(|x| x.lo > 0.0).collect();
    assert!(positive.len() >= 5);
    for (n, gap) in positive.iter().take(5).enumerate() {
        let lo = ((2 * n + 1) as f64).sqrt();
        let hi = ((2 * n + 3) as f64).sqrt();
        assert!((gap.lo - lo).abs() <= 1e-12 && (gap.hi - hi).abs() <= 1e-12, "{gap:?}");
    }
    let m = r.results.mourre.as_ref().unwrap();
    assert_eq!(m.reports.len(), 9);
    for rep in &m.reports {
        assert!(rep.closed_form_defect.unwrap() <= 1e-10);
    }
    assert!(m.epsilon_monotone.iter().all(|c| c.monotone));
}

#[test]
fn empty_analysis_list_echoes_config_only() {
    let mut c = reference();
    c.analyses.clear();
    let r = run_scenario(&c).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["stages"], serde_json::json!([]));
    assert_eq!(v["results"], serde_json::json!({}));
    let echoed: ScenarioConfig = serde_json::from_value(v["config"].clone()).unwrap();
    assert_eq!(echoed, c);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("scenario.toml");
    std::fs::write(&cfg_path, quick_reference().to_toml().unwrap()).unwrap();
    let out = dir.path().join("out");
    let names = [REPORT_FILE, "spectrum.csv", "gaps.csv", "mourre.csv", "plot/rho_eps_0.05.dat"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let status = bin().arg("--config").arg(&cfg_path).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(0));
        runs.push(names.map(|n| std::fs::read(out.join(n)).unwrap()));
    }
    for (i, name) in names.iter().enumerate() {
        assert!(runs[0][i] == runs[1][i], "{name} differs between runs");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut c = quick_reference();
    let one = run_scenario(&c).unwrap();
    c.threads = 3;
    let three = run_scenario(&c).unwrap();
    assert_eq!(
        serde_json::to_string(&one.results).unwrap(),
        serde_json::to_string(&three.results).unwrap()
    );
}

#[test]
fn report_round_trip() {
    let r = run_scenario(&quick_reference()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&r, dir.path()).unwrap();
    let back = load_report(&dir.path().join(REPORT_FILE)).unwrap();
    assert_eq!(report_json(&back).unwrap(), report_json(&r).unwrap());
    assert_eq!(back.config, r.config);
}

#[test]
fn scenario_files_round_trip() {
    for name in ["landau_reference.toml", "gaussian_well.toml", "grid_bump.toml"] {
        let c = ScenarioConfig::load(&scenario(name)).unwrap();
        let again = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c, "{name}");
    }
}

#[test]
fn spectrum_csv_format() {
    let r = run_scenario(&quick_reference()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&r, dir.path()).unwrap();
    let mut rd = csv::Reader::from_path(dir.path().join("spectrum.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["index", "eigenvalue", "residual", "multiplicity", "flags"]);
    let spec = &r.results.internal_spectrum.as_ref().unwrap().spectrum;
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), spec.eigenvalues.len());
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), i);
        assert_eq!(row[1].parse::<f64>().unwrap(), spec.eigenvalues[i]);
        assert!(row[4].is_empty() || &row[4] == "artifact");
    }
}

#[test]
fn rho_profile_plot_has_two_columns() {
    let r = run_scenario(&quick_reference()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&r, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("plot/rho_eps_0.01.dat")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    let pts: Vec<Vec<f64>> = lines
        .map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(pts.len(), 3);
    assert!(pts.iter().all(|p| p.len() == 2));
    assert_eq!(pts[1][0], 1.5);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("landau_reference.toml")).unwrap();
    std::fs::write(&bad, text.replace("levels = 20", "levels = 20\ncolour = \"red\"")).unwrap();
    let out = bin().arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("backend"));

    let out = bin()
        .arg("--config")
        .arg(scenario("landau_reference.toml"))
        .args(["--analysis", "mourre"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("requires"));

    let out = bin().arg("--config").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}

#[test]
fn partial_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("partial.toml");
    let text = std::fs::read_to_string(scenario("landau_reference.toml")).unwrap();
    // the oscillator basis needs a constant field; classification is independent
    let text = text
        .replace("kind = \"constant\"\nb0 = 1.0", "kind = \"periodic\"\nmean = 1.0\namplitude = 0.5\nwave_vector = [1.0, 0.0]")
        .replace("[\"internal-spectrum\", \"gaps\", \"mourre\"]", "[\"internal-spectrum\", \"gaps\", \"classify\"]");
    std::fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = bin().arg("--config").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let r = load_report(&out_dir.join(REPORT_FILE)).unwrap();
    assert_eq!(r.stage(Analysis::InternalSpectrum).unwrap().status, Status::Failed);
    assert_eq!(r.stage(Analysis::Gaps).unwrap().status, Status::Skipped);
    assert_eq!(r.stage(Analysis::Classify).unwrap().status, Status::Ok);
    assert!(r.results.classify.is_some());
}

#[test]
fn unwritable_output_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut c = quick_reference();
    c.analyses = vec![Analysis::InternalSpectrum];
    let r = run_scenario(&c).unwrap();
    let err = emit_report(&r, &blocker.join("sub")).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}

#[test]
fn every_stage_carries_a_tolerance() {
    let r = run_scenario(&quick_reference()).unwrap();
    assert!(r.stages.iter().all(|s| s.tolerance > 0.0));
    let v = serde_json::to_value(&r.results).unwrap();
    for (k, section) in v.as_object().unwrap() {
        assert!(section["tolerance"].as_f64().is_some(), "{k} has no tolerance");
    }
}
