use clap::Parser;
use magdirac::{emit_report, Analysis, CliError, ScenarioConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run a magnetic Dirac operator scenario and write its reports.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// scenario file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// output directory, overrides `output` in the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads, overrides `threads`
    #[arg(long)]
    threads: Option<usize>,
    /// overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// run only these analyses (repeatable), overrides `analyses`
    #[arg(long = "analysis", value_parser = parse_analysis)]
    analyses: Vec<Analysis>,
}

fn parse_analysis(s: &str) -> Result<Analysis, String> {
    Analysis::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Analysis::ALL.iter().map(|a| a.name()).collect();
        format!("unknown analysis `{s}`; expected one of {}", names.join(", "))
    })
}

fn configure(args: &Args) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output = out.to_string_lossy().into_owned();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if !args.analyses.is_empty() {
        cfg.analyses = args.analyses.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match configure(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let report = match magdirac::runner::run_scenario_with(&cfg, &mut |rec, secs| {
        eprintln!("{:<20} {:?} ({secs:.2} s)", rec.analysis.name(), rec.status);
        if let Some(m) = &rec.message {
            eprintln!("  {m}");
        }
    }) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let dir = PathBuf::from(&cfg.output);
    match emit_report(&report, &dir) {
        Ok(files) => eprintln!("wrote {} files to {}", files.len(), dir.display()),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if report.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

