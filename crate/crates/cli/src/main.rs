use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qgcc_core::runner::{
    load_config, run_analyze, run_selftest, run_sweep, run_synthesize, run_validate, RunConfig, RunReport,
    RunnerError,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    /// Certified cost bound without a controller.
    Analyze,
    /// Coherent controller design.
    Synthesize,
    /// Grid over one scalar plant field; CSV and optional SVG.
    Sweep,
    /// Analysis and design, both checked against sampled perturbations.
    Validate,
    /// Run the bundled fixtures.
    Selftest,
}

/// Guaranteed-cost analysis and coherent controller synthesis for uncertain
/// linear quantum systems.
#[derive(Debug, Parser)]
#[command(name = "qgcc", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG plot path.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Oracle seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sampled perturbations per bound.
    #[arg(long)]
    samples: Option<usize>,
    /// Controller weight in the cost.
    #[arg(long)]
    rho: Option<f64>,
    /// Logarithmic y axis in the SVG.
    #[arg(long)]
    log_y: bool,
}

const EXIT_CONFIG: u8 = 1;

fn fail_config(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) -> Result<(), RunnerError> {
    if let Some(seed) = cli.seed {
        cfg.oracle.seed = seed;
    }
    if let Some(n) = cli.samples {
        if n == 0 {
            return Err(RunnerError::Config("--samples must be at least 1".into()));
        }
        cfg.oracle.samples = n;
    }
    if let Some(rho) = cli.rho {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(RunnerError::Config(format!("--rho must be > 0, got {rho}")));
        }
        cfg.plant.rho = rho;
        cfg.plant.rho_default = false;
    }
    if cli.out.is_some() {
        cfg.outputs.csv.clone_from(&cli.out);
    }
    if cli.svg.is_some() {
        cfg.outputs.svg.clone_from(&cli.svg);
    }
    cfg.outputs.log_y |= cli.log_y;
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<(), RunnerError> {
    fs::write(path, contents).map_err(|e| RunnerError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn emit(cfg: &RunConfig, report: &RunReport, sweep: bool) -> Result<(), RunnerError> {
    let csv = report.csv();
    match &cfg.outputs.csv {
        Some(p) => write(p, &csv)?,
        None if sweep => print!("{csv}"),
        None => {}
    }
    if !sweep {
        println!("{}", report.to_json());
    }
    if let Some(p) = &cfg.outputs.svg {
        write(p, &report.svg(cfg.outputs.log_y))?;
    }
    if let Some(p) = &cfg.outputs.json {
        write(p, &report.to_json())?;
    }
    Ok(())
}

fn summarize(report: &RunReport) {
    eprintln!("{}: {}", report.metadata.name, report.metadata.weights_note());
    for p in &report.points {
        for (what, status, msg) in [
            ("analysis", p.analysis.status, &p.analysis.message),
            ("synthesis", p.synthesis.status, &p.synthesis.message),
        ] {
            if status.is_failure() {
                eprintln!("  {} = {}: {what} {}", report.metadata.param, p.param, msg.as_deref().unwrap_or(""));
            }
        }
        if p.violations() > 0 {
            eprintln!("  {} = {}: {} bound violation(s)", report.metadata.param, p.param, p.violations());
        }
    }
    eprintln!(
        "{} point(s), {} failure(s), {} violation(s)",
        report.points.len(),
        report.failures(),
        report.violations()
    );
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    if let Command::Selftest = cli.command {
        if let Some(path) = &cli.config {
            if let Err(e) = load_config(path) {
                return fail_config(e);
            }
        }
        let report = run_selftest();
        println!("{report}");
        return ExitCode::from(report.exit_code() as u8);
    }

    let Some(path) = &cli.config else {
        return fail_config("--config <path> is required");
    };
    let mut cfg = match load_config(path) {
        Ok((cfg, _)) => cfg,
        Err(e) => return fail_config(e),
    };
    if let Err(e) = apply_overrides(&mut cfg, &cli) {
        return fail_config(e);
    }

    let (report, sweep) = match cli.command {
        Command::Analyze => (run_analyze(&cfg), false),
        Command::Synthesize => (run_synthesize(&cfg), false),
        Command::Validate => (run_validate(&cfg), false),
        Command::Sweep => match run_sweep(&cfg) {
            Ok(r) => (r, true),
            Err(e) => return fail_config(e),
        },
        Command::Selftest => unreachable!("handled above"),
    };
    if let Err(e) = emit(&cfg, &report, sweep) {
        return fail_config(e);
    }
    summarize(&report);
    ExitCode::from(report.exit_code() as u8)
}
