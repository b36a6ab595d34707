use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fibrum::{emit_report, load_config, render_report, run_scenario, ScenarioConfig, VerificationReport};
use fibrum_core::catalog::catalog_entries;
use fibrum_core::transport::IntegratorConfig;

/// Numerical checks for connections on fibre bundles.
#[derive(Debug, Parser)]
#[command(name = "fibrum", version)]
struct Cli {
    /// Seed for random sampling; overrides the config.
    #[arg(long, global = true, env = "FIBRUM_SEED")]
    seed: Option<u64>,
    /// Integrator step; overrides the config.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing except errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config (`-` reads standard input).
    Run { config: PathBuf },
    /// Run every check against a catalog bundle with default settings.
    Verify { bundle: String },
    /// List catalog bundles.
    Catalog,
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.command {
        Command::Catalog => {
            print_catalog();
            return ExitCode::SUCCESS;
        }
        Command::Run { config } => load_config(config),
        Command::Verify { bundle } => ScenarioConfig::verify(bundle),
    };
    let mut cfg = match cfg {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("fibrum: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(step) = cli.step {
        match IntegratorConfig::new(step, cfg.integrator.max_steps) {
            Ok(i) => cfg.integrator = i,
            Err(e) => {
                eprintln!("fibrum: --step: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    let report = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("fibrum: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let out = cli.out.clone().or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
    match &out {
        Some(path) => {
            if let Err(e) = emit_report(&report, path) {
                eprintln!("fibrum: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_USAGE);
            }
        }
        None if !cli.quiet => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(render_report(&report).as_bytes()).is_err() {
                return ExitCode::from(EXIT_USAGE);
            }
        }
        None => {}
    }
    if !cli.quiet {
        summarize(&report);
    }
    if report.overall_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn summarize(report: &VerificationReport) {
    let failed: Vec<_> = report.failed_checks().collect();
    eprintln!(
        "{} on {}: {} of {} checks passed",
        report.scenario,
        report.bundle,
        report.checks.len() - failed.len(),
        report.checks.len()
    );
    for c in failed {
        match &c.reason {
            Some(r) => eprintln!("  FAIL {}: {r}", c.check_name),
            None => eprintln!("  FAIL {}: residual {:e} > tolerance {:e}", c.check_name, c.max_residual, c.tolerance),
        }
    }
}

fn print_catalog() {
    let mut text = String::new();
    for e in catalog_entries() {
        text.push_str(&format!(
            "{}\n  base dim:  {}\n  fibre dim: {}\n  kind:      {:?}\n  params:    {}\n  {}\n",
            e.name,
            e.base_dim,
            e.fibre_dim,
            e.kind,
            e.params.join(", "),
            e.summary
        ));
    }
    // A closed pipe (`fibrum catalog | head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}
