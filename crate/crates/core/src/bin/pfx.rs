use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pfx_core::error::{Error, Result};
use pfx_core::run::run_command;
use pfx_core::spec::{parse_spec, Kind};

/// Fixed-point audits, certificates and solvers for perturbed metric spaces.
#[derive(Parser)]
#[command(name = "pfx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit (P1)-(P4) for D - P and search D for triangle violations
    AuditMetric(Common),
    /// Audit (F1)-(F3) for a gauge
    AuditGauge(Common),
    /// Certify an F-perturbed contraction on a pair grid
    Certify(Common),
    /// Picard iteration with gauge diagnostics
    Iterate(Common),
    /// Estimate the series criterion coefficients
    Series(Common),
    /// Solve -u'' = f(t, u), u(0) = u(1) = 0
    Bvp(Common),
}

#[derive(Args)]
struct Common {
    /// Problem spec file
    spec: PathBuf,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the spec's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec's tolerance
    #[arg(long)]
    tol: Option<f64>,
}

impl Command {
    fn split(&self) -> (Kind, &Common) {
        match self {
            Command::AuditMetric(c) => (Kind::MetricAudit, c),
            Command::AuditGauge(c) => (Kind::GaugeAudit, c),
            Command::Certify(c) => (Kind::Certify, c),
            Command::Iterate(c) => (Kind::Iterate, c),
            Command::Series(c) => (Kind::Series, c),
            Command::Bvp(c) => (Kind::Bvp, c),
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let (kind, args) = cli.command.split();
    let text = fs::read_to_string(&args.spec).map_err(|e| Error::Io {
        path: args.spec.clone(),
        source: e,
    })?;
    let mut spec = parse_spec(&text)?;
    if spec.kind != kind {
        return Err(Error::Validation {
            field: "kind".into(),
            message: format!("spec is `{}` but the command expects `{kind}`", spec.kind),
        });
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(tol) = args.tol {
        spec.set_tol(tol)?;
    }
    let result = run_command(&spec, &args.out)?;
    for f in &result.files {
        println!("{}", f.display());
    }
    Ok(result.outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("pfx: {e}");
            ExitCode::from(1)
        }
    }
}
