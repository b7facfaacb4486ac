use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ricci_geom::config::{Overrides, RunConfig};
use ricci_geom::suite::{self, Command};

#[derive(Parser)]
#[command(
    name = "ricci-geom",
    version,
    about = "Curvature, conformal and flow checks on coordinate charts"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Write the JSON report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Built-in metric, replacing the one in the config
    #[arg(long, global = true)]
    metric: Option<String>,
    /// Coupling constant 4 pi G in the energy tensor
    #[arg(long = "fourpiG", global = true)]
    four_pi_g: Option<f64>,
    /// Print a plain-text table to stdout
    #[arg(long, global = true)]
    table: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Curvature identities and known values of built-in metrics
    Curvature,
    /// Connection and Ricci comparison for a conformal rescaling
    Conformal,
    /// Atypical-field residual, causal character and sigma recovery
    Atp,
    /// Geodesic, pregeodesic and blow-up integrations
    Flow,
    /// The full verification suite
    ReportAll,
}

fn execute(cli: &Cli) -> Result<bool, String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        samples: cli.samples,
        metric: cli.metric.clone(),
        four_pi_g: cli.four_pi_g,
    });
    let command = match cli.command {
        Cmd::Curvature => Command::Curvature,
        Cmd::Conformal => Command::Conformal,
        Cmd::Atp => Command::Atp,
        Cmd::Flow => Command::Flow,
        Cmd::ReportAll => Command::ReportAll,
    };
    let start = Instant::now();
    let mut report = suite::run(command, &cfg).map_err(|e| e.to_string())?;
    report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    let json = report.to_json();
    match &cli.out {
        Some(path) => std::fs::write(path, &json)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None if !cli.table => println!("{json}"),
        None => {}
    }
    if cli.table {
        print!("{}", report.table());
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
