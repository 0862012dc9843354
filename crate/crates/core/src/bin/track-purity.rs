use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use track_purity::experiment::{self, ExperimentSpec, Overrides};

/// Runs one association-probability experiment and writes its CSV.
#[derive(Debug, Parser)]
#[command(name = "track-purity", version)]
struct Cli {
    /// key=value config file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed for the per-trial random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Also write an SVG plot next to the CSV.
    #[arg(long)]
    plot: bool,
    /// Overrides `experiment` in the config.
    #[arg(long)]
    experiment: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let ov = Overrides { experiment: cli.experiment, seed: cli.seed, trials: cli.trials };
    let spec = match &cli.config {
        Some(p) => experiment::parse_config_with(p, &ov),
        None => ExperimentSpec::from_str_with("", &ov),
    };
    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match experiment::run(&spec, &cli.out, cli.plot) {
        Ok(report) => {
            println!("wrote {} ({} rows)", report.csv.display(), report.table.rows.len());
            if let Some(svg) = &report.svg {
                println!("wrote {}", svg.display());
            }
            if let Some((x, e)) = &report.table.failure {
                eprintln!("numerical failure at x = {x}: {e}");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code_for(&e) as u8)
        }
    }
}
