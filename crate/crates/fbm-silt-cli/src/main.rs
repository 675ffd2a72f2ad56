use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbm_silt_cli::{
    acceptance_failures, cmd_constants, cmd_estimate, cmd_report, cmd_simulate, cmd_verify, configure_threads, write_constants,
    CliError, RunConfig, THREADS_ENV,
};

#[derive(Parser)]
#[command(name = "fbm-silt", version, about = "Self-intersection local time of fractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configured one).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed (overrides the configured one).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Tabulate the limit constants with error estimates.
    Constants,
    /// Write sampled fBm paths.
    Simulate,
    /// Write Monte Carlo samples of the mollified local time.
    Estimate,
    /// Run the regime experiment and write a report.
    Verify,
    /// Summarise the report and estimates in the output directory.
    Report,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.monte_carlo.base_seed = seed;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Cmd::Report = cli.command {
        let dir = match (&cli.out, &cli.config) {
            (Some(out), _) => out.clone(),
            (None, Some(_)) => load(cli)?.out_dir,
            (None, None) => return Err(CliError::Config("report needs --out or --config".into())),
        };
        for line in cmd_report(&dir)? {
            println!("{line}");
        }
        return Ok(());
    }

    let config = load(cli)?;
    configure_threads(cli.threads.or(config.threads));
    let dir = cli.out.clone().unwrap_or_else(|| config.out_dir.clone());
    match cli.command {
        Cmd::Constants => {
            let rows = cmd_constants(&config.hurst, &config.quadrature, config.chaos_order);
            for row in &rows {
                match row.value {
                    Some(v) => println!("{:<12} {:>16.9e}  ± {:.2e}  {}", row.name, v, row.error_estimate.unwrap_or(0.0), row.method),
                    None => println!("{:<12} {}", row.name, row.status),
                }
            }
            let path = write_constants(&dir, &config, &rows)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Simulate => {
            let files = cmd_simulate(&config, &dir)?;
            eprintln!("wrote {} path files under {}", files.len(), dir.display());
        }
        Cmd::Estimate => {
            let path = cmd_estimate(&config, &dir)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Verify => {
            let report = cmd_verify(&config, &dir)?;
            for line in cmd_report(&dir)? {
                println!("{line}");
            }
            let (failed, total) = acceptance_failures(&report.result);
            if failed > 0 {
                return Err(CliError::CriteriaFailed { failed, total });
            }
        }
        Cmd::Report => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fbm-silt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
