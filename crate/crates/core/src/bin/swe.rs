use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfswe::driver::{
    all_passed, convergence_study, format_checks, init_threads, load_config, mesh_info, run_config, validate_config,
};

#[derive(Parser)]
#[command(
    name = "swe",
    version,
    about = "Rotating shallow water solver with conserved energy and enstrophy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario to t_end, writing the configured CSV and VTK output.
    Run { config: PathBuf },
    /// Run a convergence study over several mesh levels.
    Converge {
        config: PathBuf,
        /// Comma-separated levels: cells per side for rectangles, refinements for the disk.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
    },
    /// Print mesh statistics and function space dimensions.
    MeshInfo { config: PathBuf },
    /// Check the mesh, the initial state and the semi-discrete conservation laws.
    Validate { config: PathBuf },
}

fn execute(cli: Cli) -> cfswe::Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let out = run_config(&cfg)?;
            let last = out.series.records.last().expect("a run records its initial state");
            println!(
                "{}: {} steps to t = {:.6}, relative energy error {:.3e}, relative enstrophy error {:.3e}",
                cfg.scenario.name(),
                last.step,
                last.time,
                out.series.max_rel_energy_error(),
                out.series.max_rel_enstrophy_error()
            );
            if let Some(speed) = out.crest_speed() {
                println!("boundary crest angular speed {speed:.6}");
            }
            println!("{}", format_checks(&out.checks));
            Ok(all_passed(&out.checks))
        }
        Command::Converge { config, levels } => {
            let cfg = load_config(&config)?;
            let table = convergence_study(&cfg, &levels)?;
            println!("{}", table.format());
            let checks = table.checks(cfg.degree);
            println!("{}", format_checks(&checks));
            Ok(all_passed(&checks))
        }
        Command::MeshInfo { config } => {
            let cfg = load_config(&config)?;
            println!("{}", mesh_info(&cfg)?);
            Ok(true)
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let checks = validate_config(&cfg)?;
            println!("{}", format_checks(&checks));
            Ok(all_passed(&checks))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
