use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdmp_control_cli::commands::{run_file, Command, Overrides};
use pdmp_control_cli::CliError;

#[derive(Parser)]
#[command(name = "pdmp-control", version, about = "Controlled PDMP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate paths under the start control; trajectory CSVs and cost.
    Simulate(Common),
    /// Value iteration on the configured lattice.
    Value(Common),
    /// Minimize the dual cost over tabular intensity changes.
    Dual(Common),
    /// Penalized BSDE along the penalty ladder.
    Bsde(Common),
    /// Primal, dual and BSDE agreement report.
    Crosscheck(Common),
    /// Light-control tracking experiment on the HH model.
    Track(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Existing output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the root seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the default path count of the config.
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Value(c) => (Command::Value, c),
        Cmd::Dual(c) => (Command::Dual, c),
        Cmd::Bsde(c) => (Command::Bsde, c),
        Cmd::Crosscheck(c) => (Command::Crosscheck, c),
        Cmd::Track(c) => (Command::Track, c),
    };
    let result = (|| {
        if let Some(jobs) = common.jobs {
            if jobs == 0 {
                return Err(CliError::Config("--jobs must be positive".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        let overrides = Overrides {
            seed: common.seed,
            paths: common.paths,
        };
        run_file(command, &common.config, &common.out, &overrides)
    })();
    match result {
        Ok(manifest) => {
            for o in &manifest.outputs {
                println!("{}", common.out.join(&o.file).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
