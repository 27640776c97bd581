use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use histloc::config::RunConfig;
use histloc::runner::{
    ensemble_to_dir, load_config, resolve_output_dir, run_to_dir, sweep_to_dir, RunnerError,
    SweepParam, OUTPUT_DIR_ENV,
};

/// Double-well molecules under two-history collisions.
#[derive(Parser, Debug)]
#[command(name = "histloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output directory [overrides $HISTLOC_OUTPUT_DIR and the config's output_dir]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration
    Run {
        #[arg(long, short)]
        config: PathBuf,
        /// Replace the config's seed
        #[arg(long, short)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the reference five-phase protocol
    Fig1 {
        #[arg(long, short, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run seeds 0..n-seeds and summarise
    Ensemble {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, short, default_value_t = 20)]
        n_seeds: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// One ensemble per parameter value
    Sweep {
        #[arg(long, short)]
        config: PathBuf,
        /// omega1, omegaP, t1, t2 or mode
        #[arg(long, short)]
        param: String,
        /// Comma-separated values
        #[arg(long, short, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, short, default_value_t = 20)]
        n_seeds: u64,
        #[command(flatten)]
        out: OutArg,
    },
}

fn out_dir(flag: &OutArg, config: &RunConfig) -> PathBuf {
    let env = std::env::var(OUTPUT_DIR_ENV).ok();
    resolve_output_dir(flag.out.as_deref(), env.as_deref(), config)
}

fn single_run(config: &RunConfig, dir: &Path) -> Result<(), RunnerError> {
    let (record, bundle) = run_to_dir(config, dir)?;
    println!(
        "seed {}: terminal score {:.4}, wells {:?}/{:?}",
        config.seed,
        record.terminal_score(),
        record.terminal_well[0],
        record.terminal_well[1]
    );
    for s in &record.snapshots {
        println!(
            "  phase {} ends at t = {:.1}, score {:.4}",
            s.label,
            s.time,
            histloc::analysis::localisation_score(&s.density)
        );
    }
    println!(
        "wrote {} and {} snapshots",
        bundle.timeseries.display(),
        bundle.snapshots.len()
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut c = load_config(&config)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            single_run(&c, &out_dir(&out, &c))
        }
        Command::Fig1 { seed, out } => {
            let c = RunConfig::fig1(seed);
            single_run(&c, &out_dir(&out, &c))
        }
        Command::Ensemble {
            config,
            n_seeds,
            out,
        } => {
            let c = load_config(&config)?;
            let (s, path) = ensemble_to_dir(&c, n_seeds, &out_dir(&out, &c))?;
            println!(
                "{} runs: localisation rate {:.3}, mean terminal score {:.4}, wells L {:.3} R {:.3}",
                s.n_runs, s.localisation_rate, s.mean_terminal_score, s.well_frequency.0, s.well_frequency.1
            );
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
            n_seeds,
            out,
        } => {
            let param: SweepParam = param.parse()?;
            let c = load_config(&config)?;
            let (points, path) = sweep_to_dir(&c, param, &values, n_seeds, &out_dir(&out, &c))?;
            for p in &points {
                println!(
                    "{} = {}: rate {:.3}, mean score {:.4}",
                    param.name(),
                    p.value,
                    p.localisation_rate,
                    p.mean_terminal_score
                );
            }
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let RunnerError::Degenerate {
                diagnostic: Some(p),
                ..
            } = &e
            {
                eprintln!("diagnostic written to {}", p.display());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
