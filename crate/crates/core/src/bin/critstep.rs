use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use critstep::harness::{
    builtin_experiment, builtin_experiments, run_experiment, write_csv, ExperimentSpec,
    HarnessError, BUILTIN_ENVIRONMENTS,
};

#[derive(Parser)]
#[command(name = "critstep", version, about = "Run tabular CVS and baseline learning-curve experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment, given by built-in name or JSON spec file.
    Run {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// List built-in experiments and environments.
    List,
    /// Run built-in experiments into an output directory.
    Reproduce {
        /// Run all eight built-in experiments.
        #[arg(long, conflicts_with = "names")]
        all: bool,
        /// Built-in experiments to run.
        names: Vec<String>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

fn resolve(spec: &str) -> Result<ExperimentSpec, HarnessError> {
    if let Some(s) = builtin_experiment(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if path.exists() {
        return ExperimentSpec::load(path);
    }
    Err(HarnessError::Config {
        name: spec.to_string(),
        reason: "not a built-in experiment name or an existing spec file (see `critstep list`)".into(),
    })
}

fn execute(spec: &ExperimentSpec, out: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out).map_err(|source| HarnessError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let started = Instant::now();
    let matrix = run_experiment(spec)?;
    let path = out.join(format!("{}.csv", spec.name));
    write_csv(&matrix, &path)?;
    let last = matrix.smoothed_curve().last().copied().unwrap_or(f64::NAN);
    println!(
        "{:<16} {} runs x {} episodes  final smoothed return {:>8.4}  {:.2}s  -> {}",
        spec.name,
        matrix.runs(),
        matrix.episodes(),
        last,
        started.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            spec,
            out,
            seed,
            runs,
            episodes,
        } => {
            let mut spec = resolve(&spec)?;
            if let Some(seed) = seed {
                spec.base_seed = seed;
            }
            if let Some(runs) = runs {
                spec.runs = runs;
            }
            if let Some(episodes) = episodes {
                spec.episodes = episodes;
            }
            execute(&spec, &out)
        }
        Command::List => {
            println!("experiments:");
            for s in builtin_experiments() {
                println!(
                    "  {:<16} {:<12} episodes={} runs={}",
                    s.name,
                    s.agent.name(),
                    s.episodes,
                    s.runs
                );
            }
            println!("environments:");
            for e in BUILTIN_ENVIRONMENTS {
                println!("  {e}");
            }
            Ok(())
        }
        Command::Reproduce { all, names, out } => {
            let specs = if all {
                builtin_experiments()
            } else if names.is_empty() {
                return Err(HarnessError::Config {
                    name: "reproduce".into(),
                    reason: "pass --all or at least one experiment name".into(),
                });
            } else {
                names.iter().map(|n| resolve(n)).collect::<Result<Vec<_>, _>>()?
            };
            for s in &specs {
                s.validate()?;
            }
            specs.iter().try_for_each(|s| execute(s, &out))
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
