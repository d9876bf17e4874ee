use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use krflow::harness::{
    check_at, exit_code_for, load_spec, render_check_at, render_spectrum, run_scenario, state_at,
    sweep_epsilon, ExperimentSpec, EXIT_FAIL, EXIT_NUMERICAL, EXIT_OK,
};
use krflow::monitors::Verdict;

/// Normalized Kähler-Ricci flow laboratory for rotationally symmetric
/// metrics on the projective line.
#[derive(Parser)]
#[command(name = "krflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and evaluate every registered check.
    Run {
        spec: PathBuf,
        /// Overrides the spec's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the spec's sweep list and fit the scaling law.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the checks on the single state at time `--at`.
    Check {
        spec: PathBuf,
        #[arg(long)]
        at: f64,
    },
    /// Print the weighted spectrum at time `--at`.
    Spectrum {
        spec: PathBuf,
        #[arg(long)]
        at: f64,
    },
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<ExperimentSpec, i32> {
    let mut spec = load_spec(path).map_err(|e| {
        eprintln!("krflow: {e}");
        exit_code_for(&e)
    })?;
    if let Some(dir) = out {
        spec.output_dir = dir;
    }
    Ok(spec)
}

fn execute(command: Command) -> Result<i32, i32> {
    let fail = |e: krflow::Error| {
        eprintln!("krflow: {e}");
        exit_code_for(&e)
    };
    match command {
        Command::Run { spec, out } => {
            let spec = load(&spec, out)?;
            let art = run_scenario(&spec).map_err(fail)?;
            match (&art.error, art.verdict()) {
                (Some(e), _) => eprintln!("krflow: {e}"),
                (None, Some(v)) => println!("overall = {v}"),
                (None, None) => {}
            }
            println!("report = {}", art.report_path.display());
            Ok(art.exit_code)
        }
        Command::Sweep { spec, out } => {
            let spec = load(&spec, out)?;
            let art = sweep_epsilon(&spec).map_err(fail)?;
            println!("points = {}", art.points.len());
            println!("successes = {}", art.successes());
            println!("failures = {}", art.failures());
            if let Some(r) = &art.regression {
                println!("slope = {:e}", r.slope);
            }
            if let Some(s) = art.ratio_spread {
                println!("ratio_max_over_min = {s:e}");
            }
            println!("report = {}", art.report_path.display());
            Ok(art.exit_code)
        }
        Command::Check { spec, at } => {
            let spec = load(&spec, None)?;
            let (state, rep) = check_at(&spec, at).map_err(fail)?;
            print!("{}", render_check_at(&state, &rep));
            Ok(if rep.overall() == Verdict::Fail {
                EXIT_FAIL
            } else if !rep.errors.is_empty() {
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            })
        }
        Command::Spectrum { spec, at } => {
            let spec = load(&spec, None)?;
            let state = state_at(&spec, at).map_err(fail)?;
            print!("{}", render_spectrum(&state));
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = execute(cli.command).unwrap_or_else(|c| c);
    ExitCode::from(code as u8)
}
