use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use privcon::cmdp::{build_gridworld, hazard_cost_bound};
use privcon::experiment::{records_to_csv, records_to_json};
use privcon::lp::FEAS_TOL;
use privcon::matrix::dot;
use privcon::{
    cost_bound, load_problem_with_privacy, privatize_matrix, run_sweep, solve_lp, validate,
    ExperimentConfig, GridConfig, LinearProgram, PrivacyParams, ProblemSource,
};

type BoxResult<T> = Result<T, Box<dyn std::error::Error>>;

/// Differentially private linear programs with guaranteed feasibility.
#[derive(Parser)]
#[command(name = "privcon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Privatize the constraint matrix of a problem file.
    Privatize {
        problem: PathBuf,
        #[command(flatten)]
        privacy: PrivacyFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a problem, optionally after privatizing its constraints.
    Solve {
        problem: PathBuf,
        #[arg(long)]
        private: bool,
        #[command(flatten)]
        privacy: PrivacyFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the a priori bound on the expected objective loss.
    Bound {
        /// Problem file; omit to bound the gridworld hazard constraint.
        problem: Option<PathBuf>,
        #[command(flatten)]
        privacy: PrivacyFlags,
        #[arg(long)]
        grid_config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep epsilon and summarize the cost of privacy.
    Sweep {
        /// LP problem file; the gridworld is used when absent.
        #[arg(long, conflicts_with = "grid_config")]
        problem: Option<PathBuf>,
        #[arg(long)]
        grid_config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        eps_grid: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        k: Option<f64>,
        /// CSV path; the JSON records go next to it with a `.json`
        /// extension. Without it the CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Overrides for the problem file's `privacy` block.
#[derive(Args)]
struct PrivacyFlags {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
}

impl PrivacyFlags {
    fn resolve(&self, file: Option<PrivacyParams>) -> BoxResult<PrivacyParams> {
        let pick = |flag: Option<f64>, from_file: Option<f64>, name: &str| {
            flag.or(from_file)
                .ok_or_else(|| format!("missing --{name} and no privacy block in the problem"))
        };
        Ok(PrivacyParams::new(
            pick(self.epsilon, file.map(|p| p.epsilon), "epsilon")?,
            pick(self.delta, file.map(|p| p.delta), "delta")?,
            pick(self.k, file.map(|p| p.k), "k")?,
        )?)
    }
}

fn read(path: &Path) -> BoxResult<String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()).into())
}

fn load(path: &Path) -> BoxResult<(LinearProgram, Option<PrivacyParams>)> {
    load_problem_with_privacy(&read(path)?).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(value: &Value, out: Option<&Path>) -> BoxResult<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_text(&text, out)
}

fn write_text(text: &str, out: Option<&Path>) -> BoxResult<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display()).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn privatize(problem: &Path, flags: &PrivacyFlags, seed: u64, out: Option<&Path>) -> BoxResult<()> {
    let (lp, file_privacy) = load(problem)?;
    let p = flags.resolve(file_privacy)?;
    validate(&lp)?;
    let private = privatize_matrix(&lp.system, &p, seed)?;
    emit(&private.to_json(&lp)?, out)
}

/// Returns whether the reported solution is feasible for the original
/// problem; always true outside private mode.
fn solve(
    problem: &Path,
    private: bool,
    flags: &PrivacyFlags,
    seed: u64,
    out: Option<&Path>,
) -> BoxResult<bool> {
    let (lp, file_privacy) = load(problem)?;
    if !private {
        return emit(&serde_json::to_value(solve_lp(&lp.c, &lp.system))?, out).map(|_| true);
    }
    let p = flags.resolve(file_privacy)?;
    validate(&lp)?;
    let mechanism = privatize_matrix(&lp.system, &p, seed)?;
    let sol = solve_lp(&lp.c, &mechanism.system(&lp.system)?);
    let original_feasible = sol.x.as_ref().is_some_and(|x| {
        lp.system
            .a()
            .row_iter()
            .zip(lp.system.b())
            .all(|(row, b)| dot(row, x) <= b + FEAS_TOL)
    });
    let mut doc = serde_json::to_value(&sol)?;
    doc["original_feasible"] = json!(original_feasible);
    doc["mechanism"] = json!({
        "row_supports": mechanism.row_supports,
        "sigma": p.sigma(),
        "seed": seed,
    });
    emit(&doc, out)?;
    Ok(original_feasible)
}

fn bound(
    problem: Option<&Path>,
    grid: Option<&Path>,
    flags: &PrivacyFlags,
    out: Option<&Path>,
) -> BoxResult<()> {
    let report = match problem {
        Some(path) => {
            let (lp, file_privacy) = load(path)?;
            let p = flags.resolve(file_privacy)?;
            validate(&lp)?;
            cost_bound(&lp, &p)?
        }
        None => {
            let cfg = match grid {
                Some(path) => GridConfig::from_json(&read(path)?)?,
                None => GridConfig::default(),
            };
            hazard_cost_bound(&build_gridworld(&cfg)?, &flags.resolve(None)?)?
        }
    };
    emit(&serde_json::to_value(report)?, out)
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    problem: Option<&Path>,
    grid: Option<&Path>,
    eps_grid: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    delta: Option<f64>,
    k: Option<f64>,
    out: Option<&Path>,
) -> BoxResult<()> {
    let defaults = ExperimentConfig::default();
    let source = match (problem, grid) {
        (Some(path), _) => ProblemSource::Lp(load(path)?.0),
        (None, Some(path)) => ProblemSource::Grid(GridConfig::from_json(&read(path)?)?),
        (None, None) => defaults.source.clone(),
    };
    let cfg = ExperimentConfig {
        eps_grid: eps_grid.unwrap_or(defaults.eps_grid),
        trials: trials.unwrap_or(defaults.trials),
        base_seed: seed.unwrap_or(defaults.base_seed),
        delta: delta.unwrap_or(defaults.delta),
        k: k.unwrap_or(defaults.k),
        source,
    };
    let records = run_sweep(&cfg)?;
    write_text(&records_to_csv(&records), out)?;
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&records_to_json(&records))? + "\n";
        write_text(&json, Some(&path.with_extension("json")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> BoxResult<bool> {
    match cli.command {
        Command::Privatize {
            problem,
            privacy,
            seed,
            out,
        } => privatize(&problem, &privacy, seed, out.as_deref()).map(|_| true),
        Command::Solve {
            problem,
            private,
            privacy,
            seed,
            out,
        } => solve(&problem, private, &privacy, seed, out.as_deref()),
        Command::Bound {
            problem,
            privacy,
            grid_config,
            out,
        } => bound(
            problem.as_deref(),
            grid_config.as_deref(),
            &privacy,
            out.as_deref(),
        )
        .map(|_| true),
        Command::Sweep {
            problem,
            grid_config,
            eps_grid,
            trials,
            seed,
            delta,
            k,
            out,
        } => sweep(
            problem.as_deref(),
            grid_config.as_deref(),
            eps_grid,
            trials,
            seed,
            delta,
            k,
            out.as_deref(),
        )
        .map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: private solution violates the original constraints");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
