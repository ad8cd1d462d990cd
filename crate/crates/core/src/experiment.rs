//! Privacy/utility sweep: for each epsilon, privatize and re-solve many
//! times, then summarize the cost of privacy against the a priori bound.

use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

use crate::accuracy::cost_bound;
use crate::cmdp::{
    build_gridworld, cost_of_privacy, extract_policy, hazard_constraint, hazard_cost_bound,
    initial_value, synthesize_policy, value_function, Cmdp, GridConfig, HazardConstraint,
};
use crate::error::{Error, Result};
use crate::lp::{self, FEAS_TOL};
use crate::matrix::dot;
use crate::mechanism::privatize_matrix;
use crate::problem::{validate, LinearProgram, PrivacyParams};

/// What the sweep privatizes and solves.
#[derive(Debug, Clone)]
pub enum ProblemSource {
    Lp(LinearProgram),
    Grid(GridConfig),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub eps_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub delta: f64,
    pub k: f64,
    pub source: ProblemSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eps_grid: vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
            trials: 100,
            base_seed: 2024,
            delta: 0.05,
            k: 0.5,
            source: ProblemSource::Grid(GridConfig::default()),
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return Err(Error::InvalidConfig("epsilon grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("need at least one trial".into()));
        }
        for &eps in &self.eps_grid {
            PrivacyParams::new(eps, self.delta, self.k)?;
        }
        Ok(())
    }
}

/// Summary for one epsilon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub epsilon: f64,
    pub mean_cost_of_privacy_percent: f64,
    pub std_dev: f64,
    pub mean_abs_objective_gap: f64,
    pub loss_bound: f64,
    pub n_trials: usize,
    pub n_infeasible: usize,
    /// Per-trial cost of privacy, in trial order.
    #[serde(skip)]
    pub costs: Vec<f64>,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one trial; independent of how many grid points or trials there
/// are in total.
pub fn trial_seed(base_seed: u64, eps_index: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(base_seed ^ splitmix64(eps_index as u64)) ^ trial as u64)
}

struct Trial {
    cost: f64,
    gap: f64,
}

/// The non-private reference, solved once per sweep.
enum Prepared {
    Lp {
        lp: LinearProgram,
        optimum: f64,
    },
    Grid {
        mdp: Cmdp,
        hazard: HazardConstraint,
        v_star: f64,
        objective: f64,
    },
}

impl Prepared {
    fn new(source: &ProblemSource) -> Result<Self> {
        match source {
            ProblemSource::Lp(lp) => {
                let validated = validate(lp)?;
                let sol = lp::solve_lp(&lp.c, validated.system());
                let optimum = sol.objective.ok_or(Error::Infeasible)?;
                Ok(Prepared::Lp {
                    lp: lp.clone(),
                    optimum,
                })
            }
            ProblemSource::Grid(cfg) => {
                let mdp = build_gridworld(cfg)?;
                let hazard = hazard_constraint(&mdp);
                let sys = hazard.to_system()?;
                // the worst-case hazard row must leave some policy feasible
                synthesize_policy(&mdp, sys.sup_a().row(0)).map_err(|e| match e {
                    Error::Infeasible => Error::WorstCaseInfeasible,
                    other => other,
                })?;
                let syn = synthesize_policy(&mdp, &hazard.row)?;
                let v_star = initial_value(&mdp, &value_function(&mdp, &syn.policy));
                Ok(Prepared::Grid {
                    mdp,
                    hazard,
                    v_star,
                    objective: syn.objective,
                })
            }
        }
    }

    fn bound(&self, p: &PrivacyParams) -> Result<f64> {
        match self {
            Prepared::Lp { lp, .. } => Ok(cost_bound(lp, p)?.bound),
            Prepared::Grid { mdp, .. } => Ok(hazard_cost_bound(mdp, p)?.bound),
        }
    }

    fn trial(&self, p: &PrivacyParams, seed: u64, epsilon: f64, trial: usize) -> Result<Trial> {
        let infeasible = || Error::TrialInfeasible { epsilon, trial };
        match self {
            Prepared::Lp { lp, optimum } => {
                let private = privatize_matrix(&lp.system, p, seed)?;
                let sys = private.system(&lp.system)?;
                let sol = lp::solve_lp(&lp.c, &sys);
                let x = sol.x.ok_or_else(infeasible)?;
                let original_ok = lp
                    .system
                    .a()
                    .mul_vec(&x)
                    .iter()
                    .zip(lp.system.b())
                    .all(|(l, b)| *l <= b + FEAS_TOL);
                if !original_ok {
                    return Err(infeasible());
                }
                let value = dot(&lp.c, &x);
                Ok(Trial {
                    cost: cost_of_privacy(*optimum, value)?,
                    gap: (optimum - value).abs(),
                })
            }
            Prepared::Grid {
                mdp,
                hazard,
                v_star,
                objective,
            } => {
                let private = privatize_matrix(&hazard.to_system()?, p, seed)?;
                let syn = synthesize_policy(mdp, private.a_tilde.row(0)).map_err(|e| match e {
                    Error::Infeasible => infeasible(),
                    other => other,
                })?;
                if dot(&hazard.row, &syn.occupancy) > hazard.f0 + FEAS_TOL {
                    return Err(infeasible());
                }
                let policy = extract_policy(&syn.occupancy, mdp.n_states(), mdp.n_actions());
                let v_tilde = initial_value(mdp, &value_function(mdp, &policy));
                Ok(Trial {
                    cost: cost_of_privacy(*v_star, v_tilde)?,
                    gap: (objective - syn.objective).abs(),
                })
            }
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the sweep. Any infeasible private problem, or a private solution
/// violating the original constraints, aborts the run.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.check()?;
    let prepared = Prepared::new(&cfg.source)?;
    cfg.eps_grid
        .iter()
        .enumerate()
        .map(|(ei, &epsilon)| {
            let p = PrivacyParams::new(epsilon, cfg.delta, cfg.k)?;
            let trials: Vec<Trial> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| prepared.trial(&p, trial_seed(cfg.base_seed, ei, t), epsilon, t))
                .collect::<Result<_>>()?;
            let costs: Vec<f64> = trials.iter().map(|t| t.cost).collect();
            let gaps: Vec<f64> = trials.iter().map(|t| t.gap).collect();
            let (mean_cost, std_cost) = mean_std(&costs);
            let (mean_gap, _) = mean_std(&gaps);
            Ok(ExperimentRecord {
                epsilon,
                mean_cost_of_privacy_percent: mean_cost,
                std_dev: std_cost,
                mean_abs_objective_gap: mean_gap,
                loss_bound: prepared.bound(&p)?,
                n_trials: cfg.trials,
                n_infeasible: 0,
                costs,
            })
        })
        .collect()
}

pub const CSV_HEADER: &str =
    "epsilon,mean_cop_percent,std_cop,mean_abs_gap,bound,trials,infeasible";

/// Nine significant digits; infinities print as `inf`.
pub fn format_sig9(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.8e}")
    }
}

pub fn records_to_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_sig9(r.epsilon),
            format_sig9(r.mean_cost_of_privacy_percent),
            format_sig9(r.std_dev),
            format_sig9(r.mean_abs_objective_gap),
            format_sig9(r.loss_bound),
            r.n_trials,
            r.n_infeasible
        );
    }
    out
}

/// JSON array of records; an infinite bound is written as `"inf"`.
pub fn records_to_json(records: &[ExperimentRecord]) -> serde_json::Value {
    serde_json::Value::Array(
        records
            .iter()
            .map(|r| {
                let mut v = serde_json::to_value(r).expect("records serialize");
                if !r.loss_bound.is_finite() {
                    v["loss_bound"] = "inf".into();
                }
                v
            })
            .collect(),
    )
}
