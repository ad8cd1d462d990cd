//! Constrained MDPs: gridworld construction, the hazard constraint over
//! occupancy measures, policy synthesis by linear programming, and policy
//! evaluation.
//!
//! The occupancy variable `x(s, a)` is flattened as `s * q + a`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::accuracy::{hoffman_constant, xi_term, AccuracyReport};
use crate::error::{Error, Result};
use crate::lp::{self, Status};
use crate::matrix::{dot, norm2, Matrix};
use crate::problem::{ConstraintSystem, PrivacyParams};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite discounted MDP with a single hazard cost constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmdp {
    n_states: usize,
    n_actions: usize,
    rewards: Matrix,
    /// `transitions[(s * q + a) * p + y]`
    transitions: Vec<f64>,
    gamma: f64,
    mu: Vec<f64>,
    hazard_states: Vec<usize>,
    beta: Vec<f64>,
    f0: f64,
    sup_a: f64,
}

impl Cmdp {
    /// `transitions` is indexed `[s][a][y]`; `beta` holds one weight per
    /// state and is only read on hazard states.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rewards: Matrix,
        transitions: Vec<Vec<Vec<f64>>>,
        gamma: f64,
        mu: Vec<f64>,
        hazard_states: Vec<usize>,
        beta: Vec<f64>,
        f0: f64,
        sup_a: f64,
    ) -> Result<Self> {
        let (p, q) = rewards.shape();
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0,1), got {gamma}"
            )));
        }
        if transitions.len() != p || mu.len() != p || beta.len() != p {
            return Err(Error::Dimension(
                "transition, mu, and beta must have one entry per state".into(),
            ));
        }
        let mut flat = Vec::with_capacity(p * q * p);
        for (s, per_action) in transitions.iter().enumerate() {
            if per_action.len() != q {
                return Err(Error::Dimension(format!(
                    "state {s} has {} actions, expected {q}",
                    per_action.len()
                )));
            }
            for (a, dist) in per_action.iter().enumerate() {
                if dist.len() != p {
                    return Err(Error::Dimension(format!(
                        "T[{s}][{a}] has length {}",
                        dist.len()
                    )));
                }
                check_distribution(dist, &format!("T[{s}][{a}]"))?;
                flat.extend_from_slice(dist);
            }
        }
        check_distribution(&mu, "mu")?;
        if hazard_states.iter().any(|&s| s >= p) {
            return Err(Error::InvalidConfig("hazard state out of range".into()));
        }
        if beta.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidConfig(
                "hazard weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            n_states: p,
            n_actions: q,
            rewards,
            transitions: flat,
            gamma,
            mu,
            hazard_states,
            beta,
            f0,
            sup_a,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn rewards(&self) -> &Matrix {
        &self.rewards
    }

    pub fn hazard_states(&self) -> &[usize] {
        &self.hazard_states
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// Distribution over successors of `(s, a)`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let p = self.n_states;
        let start = (s * self.n_actions + a) * p;
        &self.transitions[start..start + p]
    }

    /// Flattened rewards, aligned with the occupancy variable.
    pub fn reward_vector(&self) -> Vec<f64> {
        self.rewards.as_slice().to_vec()
    }
}

fn check_distribution(dist: &[f64], what: &str) -> Result<()> {
    if dist.iter().any(|&v| v.is_nan() || v < 0.0) {
        return Err(Error::InvalidConfig(format!("{what} has a negative entry")));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidConfig(format!("{what} sums to {total}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardCell {
    pub cell: [usize; 2],
    pub beta: f64,
}

/// Gridworld layout; cells are `[row, col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    pub hazards: Vec<HazardCell>,
    pub slip: f64,
    pub gamma: f64,
    pub f0: f64,
    pub goal_reward: f64,
    pub sup_a: f64,
}

impl Default for GridConfig {
    /// 5x5 grid crossed top to bottom along the middle column, with two
    /// hazard cells blocking the direct route.
    fn default() -> Self {
        let hazards = [[2, 2], [2, 3]]
            .into_iter()
            .map(|cell| HazardCell { cell, beta: 1.0 })
            .collect();
        Self {
            width: 5,
            height: 5,
            start: [0, 2],
            goal: [4, 2],
            hazards,
            slip: 0.1,
            gamma: 0.9,
            f0: 0.3,
            goal_reward: 1.0,
            sup_a: 3.0,
        }
    }
}

impl GridConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    fn index(&self, [r, c]: [usize; 2]) -> usize {
        r * self.width + c
    }

    fn inside(&self, [r, c]: [usize; 2]) -> bool {
        r < self.height && c < self.width
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return bad("grid must be at least 1x1".into());
        }
        if !self.inside(self.start) || !self.inside(self.goal) {
            return bad("start and goal must lie inside the grid".into());
        }
        for h in &self.hazards {
            if !self.inside(h.cell) {
                return bad(format!("hazard {:?} lies outside the grid", h.cell));
            }
            if h.cell == self.goal {
                return bad("the goal cell cannot be hazardous".into());
            }
            if !(h.beta >= 0.0 && h.beta.is_finite()) {
                return bad(format!("hazard weight {} must be nonnegative", h.beta));
            }
        }
        if !(0.0..1.0).contains(&self.slip) {
            return bad(format!("slip must lie in [0,1), got {}", self.slip));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if !self.f0.is_finite() || !self.goal_reward.is_finite() || !self.sup_a.is_finite() {
            return bad("f0, goal_reward, and sup_a must be finite".into());
        }
        Ok(())
    }
}

/// Up, down, left, right.
const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Builds the gridworld CMDP. The intended move happens with probability
/// `1 - slip`; each other direction gets `slip / 3`. Moves off the grid stay
/// put and the goal is absorbing.
pub fn build_gridworld(cfg: &GridConfig) -> Result<Cmdp> {
    cfg.check()?;
    let p = cfg.width * cfg.height;
    let q = MOVES.len();
    let goal = cfg.index(cfg.goal);
    let step = |s: usize, (dr, dc): (isize, isize)| -> usize {
        let (r, c) = ((s / cfg.width) as isize + dr, (s % cfg.width) as isize + dc);
        if r < 0 || c < 0 || r >= cfg.height as isize || c >= cfg.width as isize {
            s
        } else {
            r as usize * cfg.width + c as usize
        }
    };
    let mut transitions = vec![vec![vec![0.0; p]; q]; p];
    for (s, per_action) in transitions.iter_mut().enumerate() {
        for (a, dist) in per_action.iter_mut().enumerate() {
            if s == goal {
                dist[goal] = 1.0;
                continue;
            }
            for (d, &mv) in MOVES.iter().enumerate() {
                let prob = if d == a {
                    1.0 - cfg.slip
                } else {
                    cfg.slip / 3.0
                };
                dist[step(s, mv)] += prob;
            }
        }
    }
    let rewards = Matrix::from_fn(p, q, |s, _| if s == goal { cfg.goal_reward } else { 0.0 });
    let mut mu = vec![0.0; p];
    mu[cfg.index(cfg.start)] = 1.0;
    let mut hazard_states: Vec<usize> = cfg.hazards.iter().map(|h| cfg.index(h.cell)).collect();
    hazard_states.sort_unstable();
    hazard_states.dedup();
    let mut beta = vec![0.0; p];
    for h in &cfg.hazards {
        beta[cfg.index(h.cell)] = h.beta;
    }
    Cmdp::new(
        rewards,
        transitions,
        cfg.gamma,
        mu,
        hazard_states,
        beta,
        cfg.f0,
        cfg.sup_a,
    )
}

/// The single linear hazard constraint `a . x <= f0` over occupancies.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardConstraint {
    pub row: Vec<f64>,
    pub f0: f64,
    pub sup_row: Vec<f64>,
    pub mask: Vec<bool>,
}

impl HazardConstraint {
    /// As a one-row constraint system, ready for privatization.
    pub fn to_system(&self) -> Result<ConstraintSystem> {
        let n = self.row.len();
        ConstraintSystem::new(
            Matrix::from_fn(1, n, |_, j| self.row[j]),
            vec![self.f0],
            Matrix::from_fn(1, n, |_, j| self.mask[j]),
            Matrix::from_fn(1, n, |_, j| self.sup_row[j]),
        )
    }
}

/// Entry `(s, a)` is `beta_s * gamma` on hazard states and a masked zero
/// elsewhere. Hazard entries have supremum `sup_a`.
pub fn hazard_constraint(m: &Cmdp) -> HazardConstraint {
    let q = m.n_actions;
    let n = m.n_pairs();
    let mut row = vec![0.0; n];
    let mut sup_row = vec![0.0; n];
    let mut mask = vec![true; n];
    for &s in &m.hazard_states {
        let coef = m.beta[s] * m.gamma;
        if coef == 0.0 {
            continue;
        }
        for a in 0..q {
            row[s * q + a] = coef;
            sup_row[s * q + a] = m.sup_a;
            mask[s * q + a] = false;
        }
    }
    HazardConstraint {
        row,
        f0: m.f0,
        sup_row,
        mask,
    }
}

/// Stochastic policy, `pi[(s, a)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Policy {
    pub pi: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub occupancy: Vec<f64>,
    pub policy: Policy,
    pub objective: f64,
}

/// Flow-conservation rows `sum_a x(s',a) - gamma sum_{s,a} x(s,a) T(s,a,s')`,
/// one per state.
fn flow_matrix(m: &Cmdp) -> Matrix {
    let (p, q) = (m.n_states, m.n_actions);
    let mut flow = Matrix::zeros(p, p * q);
    for s in 0..p {
        for a in 0..q {
            let col = s * q + a;
            flow[(s, col)] += 1.0;
            for (y, &t) in m.transition(s, a).iter().enumerate() {
                if t != 0.0 {
                    flow[(y, col)] -= m.gamma * t;
                }
            }
        }
    }
    flow
}

/// Maximizes expected discounted reward over occupancy measures subject to
/// `constraint . x <= f0`. The flow-conservation rows are equalities and
/// are never privatized.
pub fn synthesize_policy(m: &Cmdp, constraint: &[f64]) -> Result<Synthesis> {
    let (p, q) = (m.n_states, m.n_actions);
    let n = p * q;
    if constraint.len() != n {
        return Err(Error::Dimension(format!(
            "hazard row has length {}, expected {n}",
            constraint.len()
        )));
    }
    let flow = flow_matrix(m);
    let hazard = Matrix::from_fn(1, n, |_, j| constraint[j]);
    let r = m.reward_vector();
    let sol = lp::solve_with_equalities(&r, &hazard, &[m.f0], &flow, &m.mu);
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => return Err(Error::Infeasible),
        Status::Unbounded => unreachable!("occupancy mass is bounded by 1/(1-gamma)"),
        Status::IterationLimit => return Err(Error::IterationLimit),
    }
    let occupancy = sol.x.expect("optimal solutions carry a point");
    let policy = extract_policy(&occupancy, p, q);
    Ok(Synthesis {
        objective: dot(&r, &occupancy),
        occupancy,
        policy,
    })
}

/// Row-normalizes the occupancy; unvisited states act uniformly.
pub fn extract_policy(occupancy: &[f64], p: usize, q: usize) -> Policy {
    let mut pi = Matrix::zeros(p, q);
    for s in 0..p {
        let mass: f64 = occupancy[s * q..(s + 1) * q].iter().sum();
        for a in 0..q {
            pi[(s, a)] = if mass > 0.0 {
                occupancy[s * q + a] / mass
            } else {
                1.0 / q as f64
            };
        }
    }
    Policy { pi }
}

/// Solves `(I - gamma P_pi) v = r_pi`.
pub fn value_function(m: &Cmdp, policy: &Policy) -> Vec<f64> {
    let (p, q) = (m.n_states, m.n_actions);
    let mut lhs = DMatrix::<f64>::identity(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for s in 0..p {
        for a in 0..q {
            let w = policy.pi[(s, a)];
            if w == 0.0 {
                continue;
            }
            rhs[s] += w * m.rewards[(s, a)];
            for (y, &t) in m.transition(s, a).iter().enumerate() {
                lhs[(s, y)] -= m.gamma * w * t;
            }
        }
    }
    let v = lhs
        .lu()
        .solve(&rhs)
        .expect("I - gamma P is nonsingular for gamma < 1");
    v.iter().copied().collect()
}

/// Expected value under the initial distribution.
pub fn initial_value(m: &Cmdp, v: &[f64]) -> f64 {
    dot(&m.mu, v)
}

/// Percent decrease from `v_star` to `v_tilde`.
pub fn cost_of_privacy(v_star: f64, v_tilde: f64) -> Result<f64> {
    if v_star.is_nan() || v_star <= 0.0 {
        return Err(Error::UndefinedMetric(v_star));
    }
    Ok((v_star - v_tilde) / v_star * 100.0)
}

/// Loss bound for privatizing the hazard row alone. The max-norm occupancy
/// is replaced by its upper bound `1 / (1 - gamma)` (total occupancy mass),
/// since vertex enumeration over the occupancy polytope is out of reach.
pub fn hazard_cost_bound(m: &Cmdp, p: &PrivacyParams) -> Result<AccuracyReport> {
    let hc = hazard_constraint(m);
    let sys = hc.to_system()?;
    let lipschitz = norm2(&m.reward_vector());
    let x_bar = 1.0 / (1.0 - m.gamma);
    let hoffman = hoffman_constant(sys.a())?;
    let xi = xi_term(&sys, p)?;
    Ok(AccuracyReport::assemble(lipschitz, x_bar, hoffman, xi))
}
