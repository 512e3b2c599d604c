//! Indirect boundary-value solver on the extremal flow.
//!
//! Finds costate parameters whose backward extremal reaches a prescribed
//! state at a prescribed horizon, by damped Newton iteration with the
//! propagated sensitivity matrix as the exact Jacobian. The solver reports
//! optimality-filter verdicts but deliberately does not reject non-optimal
//! roots: root-finding on the necessary conditions alone cannot distinguish
//! them, which is exactly what the multistart comparison demonstrates.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::extremal::{propagate_extremal, propagate_raw, CostateParams};
use crate::model::{angle_difference, EngagementState};

/// Residual norm at which Newton declares convergence.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 60;

/// Sentinel residual reported when propagation diverges at an iterate.
const DIVERGED_RESIDUAL: f64 = 1e9;

#[derive(Debug, Clone)]
pub struct ShootingProblem {
    /// Canonical initial state the extremal must reach (backward) at the horizon.
    pub target_state: EngagementState,
    pub horizon: f64,
    pub initial_guess: CostateParams,
    pub integrator_step: f64,
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl ShootingProblem {
    pub fn new(target_state: EngagementState, horizon: f64) -> Self {
        Self {
            target_state,
            horizon,
            initial_guess: CostateParams::new(0.0, 0.0, 0.0),
            integrator_step: crate::extremal::DEFAULT_STEP,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_guess(mut self, guess: CostateParams) -> Self {
        self.initial_guess = guess;
        self
    }
}

/// Boundary residual of one candidate `q`.
#[derive(Debug, Clone, Copy)]
pub struct ResidualEval {
    /// `(X(T) - x0, Y(T) - y0, wrap(Theta(T) - theta0))`.
    pub value: [f64; 3],
    pub diverged: bool,
}

impl ResidualEval {
    pub fn norm(&self) -> f64 {
        (self.value[0] * self.value[0]
            + self.value[1] * self.value[1]
            + self.value[2] * self.value[2])
            .sqrt()
    }
}

/// Evaluate the boundary residual; the heading component uses the shortest arc.
pub fn residual(q: &CostateParams, prob: &ShootingProblem) -> ResidualEval {
    match propagate_raw(q, prob.horizon, prob.integrator_step) {
        Ok(traj) => {
            let z = traj.terminal_state();
            ResidualEval {
                value: [
                    z[0] - prob.target_state.x,
                    z[1] - prob.target_state.y,
                    angle_difference(z[2], prob.target_state.theta),
                ],
                diverged: false,
            }
        }
        Err(_) => ResidualEval {
            value: [DIVERGED_RESIDUAL; 3],
            diverged: true,
        },
    }
}

/// Residual plus the exact Jacobian from the variational flow.
pub fn residual_and_jacobian(
    q: &CostateParams,
    prob: &ShootingProblem,
) -> (ResidualEval, Option<Matrix3<f64>>) {
    match propagate_raw(q, prob.horizon, prob.integrator_step) {
        Ok(traj) => {
            let z = traj.terminal_state();
            let eval = ResidualEval {
                value: [
                    z[0] - prob.target_state.x,
                    z[1] - prob.target_state.y,
                    angle_difference(z[2], prob.target_state.theta),
                ],
                diverged: false,
            };
            (eval, Some(traj.terminal_phi))
        }
        Err(_) => (
            ResidualEval {
                value: [DIVERGED_RESIDUAL; 3],
                diverged: true,
            },
            None,
        ),
    }
}

/// One converged (or best-effort) shooting result with audit data.
#[derive(Debug, Clone, Serialize)]
pub struct ShootingSolution {
    pub params: CostateParams,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    /// Residual norm after each Newton step, for convergence-rate audits.
    pub residual_history: Vec<f64>,
    /// Control effort of the recovered extremal.
    pub effort: f64,
    pub disconjugate: bool,
    pub colinear_free: bool,
}

/// Damped Newton iteration from `prob.initial_guess`.
pub fn solve(prob: &ShootingProblem) -> Result<ShootingSolution> {
    let mut q = prob.initial_guess;
    let (mut eval, mut jac) = residual_and_jacobian(&q, prob);
    let mut history = vec![eval.norm()];
    let mut iterations = 0;

    while iterations < prob.max_iterations && eval.norm() > prob.residual_tol {
        let Some(j) = jac else { break };
        let rhs = Vector3::new(-eval.value[0], -eval.value[1], -eval.value[2]);
        let Some(direction) = j.lu().solve(&rhs) else {
            break; // singular sensitivity: give up from this start
        };
        // Backtracking line search on the residual norm.
        let base_norm = eval.norm();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let candidate = CostateParams::new(
                q.p_x + alpha * direction[0],
                q.p_y + alpha * direction[1],
                q.c_0 + alpha * direction[2],
            );
            let trial = residual(&candidate, prob);
            if !trial.diverged && trial.norm() < base_norm {
                accepted = Some(candidate);
                break;
            }
            alpha *= 0.5;
        }
        let Some(next) = accepted else { break };
        q = next;
        let (e, j2) = residual_and_jacobian(&q, prob);
        eval = e;
        jac = j2;
        history.push(eval.norm());
        iterations += 1;
    }

    let converged = eval.norm() <= prob.residual_tol;
    // Final audit propagation with both filters.
    let (effort, disconjugate, colinear_free) =
        match propagate_extremal(&q, prob.horizon, prob.integrator_step) {
            Ok(traj) => (traj.effort(), traj.disconjugate, traj.colinear_free),
            Err(_) => (f64::INFINITY, false, false),
        };

    Ok(ShootingSolution {
        params: q,
        converged,
        iterations,
        residual_norm: eval.norm(),
        residual_history: history,
        effort,
        disconjugate,
        colinear_free,
    })
}

/// Multistart configuration: a coarse cubic grid of initial guesses.
#[derive(Debug, Clone, Copy)]
pub struct MultistartConfig {
    pub radius: f64,
    pub spacing: f64,
    /// Roots closer than this (max-norm in `q`) are clustered together.
    pub cluster_tol: f64,
}

impl Default for MultistartConfig {
    fn default() -> Self {
        Self {
            radius: 8.0,
            spacing: 2.0,
            cluster_tol: 1e-4,
        }
    }
}

/// Run Newton from every grid start, cluster converged roots, and return the
/// distinct extremals sorted by effort.
pub fn multistart(prob: &ShootingProblem, cfg: &MultistartConfig) -> Result<Vec<ShootingSolution>> {
    let mut axis = Vec::new();
    let mut v = -cfg.radius;
    while v <= cfg.radius + 1e-9 {
        axis.push(v);
        v += cfg.spacing;
    }
    let mut starts = Vec::with_capacity(axis.len().pow(3));
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                starts.push(CostateParams::new(a, b, c));
            }
        }
    }

    let mut solutions: Vec<ShootingSolution> = starts
        .into_par_iter()
        .filter_map(|start| {
            let sub = ShootingProblem {
                initial_guess: start,
                ..prob.clone()
            };
            solve(&sub).ok().filter(|sol| sol.converged)
        })
        .collect();

    // Deterministic order before clustering.
    solutions.sort_by(|a, b| {
        a.effort
            .total_cmp(&b.effort)
            .then(a.params.p_x.total_cmp(&b.params.p_x))
            .then(a.params.p_y.total_cmp(&b.params.p_y))
            .then(a.params.c_0.total_cmp(&b.params.c_0))
    });
    let mut distinct: Vec<ShootingSolution> = Vec::new();
    for sol in solutions {
        let is_new = distinct.iter().all(|kept| {
            (kept.params.p_x - sol.params.p_x).abs() > cfg.cluster_tol
                || (kept.params.p_y - sol.params.p_y).abs() > cfg.cluster_tol
                || (kept.params.c_0 - sol.params.c_0).abs() > cfg.cluster_tol
        });
        if is_new {
            distinct.push(sol);
        }
    }
    Ok(distinct)
}
