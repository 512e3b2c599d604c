//! Closed-loop engagement simulator.
//!
//! Each guidance step maps the dimensional plant state into the canonical
//! frame, queries a policy for the canonical control at the current
//! time-to-go, scales it back to a lateral acceleration, saturates, and holds
//! the command while the plant integrates at a finer step. Near the end of
//! the flight the last command is held: the scaling wrapper's `T/t_g` factor
//! diverges as the time-to-go vanishes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extremal::CostateParams;
use crate::model::{
    angle_difference, canonicalize, dimensionalize_control, DimensionalScenario, EngagementState,
};
use crate::policy::PolicyNetwork;
use crate::shooting::{solve, ShootingProblem};

/// Guidance steps per flight with the default zero-order hold.
pub const DEFAULT_GUIDANCE_STEPS: usize = 100;
/// Plant integration substeps per guidance step.
pub const DEFAULT_PLANT_SUBSTEPS: usize = 10;
/// Command-hold threshold, in guidance steps of remaining time-to-go.
pub const TERMINAL_HOLD_STEPS: f64 = 10.0;

/// A feedback policy in canonical units: time-to-go and canonical state in,
/// canonical control out.
pub trait GuidancePolicy {
    fn canonical_control(&mut self, time_to_go: f64, state: &EngagementState) -> Result<f64>;
}

impl GuidancePolicy for PolicyNetwork {
    fn canonical_control(&mut self, time_to_go: f64, state: &EngagementState) -> Result<f64> {
        self.feedback_control(time_to_go, state)
    }
}

impl<F> GuidancePolicy for F
where
    F: FnMut(f64, &EngagementState) -> Result<f64>,
{
    fn canonical_control(&mut self, time_to_go: f64, state: &EngagementState) -> Result<f64> {
        self(time_to_go, state)
    }
}

/// Exact feedback: re-solve the boundary-value problem at every query.
///
/// The query state is first mapped to the reference horizon through the
/// time-scaling invariance, so every solve integrates over the same fixed
/// span no matter how large the time-to-go is. The recovered costates are
/// mapped back to the unscaled frame, where they stay constant along one
/// extremal and so warm-start the next query.
pub struct OraclePolicy {
    pub reference_horizon: f64,
    pub integrator_step: f64,
    warm_start: Option<CostateParams>,
}

impl OraclePolicy {
    pub fn new(reference_horizon: f64, integrator_step: f64) -> Self {
        Self {
            reference_horizon,
            integrator_step,
            warm_start: None,
        }
    }
}

impl GuidancePolicy for OraclePolicy {
    fn canonical_control(&mut self, time_to_go: f64, state: &EngagementState) -> Result<f64> {
        if !(time_to_go > 0.0) {
            return Err(Error::ExpiredHorizon(time_to_go));
        }
        let lambda = self.reference_horizon / time_to_go;
        let scaled_state = EngagementState::new(lambda * state.x, lambda * state.y, state.theta);
        let mut prob = ShootingProblem::new(scaled_state, self.reference_horizon);
        prob.integrator_step = self.integrator_step;
        if let Some(q) = self.warm_start {
            // Unscaled costates map to the reference frame by the inverse
            // of the covariance scaling.
            prob = prob.with_guess(CostateParams::new(
                q.p_x / (lambda * lambda),
                q.p_y / (lambda * lambda),
                q.c_0 / lambda,
            ));
        }
        let sol = solve(&prob)?;
        if !sol.converged {
            return Err(Error::PolicyFailure {
                t: time_to_go,
                message: format!(
                    "shooting failed to converge (residual {:.3e})",
                    sol.residual_norm
                ),
            });
        }
        let unscaled = CostateParams::new(
            sol.params.p_x * lambda * lambda,
            sol.params.p_y * lambda * lambda,
            sol.params.c_0 * lambda,
        );
        self.warm_start = Some(unscaled);
        Ok(unscaled.control_at(state.x, state.y))
    }
}

/// One row of the closed-loop trace, in dimensional units.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub u_cmd: f64,
    pub u_applied: f64,
}

/// Closed-loop run outcome and terminal scores.
#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub trace: Vec<TraceSample>,
    /// Minimum distance to the target over the final guidance interval [m].
    pub miss_distance: f64,
    /// Time of closest approach minus the prescribed impact time [s].
    pub impact_time_error: f64,
    /// Shortest-arc heading error at the impact time [rad].
    pub impact_angle_error: f64,
    /// Trapezoidal integral of `u_applied^2 / 2` [m^2/s^3].
    pub control_effort: f64,
    /// Fraction of guidance commands clipped by the acceleration bound.
    pub saturation_fraction: f64,
}

/// A run that had to stop early, with whatever trace was accumulated.
#[derive(Debug)]
pub struct AbortedRun {
    pub reason: Error,
    pub partial_trace: Vec<TraceSample>,
}

/// Trapezoidal `integral of u^2/2` over `(t, u)` samples.
pub fn control_effort(samples: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for pair in samples.windows(2) {
        let (t0, u0) = pair[0];
        let (t1, u1) = pair[1];
        acc += 0.25 * (u0 * u0 + u1 * u1) * (t1 - t0);
    }
    acc
}

fn plant_rk4(state: [f64; 3], speed: f64, u: f64, h: f64) -> [f64; 3] {
    let rhs = |s: &[f64; 3]| -> [f64; 3] {
        let (sin_t, cos_t) = s[2].sin_cos();
        [speed * cos_t, speed * sin_t, u / speed]
    };
    let k1 = rhs(&state);
    let s2 = [
        state[0] + 0.5 * h * k1[0],
        state[1] + 0.5 * h * k1[1],
        state[2] + 0.5 * h * k1[2],
    ];
    let k2 = rhs(&s2);
    let s3 = [
        state[0] + 0.5 * h * k2[0],
        state[1] + 0.5 * h * k2[1],
        state[2] + 0.5 * h * k2[2],
    ];
    let k3 = rhs(&s3);
    let s4 = [
        state[0] + h * k3[0],
        state[1] + h * k3[1],
        state[2] + h * k3[2],
    ];
    let k4 = rhs(&s4);
    [
        state[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        state[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        state[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

/// Run a closed-loop engagement with guidance step `dt` and plant step `h`.
///
/// On a mid-run policy failure the accumulated trace is returned inside
/// [`AbortedRun`].
pub fn run_closed_loop(
    sc: &DimensionalScenario,
    policy: &mut dyn GuidancePolicy,
    dt: f64,
    h: f64,
) -> std::result::Result<SimResult, Box<AbortedRun>> {
    let canonical = match canonicalize(sc) {
        Ok(c) => c,
        Err(e) => {
            return Err(Box::new(AbortedRun {
                reason: e,
                partial_trace: Vec::new(),
            }))
        }
    };
    if !(dt >= h && h > 0.0) {
        return Err(Box::new(AbortedRun {
            reason: Error::InvalidConfig(format!(
                "guidance step and plant step must satisfy dt >= h > 0, got dt = {dt}, h = {h}"
            )),
            partial_trace: Vec::new(),
        }));
    }

    let t_f = sc.impact_time;
    let n_guidance = (t_f / dt).round().max(1.0) as usize;
    let dt = t_f / n_guidance as f64;
    let substeps = (dt / h).round().max(1.0) as usize;
    let h = dt / substeps as f64;
    let t_g_min = TERMINAL_HOLD_STEPS * dt;

    let mut state = [sc.pursuer0.x, sc.pursuer0.y, sc.pursuer0.theta];
    let mut trace: Vec<TraceSample> = Vec::with_capacity(n_guidance * substeps + 1);
    let mut u_cmd = 0.0;
    let mut saturated = 0usize;

    for step in 0..n_guidance {
        let t = step as f64 * dt;
        let t_g = t_f - t;
        if t_g >= t_g_min || step == 0 {
            let canonical_state =
                canonical
                    .transform
                    .to_canonical(&EngagementState::new(state[0], state[1], state[2]));
            match policy.canonical_control(t_g, &canonical_state) {
                Ok(u_tilde) => {
                    u_cmd = dimensionalize_control(u_tilde, sc.speed);
                }
                Err(reason) => {
                    return Err(Box::new(AbortedRun {
                        reason: Error::PolicyFailure {
                            t,
                            message: reason.to_string(),
                        },
                        partial_trace: trace,
                    }))
                }
            }
        }
        let u_applied = u_cmd.clamp(-sc.a_max, sc.a_max);
        if u_applied != u_cmd {
            saturated += 1;
        }
        for sub in 0..substeps {
            trace.push(TraceSample {
                t: t + sub as f64 * h,
                x: state[0],
                y: state[1],
                theta: state[2],
                u_cmd,
                u_applied,
            });
            state = plant_rk4(state, sc.speed, u_applied, h);
        }
    }
    trace.push(TraceSample {
        t: t_f,
        x: state[0],
        y: state[1],
        theta: state[2],
        u_cmd,
        u_applied: u_cmd.clamp(-sc.a_max, sc.a_max),
    });

    // Miss distance: closest approach over the final guidance interval.
    let final_window = t_f - dt - 0.5 * h;
    let mut miss = f64::INFINITY;
    let mut t_miss = t_f;
    for s in trace.iter().filter(|s| s.t >= final_window) {
        let d = (s.x - sc.target.0).hypot(s.y - sc.target.1);
        if d < miss {
            miss = d;
            t_miss = s.t;
        }
    }

    let effort = control_effort(
        &trace
            .iter()
            .map(|s| (s.t, s.u_applied))
            .collect::<Vec<_>>(),
    );

    Ok(SimResult {
        miss_distance: miss,
        impact_time_error: t_miss - t_f,
        impact_angle_error: angle_difference(state[2], sc.impact_angle),
        control_effort: effort,
        saturation_fraction: saturated as f64 / n_guidance as f64,
        trace,
    })
}

/// Default closed-loop discretization for a scenario: guidance step
/// `t_f / 100`, plant step a tenth of that.
pub fn default_steps(sc: &DimensionalScenario) -> (f64, f64) {
    let dt = sc.impact_time / DEFAULT_GUIDANCE_STEPS as f64;
    (dt, dt / DEFAULT_PLANT_SUBSTEPS as f64)
}

/// JSON summary of a run (trace omitted; see [`write_trace_csv`]).
#[derive(Debug, Serialize)]
pub struct SimSummary {
    pub miss_distance: f64,
    pub impact_time_error: f64,
    pub impact_angle_error: f64,
    pub impact_angle_error_deg: f64,
    pub control_effort: f64,
    pub saturation_fraction: f64,
    pub trace_samples: usize,
}

impl SimSummary {
    pub fn from_result(result: &SimResult) -> Self {
        Self {
            miss_distance: result.miss_distance,
            impact_time_error: result.impact_time_error,
            impact_angle_error: result.impact_angle_error,
            impact_angle_error_deg: result.impact_angle_error.to_degrees(),
            control_effort: result.control_effort,
            saturation_fraction: result.saturation_fraction,
            trace_samples: result.trace.len(),
        }
    }
}

/// Write the trace as CSV with header `t,x,y,theta,u_cmd,u_app`.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceSample]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "t,x,y,theta,u_cmd,u_app")?;
    for s in trace {
        writeln!(
            out,
            "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            s.t, s.x, s.y, s.theta, s.u_cmd, s.u_applied
        )?;
    }
    out.flush()?;
    Ok(())
}
