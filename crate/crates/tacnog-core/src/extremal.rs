//! The parameterized backward extremal flow and its optimality filters.
//!
//! Extremals of the minimum-effort problem that end at the canonical state
//! `(0, 0, -pi/2)` are enumerated by a costate triple `q = (p_x, p_y, c_0)`:
//! integrating the backward system
//!
//! ```text
//! X' = -cos(Theta)
//! Y' = -sin(Theta)
//! Theta' = -(p_x Y - p_y X + c_0)
//! ```
//!
//! from `(0, 0, -pi/2)` traces the extremal in reverse time, with the
//! extremal control recovered algebraically as `U = p_x Y - p_y X + c_0`.
//! Alongside the state we integrate the 3x3 sensitivity `Phi = dZ/dq`; its
//! determinant `delta(t, q)` drives the disconjugacy filter, and a geometric
//! scan over sampled velocity/chord directions drives the colinearity filter.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::model::{wrap_angle, EngagementState};

/// Default integrator step in canonical time units.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Relative near-zero band used by the disconjugacy filter.
pub const DEFAULT_DISCONJUGACY_TOL: f64 = 1e-9;

/// Below this absolute ceiling `delta` is considered identically zero.
///
/// The sensitivity determinant vanishes identically on the straight-line
/// family (`p_x = p_y = 0` leaves `dY/dq = 0` to first order), where in
/// floating point it shows up only as structured roundoff many orders of
/// magnitude under any genuine determinant value. Such trajectories carry no
/// conjugate-point information and are accepted.
pub const DEGENERATE_DELTA_FLOOR: f64 = 1e-18;

/// Costate parameters selecting one extremal: the constant position costates
/// and the integration constant of the heading costate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostateParams {
    pub p_x: f64,
    pub p_y: f64,
    pub c_0: f64,
}

impl CostateParams {
    pub fn new(p_x: f64, p_y: f64, c_0: f64) -> Self {
        Self { p_x, p_y, c_0 }
    }

    /// Extremal control at a position, `U = p_x y - p_y x + c_0`.
    pub fn control_at(&self, x: f64, y: f64) -> f64 {
        self.p_x * y - self.p_y * x + self.c_0
    }

    /// Norm of the position costate pair.
    pub fn p_norm(&self) -> f64 {
        self.p_x.hypot(self.p_y)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_x, self.p_y, self.c_0]
    }

    pub fn is_finite(&self) -> bool {
        self.p_x.is_finite() && self.p_y.is_finite() && self.c_0.is_finite()
    }
}

/// Right-hand side of the backward system at state `(X, Y, Theta)`.
pub fn backward_rhs(state: [f64; 3], q: &CostateParams) -> [f64; 3] {
    let (sin_t, cos_t) = state[2].sin_cos();
    [-cos_t, -sin_t, -q.control_at(state[0], state[1])]
}

/// Right-hand side of the variational system `Phi' = A Phi + B`, where
/// `A = d(backward_rhs)/dZ` and `B = d(backward_rhs)/dq`.
pub fn variational_rhs(state: [f64; 3], phi: &Matrix3<f64>, q: &CostateParams) -> Matrix3<f64> {
    let (sin_t, cos_t) = state[2].sin_cos();
    let mut out = Matrix3::zeros();
    for col in 0..3 {
        out[(0, col)] = sin_t * phi[(2, col)];
        out[(1, col)] = -cos_t * phi[(2, col)];
        out[(2, col)] = q.p_y * phi[(0, col)] - q.p_x * phi[(1, col)];
    }
    out[(2, 0)] += -state[1];
    out[(2, 1)] += state[0];
    out[(2, 2)] += -1.0;
    out
}

/// Hamiltonian along an extremal, `p_x cos(Theta) + p_y sin(Theta) + U^2/2`.
///
/// Constant along every propagated trajectory; its drift measures integrator
/// accuracy.
pub fn hamiltonian(state: [f64; 3], u: f64, q: &CostateParams) -> f64 {
    let (sin_t, cos_t) = state[2].sin_cos();
    q.p_x * cos_t + q.p_y * sin_t + 0.5 * u * u
}

/// One recorded point of a backward propagation.
#[derive(Debug, Clone, Copy)]
pub struct ExtremalSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub u: f64,
    pub delta: f64,
    pub hamiltonian: f64,
}

/// A propagated extremal: uniform samples of `(Z, U, delta, H)` plus the
/// terminal sensitivity matrix and both filter verdicts.
#[derive(Debug, Clone)]
pub struct ExtremalTrajectory {
    pub params: CostateParams,
    pub horizon: f64,
    /// Actual uniform step; the requested step is rounded so it divides the horizon.
    pub step: f64,
    pub samples: Vec<ExtremalSample>,
    /// `dZ/dq` at the final sample, used as an exact shooting Jacobian.
    pub terminal_phi: Matrix3<f64>,
    pub disconjugate: bool,
    pub colinear_free: bool,
}

impl ExtremalTrajectory {
    pub fn terminal_state(&self) -> [f64; 3] {
        let s = self.samples.last().expect("trajectory has samples");
        [s.x, s.y, s.theta]
    }

    pub fn terminal_control(&self) -> f64 {
        self.samples.last().expect("trajectory has samples").u
    }

    /// Control effort `integral of U^2/2`, by the trapezoidal rule.
    pub fn effort(&self) -> f64 {
        let mut acc = 0.0;
        for pair in self.samples.windows(2) {
            acc += 0.25 * (pair[0].u * pair[0].u + pair[1].u * pair[1].u) * (pair[1].t - pair[0].t);
        }
        acc
    }

    pub fn max_control(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.u.abs()))
    }

    /// Dump as CSV with header `t,X,Y,Theta,U,delta,H`, 12 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,X,Y,Theta,U,delta,H")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                s.t, s.x, s.y, s.theta, s.u, s.delta, s.hamiltonian
            )?;
        }
        Ok(())
    }
}

/// Augmented state layout: `[X, Y, Theta, Phi row-major]`.
type Augmented = [f64; 12];

fn augmented_rhs(y: &Augmented, q: &CostateParams) -> Augmented {
    let (sin_t, cos_t) = y[2].sin_cos();
    let u = q.control_at(y[0], y[1]);
    let mut d = [0.0; 12];
    d[0] = -cos_t;
    d[1] = -sin_t;
    d[2] = -u;
    // Phi' = A Phi + B with A = [[0,0,sin],[0,0,-cos],[p_y,-p_x,0]],
    // B = [[0,0,0],[0,0,0],[-Y,X,-1]].
    for col in 0..3 {
        let phi_x = y[3 + col];
        let phi_y = y[6 + col];
        let phi_t = y[9 + col];
        d[3 + col] = sin_t * phi_t;
        d[6 + col] = -cos_t * phi_t;
        d[9 + col] = q.p_y * phi_x - q.p_x * phi_y;
    }
    d[9] += -y[1];
    d[10] += y[0];
    d[11] += -1.0;
    d
}

fn rk4_step(y: &Augmented, h: f64, q: &CostateParams) -> Augmented {
    let k1 = augmented_rhs(y, q);
    let mut y2 = *y;
    for i in 0..12 {
        y2[i] = y[i] + 0.5 * h * k1[i];
    }
    let k2 = augmented_rhs(&y2, q);
    let mut y3 = *y;
    for i in 0..12 {
        y3[i] = y[i] + 0.5 * h * k2[i];
    }
    let k3 = augmented_rhs(&y3, q);
    let mut y4 = *y;
    for i in 0..12 {
        y4[i] = y[i] + h * k3[i];
    }
    let k4 = augmented_rhs(&y4, q);
    let mut next = *y;
    for i in 0..12 {
        next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    next
}

fn det3(y: &Augmented) -> f64 {
    let (a, b, c) = (y[3], y[4], y[5]);
    let (d, e, f) = (y[6], y[7], y[8]);
    let (g, h, i) = (y[9], y[10], y[11]);
    a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
}

fn phi_from(y: &Augmented) -> Matrix3<f64> {
    Matrix3::from_row_slice(&y[3..12])
}

/// Integrate the augmented backward system over `[0, horizon]` without
/// running the optimality filters.
pub fn propagate_raw(q: &CostateParams, horizon: f64, step: f64) -> Result<ExtremalTrajectory> {
    if !q.is_finite() {
        return Err(Error::InvalidConfig("costate parameters must be finite".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(step > 0.0 && step <= horizon) {
        return Err(Error::InvalidConfig(format!(
            "step must satisfy 0 < h <= horizon, got h = {step}, horizon = {horizon}"
        )));
    }
    let n = (horizon / step).round().max(1.0) as usize;
    let h = horizon / n as f64;

    let mut y: Augmented = [0.0; 12];
    y[2] = -std::f64::consts::FRAC_PI_2;

    let mut samples = Vec::with_capacity(n + 1);
    samples.push(ExtremalSample {
        t: 0.0,
        x: 0.0,
        y: 0.0,
        theta: -std::f64::consts::FRAC_PI_2,
        u: q.c_0,
        delta: 0.0,
        hamiltonian: hamiltonian([0.0, 0.0, -std::f64::consts::FRAC_PI_2], q.c_0, q),
    });

    for i in 0..n {
        y = rk4_step(&y, h, q);
        if !(y[0].is_finite() && y[1].is_finite() && y[2].is_finite()) {
            return Err(Error::PropagationDiverged {
                t: (i + 1) as f64 * h,
                p_x: q.p_x,
                p_y: q.p_y,
                c_0: q.c_0,
            });
        }
        let t = (i + 1) as f64 * h;
        let u = q.control_at(y[0], y[1]);
        samples.push(ExtremalSample {
            t,
            x: y[0],
            y: y[1],
            theta: y[2],
            u,
            delta: det3(&y),
            hamiltonian: hamiltonian([y[0], y[1], y[2]], u, q),
        });
    }

    Ok(ExtremalTrajectory {
        params: *q,
        horizon,
        step: h,
        samples,
        terminal_phi: phi_from(&y),
        disconjugate: false,
        colinear_free: false,
    })
}

/// Integrate the augmented backward system and record both filter verdicts
/// at their default tolerances.
pub fn propagate_extremal(q: &CostateParams, horizon: f64, step: f64) -> Result<ExtremalTrajectory> {
    let mut traj = propagate_raw(q, horizon, step)?;
    traj.disconjugate = check_disconjugacy(&traj, 10.0 * traj.step, DEFAULT_DISCONJUGACY_TOL);
    let (tol_angle, tol_chord) = default_colinearity_tolerances(&traj);
    traj.colinear_free = check_colinearity_free(&traj, tol_angle, tol_chord);
    Ok(traj)
}

/// Disconjugacy filter: `delta` must keep one sign, clear of a near-zero
/// band, on `[eps_t, horizon]`.
///
/// `delta(0) = 0` is structural (the sensitivity starts at zero) and grows
/// like a high power of `t`, so monitoring starts at `eps_t` and the band is
/// only armed once `delta` has first escaped it. Re-entering the band, or any
/// sign change between out-of-band samples, rejects the trajectory.
pub fn check_disconjugacy(traj: &ExtremalTrajectory, eps_t: f64, tol: f64) -> bool {
    let start = eps_t - 0.5 * traj.step;
    let monitored: Vec<f64> = traj
        .samples
        .iter()
        .filter(|s| s.t >= start)
        .map(|s| s.delta)
        .collect();
    if monitored.is_empty() {
        return true;
    }
    let dmax = monitored.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if dmax <= DEGENERATE_DELTA_FLOOR {
        return true;
    }
    let band = tol * dmax;
    let mut armed = false;
    let mut last_sign = 0i8;
    for d in monitored {
        if d.abs() <= band {
            if armed {
                return false;
            }
            continue;
        }
        let sign = if d > 0.0 { 1 } else { -1 };
        if last_sign != 0 && sign != last_sign {
            return false;
        }
        last_sign = sign;
        armed = true;
    }
    true
}

/// Tolerances for the colinearity scan, scaled to the per-step heading
/// variation `|Theta'| h = |U| h` so the discrete grid can actually resolve
/// zeros of the continuous condition.
pub fn default_colinearity_tolerances(traj: &ExtremalTrajectory) -> (f64, f64) {
    let band = traj.step * traj.max_control().max(1.0);
    (band, band)
}

/// Colinearity filter: search interior sample pairs whose velocity vectors
/// are parallel (mod pi, within `tol_angle`) and aligned with their chord
/// (within `tol_chord`). Such a pair brackets a sub-arc that can be mirrored
/// about the common tangent at equal cost but with a control corner, so the
/// extremal is not optimal; the trajectory is rejected (`false`).
///
/// The mirror construction needs the sub-arc to actually leave the common
/// tangent line. At finite resolution both band conditions also hold
/// trivially along a degenerate family hugging the pair diagonal (adjacent
/// samples, straight stretches, symmetric brackets of an inflection), where
/// the heading barely moves between the instants. Pairs whose sub-arc
/// heading excursion stays under ten tolerance bands are therefore skipped,
/// along with pairs closer than five steps.
pub fn check_colinearity_free(traj: &ExtremalTrajectory, tol_angle: f64, tol_chord: f64) -> bool {
    let n = traj.samples.len();
    if n < 7 {
        return true;
    }
    let excursion_floor = (10.0 * tol_angle).min(1.0);
    let chord_sq = tol_chord * tol_chord;

    let xs: Vec<f64> = traj.samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = traj.samples.iter().map(|s| s.y).collect();
    let thetas: Vec<f64> = traj.samples.iter().map(|s| s.theta).collect();
    let sin_t: Vec<f64> = thetas.iter().map(|t| t.sin()).collect();
    let cos_t: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();

    // Interior samples only: the condition concerns instants in (0, T).
    // Headings are stored unwrapped, so running extrema measure the true
    // excursion of the sub-arc. Samples are uniform, so the five-step time
    // gap is an index gap.
    for i in 1..n - 1 {
        let (xi, yi, theta_i) = (xs[i], ys[i], thetas[i]);
        let (si, ci) = (sin_t[i], cos_t[i]);
        let mut theta_max = theta_i;
        let mut theta_min = theta_i;
        for j in (i + 1)..n - 1 {
            let theta_j = thetas[j];
            theta_max = theta_max.max(theta_j);
            theta_min = theta_min.min(theta_j);
            if j - i < 5 {
                continue;
            }
            if (theta_max - theta_i).max(theta_i - theta_min) < excursion_floor {
                continue;
            }
            // Velocity vectors parallel mod pi: sin(Theta_i - Theta_j) ~ 0.
            let sin_diff = si * cos_t[j] - ci * sin_t[j];
            if sin_diff.abs() > tol_angle {
                continue;
            }
            // Chord parallel to the common velocity direction.
            let dx = xi - xs[j];
            let dy = yi - ys[j];
            let cross = dx * si - dy * ci;
            if cross * cross <= chord_sq * (dx * dx + dy * dy) {
                return false;
            }
        }
    }
    true
}

/// A forward (plant-time) trajectory of the unit-speed kinematics.
#[derive(Debug, Clone)]
pub struct ForwardTrajectory {
    /// `(t, [x, y, theta])` at uniform steps.
    pub samples: Vec<(f64, [f64; 3])>,
}

impl ForwardTrajectory {
    pub fn terminal_state(&self) -> [f64; 3] {
        self.samples.last().expect("non-empty trajectory").1
    }
}

/// Integrate `x' = cos(theta), y' = sin(theta), theta' = u(t)` from `z0`
/// over `[0, t_f]` with a fixed-step fourth-order scheme.
pub fn forward_simulate(
    z0: &EngagementState,
    control: impl Fn(f64) -> f64,
    t_f: f64,
    step: f64,
) -> Result<ForwardTrajectory> {
    if !(t_f > 0.0) || !(step > 0.0 && step <= t_f) {
        return Err(Error::InvalidConfig(format!(
            "forward simulation needs 0 < h <= t_f, got h = {step}, t_f = {t_f}"
        )));
    }
    let n = (t_f / step).round().max(1.0) as usize;
    let h = t_f / n as f64;
    let rhs = |t: f64, s: &[f64; 3]| -> [f64; 3] {
        let (sin_t, cos_t) = s[2].sin_cos();
        [cos_t, sin_t, control(t)]
    };
    let mut state = [z0.x, z0.y, z0.theta];
    let mut samples = Vec::with_capacity(n + 1);
    samples.push((0.0, state));
    for i in 0..n {
        let t = i as f64 * h;
        let k1 = rhs(t, &state);
        let s2 = add_scaled(&state, &k1, 0.5 * h);
        let k2 = rhs(t + 0.5 * h, &s2);
        let s3 = add_scaled(&state, &k2, 0.5 * h);
        let k3 = rhs(t + 0.5 * h, &s3);
        let s4 = add_scaled(&state, &k3, h);
        let k4 = rhs(t + h, &s4);
        for d in 0..3 {
            state[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        samples.push(((i + 1) as f64 * h, state));
    }
    Ok(ForwardTrajectory { samples })
}

fn add_scaled(base: &[f64; 3], dir: &[f64; 3], scale: f64) -> [f64; 3] {
    [
        base[0] + scale * dir[0],
        base[1] + scale * dir[1],
        base[2] + scale * dir[2],
    ]
}

/// Maximum deviation of the time-scaling covariance for one `q` and scale
/// factor `lambda`: propagating `q' = (p_x/l^2, p_y/l^2, c_0/l)` over
/// `[0, l T]` must reproduce the position-scaled, heading-preserved,
/// control-inverse-scaled trajectory of `q`.
pub fn scaling_covariance_deviation(
    q: &CostateParams,
    horizon: f64,
    step: f64,
    lambda: f64,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "scale factor must be positive, got {lambda}"
        )));
    }
    let base = propagate_raw(q, horizon, step)?;
    let scaled_q = CostateParams::new(
        q.p_x / (lambda * lambda),
        q.p_y / (lambda * lambda),
        q.c_0 / lambda,
    );
    let scaled = propagate_raw(&scaled_q, lambda * horizon, lambda * step)?;
    assert_eq!(base.samples.len(), scaled.samples.len());
    let mut worst = 0.0f64;
    for (b, s) in base.samples.iter().zip(&scaled.samples) {
        worst = worst
            .max((s.x - lambda * b.x).abs())
            .max((s.y - lambda * b.y).abs())
            .max(wrap_angle(s.theta - b.theta).abs())
            .max((lambda * s.u - b.u).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rk4_state_step(state: [f64; 3], h: f64, q: &CostateParams) -> [f64; 3] {
        let k1 = backward_rhs(state, q);
        let k2 = backward_rhs(add_scaled(&state, &k1, 0.5 * h), q);
        let k3 = backward_rhs(add_scaled(&state, &k2, 0.5 * h), q);
        let k4 = backward_rhs(add_scaled(&state, &k3, h), q);
        let mut out = state;
        for d in 0..3 {
            out[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        out
    }

    /// Propagate only the state from an arbitrary start, for oracle checks.
    fn flow_from(state: [f64; 3], q: &CostateParams, t: f64, h: f64) -> [f64; 3] {
        let n = (t / h).round().max(1.0) as usize;
        let h = t / n as f64;
        let mut s = state;
        for _ in 0..n {
            s = rk4_state_step(s, h, q);
        }
        s
    }

    #[test]
    fn backward_rhs_at_canonical_origin() {
        let z = [0.0, 0.0, -FRAC_PI_2];
        let d = backward_rhs(z, &CostateParams::new(0.0, 0.0, 0.0));
        assert_relative_eq!(d[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(d[1], 1.0);
        assert_relative_eq!(d[2], 0.0);

        let d = backward_rhs(z, &CostateParams::new(0.0, 0.0, 5.0));
        assert_relative_eq!(d[1], 1.0);
        assert_relative_eq!(d[2], -5.0);
    }

    #[test]
    fn backward_rhs_matches_flow_derivative() {
        // Central difference of the propagated flow in time.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let state = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-PI..PI),
            ];
            let q = CostateParams::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let eps = 1e-4;
            let fwd = flow_from(state, &q, eps, eps / 4.0);
            // Backward in time: integrate with negated step via reversed RHS.
            let mut back = state;
            for _ in 0..4 {
                back = rk4_state_step(back, -eps / 4.0, &q);
            }
            let rhs = backward_rhs(state, &q);
            for d in 0..3 {
                let fd = (fwd[d] - back[d]) / (2.0 * eps);
                assert!(
                    (fd - rhs[d]).abs() < 1e-6,
                    "component {d}: fd = {fd}, rhs = {}",
                    rhs[d]
                );
            }
        }
    }

    #[test]
    fn variational_rhs_at_zero_sensitivity_is_parameter_jacobian() {
        let z = [0.0, 0.0, -FRAC_PI_2];
        let phi = Matrix3::zeros();
        let out = variational_rhs(z, &phi, &CostateParams::new(1.0, -2.0, 3.0));
        for row in 0..2 {
            for col in 0..3 {
                assert_eq!(out[(row, col)], 0.0);
            }
        }
        assert_eq!(out[(2, 0)], 0.0);
        assert_eq!(out[(2, 1)], 0.0);
        assert_eq!(out[(2, 2)], -1.0);
    }

    #[test]
    fn straight_line_trajectory() {
        let q = CostateParams::new(0.0, 0.0, 0.0);
        let traj = propagate_extremal(&q, 1.5, DEFAULT_STEP).unwrap();
        let z = traj.terminal_state();
        assert_relative_eq!(z[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(z[1], 1.5, epsilon = 1e-12);
        assert_relative_eq!(z[2], -FRAC_PI_2);
        assert!(traj.samples.iter().all(|s| s.u == 0.0));
        assert_eq!(traj.effort(), 0.0);
        assert_eq!(traj.samples[0].delta, 0.0);
        assert!(traj.disconjugate, "straight line must pass disconjugacy");
        assert!(traj.colinear_free, "straight line must pass colinearity");
    }

    #[test]
    fn constant_turn_matches_closed_form() {
        // q = (0, 0, c0): Theta = -pi/2 - c0 t, circular arc of curvature c0.
        for &c0 in &[0.8, -1.7, 3.0] {
            let q = CostateParams::new(0.0, 0.0, c0);
            let traj = propagate_raw(&q, 1.5, DEFAULT_STEP).unwrap();
            for s in traj.samples.iter().step_by(100) {
                let theta_exact = -FRAC_PI_2 - c0 * s.t;
                let x_exact = (1.0 - (c0 * s.t).cos()) / c0;
                let y_exact = (c0 * s.t).sin() / c0;
                assert!((s.theta - theta_exact).abs() < 1e-8, "theta at t = {}", s.t);
                assert!((s.x - x_exact).abs() < 1e-8, "x at t = {}", s.t);
                assert!((s.y - y_exact).abs() < 1e-8, "y at t = {}", s.t);
                assert_relative_eq!(s.u, c0, epsilon = 1e-10);
            }
            // Effort of a constant turn: c0^2 T / 2.
            assert_relative_eq!(traj.effort(), 0.5 * c0 * c0 * 1.5, max_relative = 1e-6);
        }
    }

    #[test]
    fn theta_sensitivity_to_c0_is_minus_t_for_pure_turns() {
        let q = CostateParams::new(0.0, 0.0, 1.3);
        let traj = propagate_raw(&q, 1.5, DEFAULT_STEP).unwrap();
        // Recompute Phi at the terminal sample and check the (Theta, c0) entry.
        assert_relative_eq!(traj.terminal_phi[(2, 2)], -1.5, epsilon = 1e-12);
    }

    #[test]
    fn sensitivity_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let q = CostateParams::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            for &t in &[0.5, 1.0, 1.5] {
                let traj = propagate_raw(&q, t, DEFAULT_STEP).unwrap();
                let phi = traj.terminal_phi;
                let eps = 1e-6;
                for col in 0..3 {
                    let mut qp = q.as_array();
                    let mut qm = q.as_array();
                    qp[col] += eps;
                    qm[col] -= eps;
                    let zp = propagate_raw(
                        &CostateParams::new(qp[0], qp[1], qp[2]),
                        t,
                        DEFAULT_STEP,
                    )
                    .unwrap()
                    .terminal_state();
                    let zm = propagate_raw(
                        &CostateParams::new(qm[0], qm[1], qm[2]),
                        t,
                        DEFAULT_STEP,
                    )
                    .unwrap()
                    .terminal_state();
                    for row in 0..3 {
                        let fd = (zp[row] - zm[row]) / (2.0 * eps);
                        let got = phi[(row, col)];
                        let scale = fd.abs().max(1e-2);
                        assert!(
                            (got - fd).abs() <= 1e-4 * scale,
                            "Phi[{row},{col}] = {got} vs fd {fd} at t = {t}, q = {q:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn control_identity_and_hamiltonian_conservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        for _ in 0..10 {
            let q = CostateParams::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let traj = propagate_raw(&q, 1.5, DEFAULT_STEP).unwrap();
            let h0 = traj.samples[0].hamiltonian;
            let mean: f64 =
                traj.samples.iter().map(|s| s.hamiltonian).sum::<f64>() / traj.samples.len() as f64;
            let var: f64 = traj
                .samples
                .iter()
                .map(|s| (s.hamiltonian - mean).powi(2))
                .sum::<f64>()
                / traj.samples.len() as f64;
            assert!(
                var.sqrt() < 1e-8,
                "H drift too large for q = {q:?}: sigma = {}",
                var.sqrt()
            );
            assert!((traj.samples.last().unwrap().hamiltonian - h0).abs() < 1e-7);
            for s in &traj.samples {
                assert!((s.u - q.control_at(s.x, s.y)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn hamiltonian_spot_values() {
        let h = hamiltonian([0.0, 0.0, -FRAC_PI_2], 0.0, &CostateParams::new(0.0, 1.0, 0.0));
        assert_relative_eq!(h, -1.0);
        let h = hamiltonian([7.0, -2.0, 0.0], 2.0, &CostateParams::new(3.0, 0.0, 0.0));
        assert_relative_eq!(h, 5.0);
    }

    #[test]
    fn disconjugacy_accepts_straight_and_gentle_turns() {
        for q in [
            CostateParams::new(0.0, 0.0, 0.0),
            CostateParams::new(0.0, 0.0, 1.0),
            CostateParams::new(0.5, -0.5, 0.5),
        ] {
            let traj = propagate_raw(&q, 1.5, DEFAULT_STEP).unwrap();
            assert!(
                check_disconjugacy(&traj, 10.0 * traj.step, DEFAULT_DISCONJUGACY_TOL),
                "q = {q:?} should be disconjugate"
            );
        }
    }

    #[test]
    fn colinearity_rejects_full_loops() {
        // |c0| T > 2 pi closes a loop; the closure pair is colinear.
        for &c0 in &[4.5, 5.0, -6.0, 8.0, 10.0] {
            let q = CostateParams::new(0.0, 0.0, c0);
            let traj = propagate_raw(&q, 1.5, DEFAULT_STEP).unwrap();
            let (ta, tc) = default_colinearity_tolerances(&traj);
            assert!(
                !check_colinearity_free(&traj, ta, tc),
                "full loop c0 = {c0} must be flagged"
            );
        }
        // Just under a full loop: no qualifying pair.
        let q = CostateParams::new(0.0, 0.0, 4.0);
        let traj = propagate_raw(&q, 1.5, DEFAULT_STEP).unwrap();
        let (ta, tc) = default_colinearity_tolerances(&traj);
        assert!(check_colinearity_free(&traj, ta, tc));
    }

    #[test]
    fn colinearity_flags_survive_refinement() {
        // A flag must reflect the continuous condition, not the grid.
        for &c0 in &[4.5, 7.0] {
            let q = CostateParams::new(0.0, 0.0, c0);
            let fine = propagate_raw(&q, 1.5, DEFAULT_STEP / 10.0).unwrap();
            let (ta, tc) = default_colinearity_tolerances(&fine);
            assert!(
                !check_colinearity_free(&fine, ta, tc),
                "refined check must still flag c0 = {c0}"
            );
        }
    }

    #[test]
    fn inflectional_extremals_are_not_falsely_flagged() {
        // These cross U = 0 in the interior; the degenerate near-diagonal
        // band around the inflection must not count as a colinear pair.
        for q in [
            CostateParams::new(-3.0, 2.0, 1.5),
            CostateParams::new(1.0, -1.0, -0.3),
            CostateParams::new(3.0, 0.5, -2.0),
            CostateParams::new(-2.0, -2.0, 1.0),
        ] {
            let traj = propagate_raw(&q, 1.5, DEFAULT_STEP).unwrap();
            let crosses = traj.samples.windows(2).any(|w| w[0].u * w[1].u < 0.0);
            assert!(crosses, "test premise: q = {q:?} has a control zero");
            let (ta, tc) = default_colinearity_tolerances(&traj);
            assert!(
                check_colinearity_free(&traj, ta, tc),
                "inflectional extremal q = {q:?} wrongly flagged"
            );
        }
    }

    #[test]
    fn forward_straight_descent_reaches_origin() {
        let z0 = EngagementState::new(0.0, 2.0, -FRAC_PI_2);
        let traj = forward_simulate(&z0, |_| 0.0, 2.0, DEFAULT_STEP).unwrap();
        let z = traj.terminal_state();
        assert!((z[0] - 0.0).abs() < 1e-12);
        assert!((z[1] - 0.0).abs() < 1e-9);
        assert_relative_eq!(z[2], -FRAC_PI_2);
    }

    #[test]
    fn forward_half_circle() {
        // Unit left turn from (1, 0) heading north: half the unit circle
        // about the origin, ending at (-1, 0) heading south.
        let z0 = EngagementState::new(1.0, 0.0, FRAC_PI_2);
        let traj = forward_simulate(&z0, |_| 1.0, PI, DEFAULT_STEP).unwrap();
        let z = traj.terminal_state();
        assert!((z[0] + 1.0).abs() < 1e-8);
        assert!((z[1]).abs() < 1e-8);
        assert!(wrap_angle(z[2] + FRAC_PI_2).abs() < 1e-8);
    }

    #[test]
    fn backward_then_forward_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        for _ in 0..5 {
            let q = CostateParams::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let horizon = 1.5;
            // Half-step sampling so forward RK4 stage times land on samples.
            let fine = propagate_raw(&q, horizon, DEFAULT_STEP / 2.0).unwrap();
            let half = fine.step;
            let controls: Vec<f64> = fine.samples.iter().map(|s| s.u).collect();
            let z_t = fine.terminal_state();
            let n = controls.len();
            let control = |t: f64| -> f64 {
                // u(t) = U(T - t) on the half-step grid.
                let idx = ((horizon - t) / half).round() as isize;
                controls[idx.clamp(0, n as isize - 1) as usize]
            };
            let fwd = forward_simulate(
                &EngagementState::new(z_t[0], z_t[1], z_t[2]),
                control,
                horizon,
                DEFAULT_STEP,
            )
            .unwrap();
            let end = fwd.terminal_state();
            assert!(
                end[0].abs() < 1e-6 && end[1].abs() < 1e-6,
                "position round trip failed for q = {q:?}: ({}, {})",
                end[0],
                end[1]
            );
            assert!(wrap_angle(end[2] + FRAC_PI_2).abs() < 1e-6);
        }
    }

    #[test]
    fn scaling_covariance_holds_for_power_of_two_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..10 {
            let q = CostateParams::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            for &lambda in &[0.25, 0.5, 2.0, 4.0] {
                let dev = scaling_covariance_deviation(&q, 1.5, DEFAULT_STEP, lambda).unwrap();
                assert!(
                    dev <= 1e-8,
                    "covariance violated: q = {q:?}, lambda = {lambda}, dev = {dev}"
                );
            }
        }
    }

    #[test]
    fn trajectory_csv_has_expected_shape() {
        let q = CostateParams::new(0.0, 0.0, 1.0);
        let traj = propagate_extremal(&q, 0.1, 0.01).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,X,Y,Theta,U,delta,H");
        assert_eq!(lines.count(), traj.samples.len());
    }

    #[test]
    fn rejects_bad_propagation_arguments() {
        let q = CostateParams::new(0.0, 0.0, 0.0);
        assert!(propagate_raw(&q, 0.0, 1e-3).is_err());
        assert!(propagate_raw(&q, 1.0, 0.0).is_err());
        assert!(propagate_raw(&q, 1.0, 2.0).is_err());
        assert!(propagate_raw(&CostateParams::new(f64::NAN, 0.0, 0.0), 1.0, 1e-3).is_err());
    }
}
