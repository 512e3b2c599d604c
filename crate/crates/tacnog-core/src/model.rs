//! Engagement frames, units, and the canonical problem transform.
//!
//! Every guidance computation in this crate runs in a canonical frame: target
//! at the origin, final heading exactly `-pi/2`, unit speed. This module owns
//! the transform between dimensional engagements (metres, seconds, m/s) and
//! that frame, plus the scenario file format.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity used to convert `a_max_g` scenario entries to m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.8;

/// Final heading of the canonical problem.
pub const CANONICAL_FINAL_HEADING: f64 = -FRAC_PI_2;

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Shortest-arc difference `a - b`, wrapped to `(-pi, pi]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// Pursuer pose: planar position plus heading measured counterclockwise from +x.
///
/// The heading is stored wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl EngagementState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance_to_origin(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Rotate a state about the origin by `psi`; the heading shifts by the same angle.
///
/// Trajectories of the unit-speed kinematics map to trajectories under this
/// rotation with the control left unchanged.
pub fn rotate_state(state: &EngagementState, psi: f64) -> EngagementState {
    let (sin_psi, cos_psi) = psi.sin_cos();
    EngagementState::new(
        state.x * cos_psi - state.y * sin_psi,
        state.x * sin_psi + state.y * cos_psi,
        state.theta + psi,
    )
}

/// A fully dimensional engagement: SI units, arbitrary target position and
/// impact heading.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalScenario {
    pub pursuer0: EngagementState,
    /// Target position in metres.
    pub target: (f64, f64),
    /// Pursuer speed in m/s, constant.
    pub speed: f64,
    /// Prescribed impact time in seconds.
    pub impact_time: f64,
    /// Prescribed impact heading in radians.
    pub impact_angle: f64,
    /// Lateral acceleration bound in m/s^2; `f64::INFINITY` disables saturation.
    pub a_max: f64,
}

impl DimensionalScenario {
    pub fn validate(&self) -> Result<()> {
        if !self.pursuer0.is_finite() {
            return Err(Error::InvalidScenario(
                "pursuer state must be finite".into(),
            ));
        }
        if !(self.target.0.is_finite() && self.target.1.is_finite()) {
            return Err(Error::InvalidScenario(
                "target position must be finite".into(),
            ));
        }
        if !(self.speed > 0.0) || !self.speed.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "speed must be positive and finite, got {}",
                self.speed
            )));
        }
        if !(self.impact_time > 0.0) || !self.impact_time.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "impact time must be positive and finite, got {}",
                self.impact_time
            )));
        }
        if !(self.a_max > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "acceleration bound must be positive, got {}",
                self.a_max
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ScenarioFile = serde_json::from_str(&text)?;
        let sc = file.into_scenario();
        sc.validate()?;
        Ok(sc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ScenarioFile::from_scenario(self);
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// The rigid transform (plus speed scaling) that carried a dimensional
/// scenario into the canonical frame. Kept so results can be mapped back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTransform {
    /// Target position subtracted before rotating, in metres.
    pub translation: (f64, f64),
    /// Rotation applied after translating, in radians.
    pub rotation: f64,
    /// Speed used to scale positions to unit-speed coordinates.
    pub speed: f64,
}

impl FrameTransform {
    /// Dimensional pose -> canonical pose.
    pub fn to_canonical(&self, state: &EngagementState) -> EngagementState {
        let shifted = EngagementState::new(
            state.x - self.translation.0,
            state.y - self.translation.1,
            state.theta,
        );
        let rotated = rotate_state(&shifted, self.rotation);
        EngagementState::new(rotated.x / self.speed, rotated.y / self.speed, rotated.theta)
    }

    /// Canonical pose -> dimensional pose.
    pub fn to_dimensional(&self, state: &EngagementState) -> EngagementState {
        let scaled = EngagementState::new(state.x * self.speed, state.y * self.speed, state.theta);
        let rotated = rotate_state(&scaled, -self.rotation);
        EngagementState::new(
            rotated.x + self.translation.0,
            rotated.y + self.translation.1,
            rotated.theta,
        )
    }
}

/// A canonical engagement: target at the origin, final heading `-pi/2`,
/// unit speed. Positions are dimensionless; the horizon keeps the original
/// time scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalScenario {
    pub pursuer0: EngagementState,
    pub horizon: f64,
    pub transform: FrameTransform,
}

/// Translate, rotate, and speed-scale a dimensional scenario into the
/// canonical frame.
///
/// Time is left unchanged, so the canonical control is `u / V` and the
/// canonical effort is `J / V^2`.
pub fn canonicalize(sc: &DimensionalScenario) -> Result<CanonicalScenario> {
    sc.validate()?;
    let transform = FrameTransform {
        translation: sc.target,
        rotation: wrap_angle(CANONICAL_FINAL_HEADING - sc.impact_angle),
        speed: sc.speed,
    };
    Ok(CanonicalScenario {
        pursuer0: transform.to_canonical(&sc.pursuer0),
        horizon: sc.impact_time,
        transform,
    })
}

/// Map a canonical control value back to a dimensional lateral acceleration.
pub fn dimensionalize_control(u_canonical: f64, speed: f64) -> f64 {
    speed * u_canonical
}

/// On-disk scenario schema. Angles are degrees in files, radians internally.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    pursuer: PursuerEntry,
    target: TargetEntry,
    speed_mps: f64,
    impact_time_s: f64,
    impact_angle_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    a_max_g: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PursuerEntry {
    x_m: f64,
    y_m: f64,
    theta_deg: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    x_m: f64,
    y_m: f64,
}

impl ScenarioFile {
    fn into_scenario(self) -> DimensionalScenario {
        DimensionalScenario {
            pursuer0: EngagementState::new(
                self.pursuer.x_m,
                self.pursuer.y_m,
                self.pursuer.theta_deg.to_radians(),
            ),
            target: (self.target.x_m, self.target.y_m),
            speed: self.speed_mps,
            impact_time: self.impact_time_s,
            impact_angle: wrap_angle(self.impact_angle_deg.to_radians()),
            a_max: self
                .a_max_g
                .map(|g| g * STANDARD_GRAVITY)
                .unwrap_or(f64::INFINITY),
        }
    }

    fn from_scenario(sc: &DimensionalScenario) -> Self {
        Self {
            pursuer: PursuerEntry {
                x_m: sc.pursuer0.x,
                y_m: sc.pursuer0.y,
                theta_deg: sc.pursuer0.theta.to_degrees(),
            },
            target: TargetEntry {
                x_m: sc.target.0,
                y_m: sc.target.1,
            },
            speed_mps: sc.speed,
            impact_time_s: sc.impact_time,
            impact_angle_deg: sc.impact_angle.to_degrees(),
            a_max_g: if sc.a_max.is_finite() {
                Some(sc.a_max / STANDARD_GRAVITY)
            } else {
                None
            },
        }
    }
}
