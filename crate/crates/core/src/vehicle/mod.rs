//! Stochastic 3-DOF vehicle with LuGre tires on a curved road, expressed in
//! road coordinates.

mod dynamics;
mod params;
mod road;
mod tire;

pub use dynamics::{derivative, IntegrationScheme, Integrator, StepOutcome, StepStatus, VehicleWorld};
pub use params::VehicleParams;
pub use road::{RoadProfile, RoadSegment, WorldPose};
pub use tire::{lugre_forces, slip_quantities, SlipQuantities, TireForces};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FL: usize = 0;
pub const FR: usize = 1;
pub const RL: usize = 2;
pub const RR: usize = 3;

/// Number of state components.
pub const STATE_DIM: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid road profile: {0}")]
    InvalidRoad(String),
}

/// Full vehicle state.
///
/// The same struct carries time derivatives when returned from
/// [`derivative`]; each field then holds the rate of the named quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleState {
    /// Longitudinal velocity (m/s).
    pub vx: f64,
    /// Lateral velocity (m/s).
    pub vy: f64,
    /// Yaw rate (rad/s).
    pub yaw_rate: f64,
    /// Steering angle (rad).
    pub steer: f64,
    /// Wheel angular velocities `[fl, fr, rl, rr]` (rad/s).
    pub omega: [f64; 4],
    /// Drive (positive) or brake (negative) torque (N·m).
    pub torque: f64,
    /// Distance travelled along the road (m).
    pub s: f64,
    /// Lateral error from the centreline, positive to the left (m).
    pub lateral_error: f64,
    /// Heading error relative to the road (rad).
    pub heading_error: f64,
}

impl VehicleState {
    /// Straight-line rolling at speed `vx` on the centreline with free-rolling wheels.
    pub fn cruising(vx: f64, params: &VehicleParams) -> Self {
        let w = vx / params.wheel_radius;
        Self {
            vx,
            vy: 0.0,
            yaw_rate: 0.0,
            steer: 0.0,
            omega: [w; 4],
            torque: 0.0,
            s: 0.0,
            lateral_error: 0.0,
            heading_error: 0.0,
        }
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.vx,
            self.vy,
            self.yaw_rate,
            self.steer,
            self.omega[0],
            self.omega[1],
            self.omega[2],
            self.omega[3],
            self.torque,
            self.s,
            self.lateral_error,
            self.heading_error,
        ]
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        Self {
            vx: a[0],
            vy: a[1],
            yaw_rate: a[2],
            steer: a[3],
            omega: [a[4], a[5], a[6], a[7]],
            torque: a[8],
            s: a[9],
            lateral_error: a[10],
            heading_error: a[11],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Actuator command: rates of change of steering angle and drive torque.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlInput {
    /// Steering rate Δδ (rad/s).
    pub steer_rate: f64,
    /// Torque rate Δτ_e (N·m/s).
    pub torque_rate: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { steer_rate: 0.0, torque_rate: 0.0 };

    pub fn new(steer_rate: f64, torque_rate: f64) -> Self {
        Self { steer_rate, torque_rate }
    }
}

/// Symmetric bounds on the actuator rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorBounds {
    pub max_steer_rate: f64,
    pub max_torque_rate: f64,
}

impl Default for ActuatorBounds {
    fn default() -> Self {
        Self { max_steer_rate: 0.5, max_torque_rate: 2000.0 }
    }
}

impl ActuatorBounds {
    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            steer_rate: u.steer_rate.clamp(-self.max_steer_rate, self.max_steer_rate),
            torque_rate: u.torque_rate.clamp(-self.max_torque_rate, self.max_torque_rate),
        }
    }

    pub fn contains(&self, u: &ControlInput) -> bool {
        u.steer_rate.abs() <= self.max_steer_rate && u.torque_rate.abs() <= self.max_torque_rate
    }

    /// Evenly spaced grid of `steer_levels × torque_levels` inputs spanning the bounds.
    pub fn grid(&self, steer_levels: usize, torque_levels: usize) -> Vec<ControlInput> {
        let levels = |n: usize, max: f64| -> Vec<f64> {
            if n <= 1 {
                return vec![0.0];
            }
            (0..n).map(|i| -max + 2.0 * max * i as f64 / (n - 1) as f64).collect()
        };
        let steer = levels(steer_levels, self.max_steer_rate);
        let torque = levels(torque_levels, self.max_torque_rate);
        steer.iter().flat_map(|&d| torque.iter().map(move |&t| ControlInput::new(d, t))).collect()
    }
}

/// Diffusion scales of the additive process noise, in channel units per √s.
///
/// Only the body velocities and yaw rate are perturbed; wheel and pose
/// channels stay kinematically consistent with them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { vx: 0.05, vy: 0.05, yaw_rate: 0.01 }
    }
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { vx: 0.0, vy: 0.0, yaw_rate: 0.0 };

    pub fn validate(&self) -> Result<(), VehicleError> {
        for (name, v) in [("noise.vx", self.vx), ("noise.vy", self.vy), ("noise.yaw_rate", self.yaw_rate)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(VehicleError::InvalidParameter { name, reason: format!("must be >= 0, got {v}") });
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.yaw_rate == 0.0
    }
}
