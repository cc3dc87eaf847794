use serde::{Deserialize, Serialize};

use super::VehicleError;

/// Physical constants of the 3-DOF vehicle and its LuGre tires.
///
/// `Default` reproduces the reference parameter table; scenario files may
/// override individual fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Vehicle mass (kg).
    pub mass: f64,
    /// Effective wheel radius (m).
    pub wheel_radius: f64,
    /// Yaw moment of inertia (kg·m²).
    pub yaw_inertia: f64,
    /// Wheel moment of inertia (kg·m²).
    pub wheel_inertia: f64,
    /// Distance from the centre of gravity to the front axle (m).
    pub cg_to_front: f64,
    /// Distance from the centre of gravity to the rear axle (m).
    pub cg_to_rear: f64,
    /// Track width (m).
    pub width: f64,
    /// Stribeck relative velocity (m/s).
    pub stribeck_velocity: f64,
    /// Longitudinal rubber stiffness (1/m).
    pub sigma0_x: f64,
    /// Longitudinal relative viscous damping (s/m).
    pub sigma2_x: f64,
    /// Longitudinal load distribution factor.
    pub kappa_x: f64,
    /// Lateral rubber stiffness (1/m).
    pub sigma0_y: f64,
    /// Lateral relative viscous damping (s/m).
    pub sigma2_y: f64,
    /// Lateral load distribution factor.
    pub kappa_y: f64,
    /// Static friction coefficient of the Stribeck curve.
    pub mu_static: f64,
    /// Dynamic (Coulomb) friction coefficient of the Stribeck curve.
    pub mu_dynamic: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1430.0,
            wheel_radius: 0.325,
            yaw_inertia: 2059.0,
            wheel_inertia: 1.68,
            cg_to_front: 1.05,
            cg_to_rear: 1.61,
            width: 1.55,
            stribeck_velocity: 6.6,
            sigma0_x: 195.0,
            sigma2_x: 0.001,
            kappa_x: 13.4,
            sigma0_y: 195.0,
            sigma2_y: 0.001,
            kappa_y: 13.4,
            mu_static: 0.55,
            mu_dynamic: 0.35,
            gravity: 9.8,
        }
    }
}

impl VehicleParams {
    /// Static normal load per wheel, `m·g/4` (no load transfer).
    pub fn normal_load(&self) -> f64 {
        self.mass * self.gravity / 4.0
    }

    /// Stribeck curve `g(v) = μ_c + (μ_s − μ_c)·exp(−√(v/V_s))`.
    ///
    /// Negative arguments are treated as zero.
    pub fn stribeck(&self, relative_speed: f64) -> f64 {
        let v = relative_speed.max(0.0);
        self.mu_dynamic + (self.mu_static - self.mu_dynamic) * (-(v / self.stribeck_velocity).sqrt()).exp()
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        let fields = [
            ("mass", self.mass),
            ("wheel_radius", self.wheel_radius),
            ("yaw_inertia", self.yaw_inertia),
            ("wheel_inertia", self.wheel_inertia),
            ("cg_to_front", self.cg_to_front),
            ("cg_to_rear", self.cg_to_rear),
            ("width", self.width),
            ("stribeck_velocity", self.stribeck_velocity),
            ("sigma0_x", self.sigma0_x),
            ("sigma2_x", self.sigma2_x),
            ("kappa_x", self.kappa_x),
            ("sigma0_y", self.sigma0_y),
            ("sigma2_y", self.sigma2_y),
            ("kappa_y", self.kappa_y),
            ("mu_static", self.mu_static),
            ("mu_dynamic", self.mu_dynamic),
            ("gravity", self.gravity),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(VehicleError::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {value}"),
                });
            }
        }
        if self.mu_static <= self.mu_dynamic {
            return Err(VehicleError::InvalidParameter {
                name: "mu_static",
                reason: "static friction must exceed dynamic friction".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_table() {
        let p = VehicleParams::default();
        assert_eq!(p.mass, 1430.0);
        assert_eq!(p.wheel_radius, 0.325);
        assert_eq!(p.yaw_inertia, 2059.0);
        assert_eq!(p.wheel_inertia, 1.68);
        assert_eq!((p.cg_to_front, p.cg_to_rear, p.width), (1.05, 1.61, 1.55));
        assert_eq!(p.stribeck_velocity, 6.6);
        assert_eq!((p.sigma0_x, p.sigma2_x, p.kappa_x), (195.0, 0.001, 13.4));
        assert_eq!((p.sigma0_y, p.sigma2_y, p.kappa_y), (195.0, 0.001, 13.4));
        assert_eq!((p.mu_static, p.mu_dynamic, p.gravity), (0.55, 0.35, 9.8));
        p.validate().unwrap();
    }

    #[test]
    fn stribeck_endpoints_and_midpoint() {
        let p = VehicleParams::default();
        assert_eq!(p.stribeck(0.0), 0.55);
        assert!((p.stribeck(1e12) - 0.35).abs() < 1e-6);
        // 0.35 + 0.20 / e
        assert!((p.stribeck(6.6) - 0.423_575_888_234_288_4).abs() < 1e-12);
    }

    #[test]
    fn rejects_inverted_friction() {
        let p = VehicleParams { mu_static: 0.3, ..Default::default() };
        assert!(p.validate().is_err());
        let p = VehicleParams { mass: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
