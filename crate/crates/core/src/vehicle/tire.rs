//! Wheel slip kinematics and the LuGre combined-slip force model.

use super::{VehicleError, VehicleParams, VehicleState};

/// Per-wheel slip quantities, indexed `[fl, fr, rl, rr]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipQuantities {
    /// Slip angle (rad).
    pub alpha: [f64; 4],
    /// Slip ratio, in `[-1, 1]` for non-negative wheel speed.
    pub lambda: [f64; 4],
    /// Longitudinal relative velocity `R_e·ω − v_x` (m/s).
    pub v_rx: [f64; 4],
    /// Lateral relative velocity `v_x·α` (m/s).
    pub v_ry: [f64; 4],
}

impl SlipQuantities {
    /// Magnitude of the relative velocity of wheel `i` (m/s).
    pub fn relative_speed(&self, i: usize) -> f64 {
        self.v_rx[i].hypot(self.v_ry[i])
    }
}

/// Longitudinal (`F_L`) and side (`F_S`) tire forces in newtons, indexed `[fl, fr, rl, rr]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireForces {
    pub longitudinal: [f64; 4],
    pub lateral: [f64; 4],
}

/// Slip angles, slip ratios and relative velocities of the four wheels.
///
/// The front angle is `δ − (v_y + l_f·r)/v_x`. At the rear axle the body
/// lateral velocity is `v_y − l_r·r` (the axle sits behind the centre of
/// gravity), so the rear angle is `−(v_y − l_r·r)/v_x`.
pub fn slip_quantities(state: &VehicleState, params: &VehicleParams) -> Result<SlipQuantities, VehicleError> {
    let vx = state.vx;
    if !(vx > 0.0) {
        return Err(VehicleError::Domain(format!("slip is undefined for v_x = {vx}")));
    }
    let front = state.steer - (state.vy + params.cg_to_front * state.yaw_rate) / vx;
    let rear = -(state.vy - params.cg_to_rear * state.yaw_rate) / vx;
    let alpha = [front, front, rear, rear];
    let mut out = SlipQuantities { alpha, lambda: [0.0; 4], v_rx: [0.0; 4], v_ry: [0.0; 4] };
    for (i, (&omega, &a)) in state.omega.iter().zip(&alpha).enumerate() {
        let rolling = params.wheel_radius * omega;
        out.lambda[i] = (rolling - vx) / rolling.max(vx);
        out.v_rx[i] = rolling - vx;
        out.v_ry[i] = vx * a;
    }
    Ok(out)
}

/// Force per unit relative velocity for one direction of one wheel:
/// `(σ₀ / (σ₀‖v_r‖/(μ·g(‖v_r‖)) + κ·R_e·|ω|) + σ₂)·F_z`.
pub(crate) fn tire_gain(
    sigma0: f64,
    sigma2: f64,
    kappa: f64,
    relative_speed: f64,
    omega: f64,
    mu: f64,
    params: &VehicleParams,
) -> f64 {
    let g = params.stribeck(relative_speed);
    let denom = sigma0 * relative_speed / (mu * g) + kappa * params.wheel_radius * omega.abs();
    let stiffness = if denom > 0.0 { sigma0 / denom } else { 0.0 };
    (stiffness + sigma2) * params.normal_load()
}

/// Longitudinal and lateral gains of every wheel, so that
/// `F_L = gain_x·v_rx` and `F_S = gain_y·v_ry`.
pub(crate) fn tire_gains(
    slip: &SlipQuantities,
    state: &VehicleState,
    params: &VehicleParams,
    mu: f64,
) -> ([f64; 4], [f64; 4]) {
    let mut gx = [0.0; 4];
    let mut gy = [0.0; 4];
    for i in 0..4 {
        let vr = slip.relative_speed(i);
        gx[i] = tire_gain(params.sigma0_x, params.sigma2_x, params.kappa_x, vr, state.omega[i], mu, params);
        gy[i] = tire_gain(params.sigma0_y, params.sigma2_y, params.kappa_y, vr, state.omega[i], mu, params);
    }
    (gx, gy)
}

pub(crate) fn check_friction(mu: f64) -> Result<(), VehicleError> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(VehicleError::Domain(format!("friction coefficient must be positive, got {mu}")))
    }
}

/// LuGre combined-slip tire forces at road friction `mu`.
///
/// A wheel with zero relative velocity produces exactly zero force.
pub fn lugre_forces(state: &VehicleState, params: &VehicleParams, mu: f64) -> Result<TireForces, VehicleError> {
    check_friction(mu)?;
    let slip = slip_quantities(state, params)?;
    let (gx, gy) = tire_gains(&slip, state, params, mu);
    let mut forces = TireForces::default();
    for i in 0..4 {
        forces.longitudinal[i] = gx[i] * slip.v_rx[i];
        forces.lateral[i] = gy[i] * slip.v_ry[i];
    }
    Ok(forces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rolling_state(vx: f64) -> VehicleState {
        let p = VehicleParams::default();
        VehicleState::cruising(vx, &p)
    }

    #[test]
    fn pure_rolling_has_no_slip() {
        let p = VehicleParams::default();
        let s = rolling_state(11.0);
        let slip = slip_quantities(&s, &p).unwrap();
        for i in 0..4 {
            assert_eq!(slip.alpha[i], 0.0);
            assert!(slip.lambda[i].abs() < 1e-15);
        }
    }

    #[test]
    fn locked_wheel_gives_minus_one() {
        let p = VehicleParams::default();
        let mut s = rolling_state(7.0);
        s.omega = [0.0; 4];
        let slip = slip_quantities(&s, &p).unwrap();
        assert_eq!(slip.lambda, [-1.0; 4]);
    }

    #[test]
    fn steering_only_sets_front_angle() {
        let p = VehicleParams::default();
        for vx in [0.7, 5.0, 30.0] {
            let mut s = rolling_state(vx);
            s.steer = 0.05;
            let slip = slip_quantities(&s, &p).unwrap();
            assert_eq!(slip.alpha, [0.05, 0.05, 0.0, 0.0]);
        }
    }

    #[test]
    fn rejects_non_positive_speed_and_friction() {
        let p = VehicleParams::default();
        let mut s = rolling_state(5.0);
        assert!(lugre_forces(&s, &p, 0.0).is_err());
        assert!(lugre_forces(&s, &p, f64::NAN).is_err());
        s.vx = 0.0;
        assert!(slip_quantities(&s, &p).is_err());
    }

    #[test]
    fn zero_relative_velocity_means_zero_force() {
        let p = VehicleParams::default();
        let s = rolling_state(9.0);
        let f = lugre_forces(&s, &p, 0.4).unwrap();
        assert_eq!(f.longitudinal, [0.0; 4]);
        assert_eq!(f.lateral, [0.0; 4]);
    }

    #[test]
    fn longitudinal_force_follows_slip_sign() {
        let p = VehicleParams::default();
        let mut s = rolling_state(9.0);
        s.omega[0] *= 1.05;
        s.omega[1] *= 0.95;
        let f = lugre_forces(&s, &p, 0.5).unwrap();
        assert!(f.longitudinal[0] > 0.0);
        assert!(f.longitudinal[1] < 0.0);
    }
}
