use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::vehicle::{ActuatorBounds, ControlInput, RoadProfile, VehicleParams, VehicleState};

/// Lateral state-feedback gains over `[v_y, r, δ, e, ψ]`, from discrete LQR
/// on the linear bicycle model at 40 km/h (see [`derive_lateral_gains`]).
pub const LATERAL_GAINS: [f64; 5] = [
    -0.092_865_335_231_440_68,
    -0.229_568_089_490_819_2,
    -5.877_165_765_073_05,
    -0.707_340_388_787_000_9,
    -4.915_272_148_547_094,
];

/// Speed-error gain (N·m/s per m/s).
pub const SPEED_GAIN: f64 = 29.05;
/// Torque damping gain (1/s).
pub const TORQUE_DAMPING: f64 = 0.5;

/// Reference speed, 40 km/h in m/s.
pub const REFERENCE_SPEED: f64 = 40.0 / 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NominalConfig {
    pub k_lateral: [f64; 5],
    pub k_v: f64,
    pub k_t: f64,
    pub v_ref: f64,
}

impl Default for NominalConfig {
    fn default() -> Self {
        Self { k_lateral: LATERAL_GAINS, k_v: SPEED_GAIN, k_t: TORQUE_DAMPING, v_ref: REFERENCE_SPEED }
    }
}

/// State-feedback lane keeper with a yaw-rate feed-forward of `v_x·ρ(s)`.
///
/// The law does not use the friction estimate; `_xi_hat` is accepted so the
/// controller can stand in wherever a parameter-aware policy is expected.
pub fn nominal(
    state: &VehicleState,
    _xi_hat: f64,
    road: &RoadProfile,
    config: &NominalConfig,
    bounds: &ActuatorBounds,
) -> ControlInput {
    let r_ff = state.vx * road.curvature_at(state.s);
    let dev = [state.vy, state.yaw_rate - r_ff, state.steer, state.lateral_error, state.heading_error];
    let steer_rate: f64 = config.k_lateral.iter().zip(dev).map(|(k, d)| k * d).sum();
    let torque_rate = -config.k_v * (state.vx - config.v_ref) - config.k_t * state.torque;
    bounds.clamp(ControlInput::new(steer_rate, torque_rate))
}

/// Weights of the lateral LQR problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    pub q: [f64; 5],
    pub r: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self { q: [0.0, 0.0, 0.0, 1.0, 1.0], r: 1.0 }
    }
}

/// Linear small-slip cornering stiffness of one tire at speed `v` (N/rad).
pub fn cornering_stiffness(params: &VehicleParams, v: f64) -> f64 {
    (params.sigma0_y / params.kappa_y + params.sigma2_y * v) * params.normal_load()
}

/// Continuous-time bicycle model over `[v_y, r, δ, e, ψ]` with input `Δδ`.
pub fn lateral_model(params: &VehicleParams, v: f64) -> (SMatrix<f64, 5, 5>, SVector<f64, 5>) {
    let c = 2.0 * cornering_stiffness(params, v);
    let (m, iz, lf, lr) = (params.mass, params.yaw_inertia, params.cg_to_front, params.cg_to_rear);
    #[rustfmt::skip]
    let a = SMatrix::<f64, 5, 5>::from_row_slice(&[
        -2.0 * c / (m * v),            -v - c * (lf - lr) / (m * v),          c / m,       0.0, 0.0,
        -c * (lf - lr) / (iz * v),     -c * (lf * lf + lr * lr) / (iz * v),   c * lf / iz, 0.0, 0.0,
        0.0,                           0.0,                                   0.0,         0.0, 0.0,
        1.0,                           0.0,                                   0.0,         0.0, v,
        0.0,                           1.0,                                   0.0,         0.0, 0.0,
    ]);
    let b = SVector::<f64, 5>::from([0.0, 0.0, 1.0, 0.0, 0.0]);
    (a, b)
}

/// Zero-order-hold discretisation of `(a, b)` over `dt`.
pub fn discretize(a: &SMatrix<f64, 5, 5>, b: &SVector<f64, 5>, dt: f64) -> (SMatrix<f64, 5, 5>, SVector<f64, 5>) {
    let mut m = SMatrix::<f64, 6, 6>::zeros();
    m.fixed_view_mut::<5, 5>(0, 0).copy_from(&(a * dt));
    m.fixed_view_mut::<5, 1>(0, 5).copy_from(&(b * dt));
    let e = m.exp();
    (e.fixed_view::<5, 5>(0, 0).into_owned(), e.fixed_view::<5, 1>(0, 5).into_owned())
}

/// Discrete LQR gain `u = K·x` (the sign is folded in) for the bicycle model
/// at speed `v`, sampled at `dt`, by Riccati iteration.
pub fn derive_lateral_gains(params: &VehicleParams, v: f64, dt: f64, weights: &LqrWeights) -> [f64; 5] {
    let (a, b) = lateral_model(params, v);
    let (ad, bd) = discretize(&a, &b, dt);
    let q = SMatrix::<f64, 5, 5>::from_diagonal(&SVector::from(weights.q));
    let mut p = q;
    let mut k = SMatrix::<f64, 1, 5>::zeros();
    for _ in 0..100_000 {
        let s = weights.r + (bd.transpose() * p * bd)[(0, 0)];
        k = (bd.transpose() * p * ad) / s;
        let next = q + ad.transpose() * p * ad - ad.transpose() * p * bd * k;
        let delta = (next - p).abs().max();
        p = next;
        if delta < 1e-13 * p.abs().max() {
            break;
        }
    }
    std::array::from_fn(|i| -k[(0, i)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::RoadSegment;

    #[test]
    fn equilibrium_gives_zero_input() {
        let p = VehicleParams::default();
        let x = VehicleState::cruising(REFERENCE_SPEED, &p);
        let u = nominal(&x, 0.3, &RoadProfile::straight(100.0), &NominalConfig::default(), &ActuatorBounds::default());
        assert_eq!(u, ControlInput::ZERO);
    }

    #[test]
    fn reference_speed_is_forty_kmh() {
        assert!((NominalConfig::default().v_ref * 3.6 - 40.0).abs() < 1e-12);
    }

    #[test]
    fn left_offset_steers_right() {
        let p = VehicleParams::default();
        let mut x = VehicleState::cruising(REFERENCE_SPEED, &p);
        x.lateral_error = 0.5;
        let u = nominal(&x, 0.3, &RoadProfile::straight(100.0), &NominalConfig::default(), &ActuatorBounds::default());
        assert!(u.steer_rate < 0.0);
    }

    #[test]
    fn curve_feed_forward_enters_through_yaw_rate() {
        let p = VehicleParams::default();
        let road = RoadProfile { segments: vec![RoadSegment { length: 100.0, curvature: 0.02 }], e_bound: 3.0 };
        let mut x = VehicleState::cruising(10.0, &p);
        x.yaw_rate = 0.2;
        let u = nominal(&x, 0.3, &road, &NominalConfig::default(), &ActuatorBounds::default());
        assert!(u.steer_rate.abs() < 1e-15);
    }

    #[test]
    fn shipped_gains_match_derivation() {
        let k = derive_lateral_gains(&VehicleParams::default(), REFERENCE_SPEED, 0.1, &LqrWeights::default());
        for (a, b) in k.iter().zip(LATERAL_GAINS) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{k:?}");
        }
    }

    #[test]
    fn closed_loop_is_stable_at_both_rates() {
        let p = VehicleParams::default();
        let (a, b) = lateral_model(&p, REFERENCE_SPEED);
        let k = SMatrix::<f64, 1, 5>::from_row_slice(&LATERAL_GAINS);
        for dt in [0.1, 0.2] {
            let (ad, bd) = discretize(&a, &b, dt);
            let cl = ad + bd * k;
            let rho = cl.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(rho < 1.0, "spectral radius {rho} at dt={dt}");
        }
    }
}
