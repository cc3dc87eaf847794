use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tire::{check_friction, slip_quantities, tire_gains};
use super::{ControlInput, NoiseSpec, RoadProfile, VehicleError, VehicleParams, VehicleState};

/// Drift of the full 12-dimensional state.
///
/// Body dynamics use the force and moment balance of the 3-DOF model with the
/// four LuGre tire forces; each wheel receives a quarter of the drive torque;
/// steering angle and torque integrate the control rates; the road pose
/// follows `ṡ = v_x cosψ − v_y sinψ`, `ė = v_y cosψ + v_x sinψ`,
/// `ψ̇ = r − v_x ρ(s)`.
pub fn derivative(
    state: &VehicleState,
    input: &ControlInput,
    params: &VehicleParams,
    mu: f64,
    road: &RoadProfile,
) -> Result<VehicleState, VehicleError> {
    check_friction(mu)?;
    let slip = slip_quantities(state, params)?;
    let (gx, gy) = tire_gains(&slip, state, params, mu);
    let fl: [f64; 4] = std::array::from_fn(|i| gx[i] * slip.v_rx[i]);
    let fs: [f64; 4] = std::array::from_fn(|i| gy[i] * slip.v_ry[i]);
    Ok(drift_from_forces(state, input, params, road, &fl, &fs))
}

fn drift_from_forces(
    state: &VehicleState,
    input: &ControlInput,
    p: &VehicleParams,
    road: &RoadProfile,
    fl: &[f64; 4],
    fs: &[f64; 4],
) -> VehicleState {
    let (sn, c) = state.steer.sin_cos();
    let half_w = p.width / 2.0;
    let (vx, vy, r) = (state.vx, state.vy, state.yaw_rate);

    let dvx = vy * r + ((fl[0] + fl[1]) * c - (fs[0] + fs[1]) * sn + fl[2] + fl[3]) / p.mass;
    let dvy = -vx * r + ((fs[0] + fs[1]) * c + (fl[0] + fl[1]) * sn + fs[2] + fs[3]) / p.mass;
    let moment = p.cg_to_front * ((fs[0] + fs[1]) * c + (fl[0] + fl[1]) * sn) - p.cg_to_rear * (fs[2] + fs[3])
        + half_w * (-fl[2] + fl[3])
        + half_w * ((-fl[0] + fl[1]) * c + (fs[0] - fs[1]) * sn);
    let dr = moment / p.yaw_inertia;
    let domega: [f64; 4] = std::array::from_fn(|i| (-p.wheel_radius * fl[i] + 0.25 * state.torque) / p.wheel_inertia);

    let (spsi, cpsi) = state.heading_error.sin_cos();
    VehicleState {
        vx: dvx,
        vy: dvy,
        yaw_rate: dr,
        steer: input.steer_rate,
        omega: domega,
        torque: input.torque_rate,
        s: vx * cpsi - vy * spsi,
        lateral_error: vy * cpsi + vx * spsi,
        heading_error: r - vx * road.curvature_at(state.s),
    }
}

/// How a substep advances the body-velocity and wheel channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationScheme {
    /// Plain explicit Euler on every channel. Needs substeps of a few
    /// milliseconds because the wheel-slip mode is stiff.
    Explicit,
    /// Linearly implicit Euler on `[v_x, v_y, r, ω_fl..ω_rr]` with the tire
    /// gains frozen at the start of the substep; explicit on the rest.
    #[default]
    SemiImplicit,
}

/// Substepping and termination settings for [`VehicleWorld::step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Integrator {
    /// Longest substep (s); a step of length `dt` uses `ceil(dt / max_substep)` substeps.
    pub max_substep: f64,
    /// Episodes end, flagged unsafe, when `v_x` drops below this (m/s).
    pub speed_floor: f64,
    pub scheme: IntegrationScheme,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { max_substep: 0.05, speed_floor: 0.5, scheme: IntegrationScheme::SemiImplicit }
    }
}

impl Integrator {
    pub fn substeps(&self, dt: f64) -> usize {
        ((dt / self.max_substep) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepStatus {
    Running,
    BelowSpeedFloor,
    NonFinite,
}

impl StepStatus {
    pub fn is_terminal(self) -> bool {
        self != StepStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    pub status: StepStatus,
}

/// Everything about the plant except the friction coefficient, which is the
/// unknown parameter and is passed per call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VehicleWorld {
    pub params: VehicleParams,
    pub road: RoadProfile,
    pub noise: NoiseSpec,
    pub integrator: Integrator,
}

impl VehicleWorld {
    pub fn validate(&self) -> Result<(), VehicleError> {
        self.params.validate()?;
        self.road.validate()?;
        self.noise.validate()?;
        if !(self.integrator.max_substep > 0.0 && self.integrator.speed_floor > 0.0) {
            return Err(VehicleError::InvalidParameter {
                name: "integrator",
                reason: "substep and speed floor must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn derivative(
        &self,
        state: &VehicleState,
        input: &ControlInput,
        mu: f64,
    ) -> Result<VehicleState, VehicleError> {
        derivative(state, input, &self.params, mu, &self.road)
    }

    /// Euler–Maruyama step of length `dt` under a zero-order-held input.
    ///
    /// Each substep applies the drift and then adds `σ·√h·N(0,1)` to the
    /// noisy channels, drawing exactly three normals per substep from `rng`
    /// (whether or not a scale is zero) so stream positions line up across
    /// noise settings. Leaving numeric validity ends the step early with a
    /// terminal status instead of an error.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &VehicleState,
        input: &ControlInput,
        mu: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<StepOutcome, VehicleError> {
        self.step_with(state, input, mu, dt, &self.noise, rng)
    }

    /// [`step`](Self::step) with an explicit noise specification; prediction
    /// models pass [`NoiseSpec::NONE`].
    pub fn step_with<R: Rng + ?Sized>(
        &self,
        state: &VehicleState,
        input: &ControlInput,
        mu: f64,
        dt: f64,
        noise: &NoiseSpec,
        rng: &mut R,
    ) -> Result<StepOutcome, VehicleError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(VehicleError::Domain(format!("step length must be positive, got {dt}")));
        }
        check_friction(mu)?;
        let n = self.integrator.substeps(dt);
        let h = dt / n as f64;
        let sqrt_h = h.sqrt();
        let mut x = *state;
        for _ in 0..n {
            if let Some(status) = self.terminal(&x) {
                return Ok(StepOutcome { state: x, status });
            }
            x = self.substep(&x, input, mu, h)?;
            let z: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            x.vx += noise.vx * sqrt_h * z[0];
            x.vy += noise.vy * sqrt_h * z[1];
            x.yaw_rate += noise.yaw_rate * sqrt_h * z[2];
        }
        let status = self.terminal(&x).unwrap_or(StepStatus::Running);
        Ok(StepOutcome { state: x, status })
    }

    fn terminal(&self, x: &VehicleState) -> Option<StepStatus> {
        if !x.is_finite() {
            Some(StepStatus::NonFinite)
        } else if x.vx < self.integrator.speed_floor {
            Some(StepStatus::BelowSpeedFloor)
        } else {
            None
        }
    }

    /// One deterministic substep of length `h`.
    pub fn substep(
        &self,
        x: &VehicleState,
        input: &ControlInput,
        mu: f64,
        h: f64,
    ) -> Result<VehicleState, VehicleError> {
        let p = &self.params;
        let slip = slip_quantities(x, p)?;
        let (gx, gy) = tire_gains(&slip, x, p, mu);
        let fl: [f64; 4] = std::array::from_fn(|i| gx[i] * slip.v_rx[i]);
        let fs: [f64; 4] = std::array::from_fn(|i| gy[i] * slip.v_ry[i]);
        let f = drift_from_forces(x, input, p, &self.road, &fl, &fs);

        let fast_delta: [f64; 7] = match self.integrator.scheme {
            IntegrationScheme::Explicit => {
                [f.vx * h, f.vy * h, f.yaw_rate * h, f.omega[0] * h, f.omega[1] * h, f.omega[2] * h, f.omega[3] * h]
            }
            IntegrationScheme::SemiImplicit => {
                let a = fast_jacobian(x, p, &gx, &gy);
                let m = SMatrix::<f64, 7, 7>::identity() - a * h;
                let rhs =
                    SVector::<f64, 7>::from([f.vx, f.vy, f.yaw_rate, f.omega[0], f.omega[1], f.omega[2], f.omega[3]])
                        * h;
                match m.lu().solve(&rhs) {
                    Some(d) => std::array::from_fn(|i| d[i]),
                    None => return Err(VehicleError::Domain("singular implicit system".into())),
                }
            }
        };

        let mut next = *x;
        next.vx += fast_delta[0];
        next.vy += fast_delta[1];
        next.yaw_rate += fast_delta[2];
        for i in 0..4 {
            next.omega[i] += fast_delta[3 + i];
        }
        next.steer += h * f.steer;
        next.torque += h * f.torque;
        next.s += h * f.s;
        next.lateral_error += h * f.lateral_error;
        next.heading_error += h * f.heading_error;
        Ok(next)
    }
}

/// Jacobian of the `[v_x, v_y, r, ω₁..ω₄]` drift with the tire gains held fixed.
fn fast_jacobian(x: &VehicleState, p: &VehicleParams, gx: &[f64; 4], gy: &[f64; 4]) -> SMatrix<f64, 7, 7> {
    // d v_rx_i / d y and d v_ry_i / d y
    let mut dfl = [[0.0; 7]; 4];
    let mut dfs = [[0.0; 7]; 4];
    for i in 0..4 {
        dfl[i][0] = -gx[i];
        dfl[i][3 + i] = p.wheel_radius * gx[i];
        if i < 2 {
            dfs[i][0] = gy[i] * x.steer;
            dfs[i][1] = -gy[i];
            dfs[i][2] = -gy[i] * p.cg_to_front;
        } else {
            dfs[i][1] = -gy[i];
            dfs[i][2] = gy[i] * p.cg_to_rear;
        }
    }
    let (sn, c) = x.steer.sin_cos();
    let half_w = p.width / 2.0;
    let mut a = SMatrix::<f64, 7, 7>::zeros();
    for j in 0..7 {
        let fl_front = dfl[0][j] + dfl[1][j];
        let fs_front = dfs[0][j] + dfs[1][j];
        a[(0, j)] = (fl_front * c - fs_front * sn + dfl[2][j] + dfl[3][j]) / p.mass;
        a[(1, j)] = (fs_front * c + fl_front * sn + dfs[2][j] + dfs[3][j]) / p.mass;
        a[(2, j)] = (p.cg_to_front * (fs_front * c + fl_front * sn) - p.cg_to_rear * (dfs[2][j] + dfs[3][j])
            + half_w * (-dfl[2][j] + dfl[3][j])
            + half_w * ((-dfl[0][j] + dfl[1][j]) * c + (dfs[0][j] - dfs[1][j]) * sn))
            / p.yaw_inertia;
        for i in 0..4 {
            a[(3 + i, j)] = -p.wheel_radius * dfl[i][j] / p.wheel_inertia;
        }
    }
    // v_y·r in the v_x equation and −v_x·r in the v_y equation
    a[(0, 1)] += x.yaw_rate;
    a[(0, 2)] += x.vy;
    a[(1, 0)] -= x.yaw_rate;
    a[(1, 2)] -= x.vx;
    a
}
