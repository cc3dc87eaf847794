use serde::{Deserialize, Serialize};

use crate::rng::{family, stream_rng, SimRng};
use crate::vehicle::{ActuatorBounds, ControlInput, NoiseSpec, VehicleState, VehicleWorld};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Inputs chosen freely for this many steps; rates are zero afterwards.
    pub control_horizon: usize,
    pub w_speed: f64,
    pub w_lateral: f64,
    pub w_heading: f64,
    pub steer_levels: usize,
    pub torque_levels: usize,
    /// Longest integration substep of the prediction model (s).
    pub prediction_substep: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            control_horizon: 2,
            w_speed: 0.05,
            w_lateral: 1.0,
            w_heading: 1.0,
            steer_levels: 7,
            torque_levels: 5,
            prediction_substep: 0.1,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.horizon == 0 || self.control_horizon == 0 {
            return Err("MPC horizons must be at least one step".into());
        }
        if [self.w_speed, self.w_lateral, self.w_heading].iter().any(|w| !(*w >= 0.0)) {
            return Err("MPC weights must be non-negative".into());
        }
        if self.steer_levels == 0 || self.torque_levels == 0 || !(self.prediction_substep > 0.0) {
            return Err("MPC grid and substep must be positive".into());
        }
        Ok(())
    }

    pub fn stage_cost(&self, x: &VehicleState, v_ref: f64) -> f64 {
        self.w_speed * (x.vx - v_ref).powi(2)
            + self.w_lateral * x.lateral_error.powi(2)
            + self.w_heading * x.heading_error.powi(2)
    }
}

/// Outcome of the candidate-set search.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcPlan {
    /// Planned inputs over the prediction horizon.
    pub inputs: Vec<ControlInput>,
    pub cost: f64,
    /// First-input grid and the best achievable cost after each one.
    pub first_inputs: Vec<ControlInput>,
    pub first_costs: Vec<f64>,
    /// No sequence could be predicted; `inputs` is the zero-rate hold.
    pub degraded: bool,
}

struct Search<'a> {
    world: VehicleWorld,
    cfg: &'a MpcConfig,
    grid: Vec<ControlInput>,
    mu: f64,
    dt: f64,
    v_ref: f64,
    rng: SimRng,
}

impl Search<'_> {
    fn predict(&mut self, x: &VehicleState, u: &ControlInput) -> Option<VehicleState> {
        match self.world.step_with(x, u, self.mu, self.dt, &NoiseSpec::NONE, &mut self.rng) {
            Ok(out) if !out.status.is_terminal() => Some(out.state),
            _ => None,
        }
    }

    /// Best cost-to-go from `x` with `depth` steps already taken; returns the
    /// chosen inputs from here on.
    fn best(&mut self, x: &VehicleState, depth: usize, free: usize) -> (f64, Vec<ControlInput>) {
        let total = self.cfg.horizon;
        if depth == total {
            return (0.0, Vec::new());
        }
        if depth >= free {
            // hold: zero rates for the rest of the horizon
            let mut cost = 0.0;
            let mut y = *x;
            for _ in depth..total {
                match self.predict(&y, &ControlInput::ZERO) {
                    Some(next) => {
                        cost += self.cfg.stage_cost(&next, self.v_ref);
                        y = next;
                    }
                    None => return (f64::INFINITY, Vec::new()),
                }
            }
            return (cost, vec![ControlInput::ZERO; total - depth]);
        }
        let mut best = (f64::INFINITY, Vec::new());
        for i in 0..self.grid.len() {
            let u = self.grid[i];
            let Some(next) = self.predict(x, &u) else { continue };
            let stage = self.cfg.stage_cost(&next, self.v_ref);
            let (rest, tail) = self.best(&next, depth + 1, free);
            let c = stage + rest;
            if c < best.0 {
                let mut seq = vec![u];
                seq.extend(tail);
                best = (c, seq);
            }
        }
        best
    }
}

/// Receding-horizon plan by exhaustive search over the actuator grid for the
/// first `control_horizon` steps, with zero rates afterwards. The prediction
/// model is the noise-free plant at friction `mu` (the belief mean).
pub fn mpc_plan(
    state: &VehicleState,
    mu: f64,
    world: &VehicleWorld,
    cfg: &MpcConfig,
    bounds: &ActuatorBounds,
    dt: f64,
    v_ref: f64,
) -> MpcPlan {
    let mut world = world.clone();
    world.integrator.max_substep = cfg.prediction_substep;
    let free = cfg.control_horizon.min(cfg.horizon);
    let mut search = Search {
        world,
        cfg,
        grid: bounds.grid(cfg.steer_levels, cfg.torque_levels),
        mu: mu.max(1e-3),
        dt,
        v_ref,
        rng: stream_rng(0, family::PLANT, u64::MAX),
    };
    let first_inputs = search.grid.clone();
    let mut first_costs = Vec::with_capacity(first_inputs.len());
    let mut best: (f64, Vec<ControlInput>) = (f64::INFINITY, Vec::new());
    for u in &first_inputs {
        let c = match search.predict(state, u) {
            Some(next) => {
                let stage = cfg.stage_cost(&next, v_ref);
                let (rest, tail) = search.best(&next, 1, free);
                if stage + rest < best.0 {
                    let mut seq = vec![*u];
                    seq.extend(tail);
                    best = (stage + rest, seq);
                }
                stage + rest
            }
            None => f64::INFINITY,
        };
        first_costs.push(c);
    }
    if best.0.is_finite() {
        MpcPlan { inputs: best.1, cost: best.0, first_inputs, first_costs, degraded: false }
    } else {
        MpcPlan {
            inputs: vec![ControlInput::ZERO; cfg.horizon],
            cost: f64::INFINITY,
            first_inputs,
            first_costs,
            degraded: true,
        }
    }
}
