use crate::belief::GaussianBelief;
use crate::certificate::{SafeSetSpec, StochasticSystem};
use crate::rng::SimRng;
use crate::vehicle::{ActuatorBounds, ControlInput, VehicleState, VehicleWorld};

use super::{nominal, NominalConfig};

/// The lane-keeping vehicle closed under the nominal controller, as seen by
/// the safety-probability estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneKeeping {
    /// Plant model used for rollouts; may integrate more coarsely than the plant.
    pub world: VehicleWorld,
    pub nominal: NominalConfig,
    pub bounds: ActuatorBounds,
    pub safe_set: SafeSetSpec,
    /// Friction draws are clamped to this range.
    pub mu_range: (f64, f64),
}

impl StochasticSystem for LaneKeeping {
    type State = VehicleState;
    type Input = ControlInput;

    fn in_safe_set(&self, x: &VehicleState) -> bool {
        self.safe_set.contains(x)
    }

    fn reference_input(&self, x: &VehicleState, xi_hat: f64) -> ControlInput {
        nominal(x, xi_hat, &self.world.road, &self.nominal, &self.bounds)
    }

    fn sample_parameter(&self, belief: &GaussianBelief, rng: &mut SimRng) -> f64 {
        belief.sample(rng).clamp(self.mu_range.0, self.mu_range.1)
    }

    fn step(&self, x: &VehicleState, u: &ControlInput, mu: f64, dt: f64, rng: &mut SimRng) -> Option<VehicleState> {
        match self.world.step(x, u, mu, dt, rng) {
            Ok(out) if !out.status.is_terminal() => Some(out.state),
            _ => None,
        }
    }
}
