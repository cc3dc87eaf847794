use crate::belief::GaussianBelief;
use crate::certificate::{
    constraint_satisfied, select_input, FilterResult, MonteCarloPsi, PscConfig, SafetyEstimate, StochasticSystem,
};
use crate::vehicle::{ActuatorBounds, ControlInput, VehicleState};

/// Squared deviation between two inputs with each channel scaled by its
/// actuator bound, halved.
pub fn deviation_cost(u: &ControlInput, reference: &ControlInput, bounds: &ActuatorBounds) -> f64 {
    let d = (u.steer_rate - reference.steer_rate) / bounds.max_steer_rate;
    let t = (u.torque_rate - reference.torque_rate) / bounds.max_torque_rate;
    0.5 * (d * d + t * t)
}

/// Result of one certified control step.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedStep {
    pub filter: FilterResult<ControlInput>,
    /// `Ψ_{H_k}(X_k)` on the step's sample set.
    pub psi: SafetyEstimate,
}

/// Picks the cheapest candidate (under `cost`) whose generator satisfies the
/// certificate constraint. All candidates share the seed, so their generator
/// estimates use common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn certified_choice<S>(
    sys: &S,
    state: &VehicleState,
    belief_k: &GaussianBelief,
    belief_k1: &GaussianBelief,
    candidates: &[ControlInput],
    cost: impl Fn(&ControlInput) -> f64,
    psc: &PscConfig,
    seed: u64,
) -> CertifiedStep
where
    S: StochasticSystem<State = VehicleState, Input = ControlInput>,
{
    let mc = MonteCarloPsi::new(seed, psc.mc_samples, psc.horizon);
    let n = mc.block_size(psc.inner_samples) * psc.inner_samples;
    let psi = mc.estimate_block(sys, state, belief_k, 0, n);
    let filter = select_input(candidates, cost, |u| {
        let expected_next = mc.expected_next(sys, state, u, belief_k1, psc.dt, psc.inner_samples);
        constraint_satisfied(psi.value, (expected_next - psi.value) / psc.dt, psc)
    });
    CertifiedStep { filter, psi }
}

/// Minimal-deviation safety filter around `nominal_input`.
///
/// The clamped nominal input is prepended to the candidate grid, so it is
/// returned unchanged whenever it already satisfies the constraint.
#[allow(clippy::too_many_arguments)]
pub fn safe_filter<S>(
    sys: &S,
    state: &VehicleState,
    belief_k: &GaussianBelief,
    belief_k1: &GaussianBelief,
    nominal_input: ControlInput,
    psc: &PscConfig,
    bounds: &ActuatorBounds,
    seed: u64,
) -> CertifiedStep
where
    S: StochasticSystem<State = VehicleState, Input = ControlInput>,
{
    let reference = bounds.clamp(nominal_input);
    let candidates: Vec<ControlInput> = std::iter::once(reference).chain(psc.candidates.iter().copied()).collect();
    certified_choice(sys, state, belief_k, belief_k1, &candidates, |u| deviation_cost(u, &reference, bounds), psc, seed)
}
