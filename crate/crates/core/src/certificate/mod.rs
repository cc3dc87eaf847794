//! Probabilistic safety certificate: safe set, long-term safety probability,
//! the discrete-time generator and the per-step constraint built from it.

mod filter;
mod ito;
mod monte_carlo;
pub mod toy;

pub use filter::{select_input, FilterResult};
pub use ito::{expected_under, ito_drift_term, psi_derivatives, PsiDerivatives};
pub use monte_carlo::MonteCarloPsi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::GaussianBelief;
use crate::rng::SimRng;
use crate::vehicle::{ActuatorBounds, ControlInput, VehicleState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("invalid certificate configuration: {0}")]
    InvalidConfig(String),
    #[error("gradient estimate too noisy: half-width {half_width} exceeds {threshold}")]
    HighVariance { half_width: f64, threshold: f64 },
}

/// Lane-keeping safe set `|e| ≤ e_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeSetSpec {
    pub e_max: f64,
}

impl Default for SafeSetSpec {
    fn default() -> Self {
        Self { e_max: 3.0 }
    }
}

impl SafeSetSpec {
    pub fn new(e_max: f64) -> Result<Self, CertificateError> {
        if e_max.is_finite() && e_max > 0.0 {
            Ok(Self { e_max })
        } else {
            Err(CertificateError::InvalidConfig(format!("e_max must be positive, got {e_max}")))
        }
    }

    pub fn contains(&self, state: &VehicleState) -> bool {
        phi(state, self) >= 0.0
    }
}

/// Barrier function `1 − (e/e_max)²`; non-negative exactly on the safe set.
pub fn phi(state: &VehicleState, spec: &SafeSetSpec) -> f64 {
    let r = state.lateral_error / spec.e_max;
    1.0 - r * r
}

/// Whether every state of `trajectory` lies in the safe set.
pub fn long_term_safe<'a, I>(trajectory: I, spec: &SafeSetSpec) -> bool
where
    I: IntoIterator<Item = &'a VehicleState>,
{
    trajectory.into_iter().all(|x| spec.contains(x))
}

/// Look-ahead used when evaluating the safety probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyHorizon {
    /// Number of rollout steps `T`.
    pub steps: usize,
    /// Rollout step length (s).
    pub dt_eval: f64,
}

impl Default for SafetyHorizon {
    fn default() -> Self {
        Self { steps: 75, dt_eval: 0.1 }
    }
}

/// Monte Carlo estimate of a probability with its 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyEstimate {
    pub value: f64,
    pub n_samples: usize,
    pub half_width: f64,
}

impl SafetyEstimate {
    pub fn from_counts(successes: usize, n: usize) -> Self {
        assert!(n > 0, "safety estimate needs at least one sample");
        let p = successes as f64 / n as f64;
        Self { value: p, n_samples: n, half_width: 1.96 * (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// Exactly known value (enumeration, analytic closure, or a certain outcome).
    pub fn exact(value: f64, n_samples: usize) -> Self {
        Self { value, n_samples: n_samples.max(1), half_width: 0.0 }
    }
}

/// Parameters of the per-step constraint and of the estimator that feeds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "U: Deserialize<'de>"))]
pub struct PscConfig<U = ControlInput> {
    /// Risk tolerance ε; the certified level is `1 − ε`.
    pub epsilon: f64,
    /// Slope `a` of the class-K function `γ(q) = a·q`.
    pub gamma_gain: f64,
    /// Control interval Δt (s).
    pub dt: f64,
    /// Rollouts per safety-probability evaluation.
    pub mc_samples: usize,
    /// One-step propagations used for the expected next-step safety probability.
    pub inner_samples: usize,
    pub horizon: SafetyHorizon,
    /// Finite admissible input set searched by the filter.
    pub candidates: Vec<U>,
}

impl Default for PscConfig<ControlInput> {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            gamma_gain: 1.0,
            dt: 0.2,
            mc_samples: 100,
            inner_samples: 16,
            horizon: SafetyHorizon::default(),
            candidates: ActuatorBounds::default().grid(7, 5),
        }
    }
}

impl<U> PscConfig<U> {
    pub fn validate(&self) -> Result<(), CertificateError> {
        let bad = |m: String| Err(CertificateError::InvalidConfig(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must be in (0, 1), got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.gamma_gain) {
            return bad(format!("gamma_gain must be in [0, 1], got {}", self.gamma_gain));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.mc_samples == 0 || self.inner_samples == 0 {
            return bad("sample counts must be positive".into());
        }
        if self.horizon.steps == 0 || !(self.horizon.dt_eval > 0.0) {
            return bad("horizon needs at least one positive step".into());
        }
        if self.candidates.is_empty() {
            return bad("candidate set is empty".into());
        }
        Ok(())
    }

    /// Certified level `1 − ε`.
    pub fn threshold(&self) -> f64 {
        1.0 - self.epsilon
    }

    pub fn gamma(&self, q: f64) -> f64 {
        self.gamma_gain * q
    }
}

/// Outcome of checking the constraint `A ≥ −γ(Ψ_k − (1 − ε))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub satisfied: bool,
    /// `A + γ(Ψ_k − (1 − ε))`; non-negative exactly when satisfied.
    pub margin: f64,
}

pub fn constraint_satisfied<U>(psi_k: f64, generator: f64, config: &PscConfig<U>) -> ConstraintCheck {
    let margin = generator + config.gamma(psi_k - config.threshold());
    ConstraintCheck { satisfied: margin >= 0.0, margin }
}

/// The three safety probabilities that make up one generator evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTerms {
    /// `Ψ_{H_k}(X_k)`.
    pub psi_k: f64,
    /// `Ψ_{H_{k+1}}(X_k)`: current state, updated belief.
    pub psi_updated: f64,
    /// `E[Ψ_{H_{k+1}}(X_{k+1}) | X_k, U_k]`.
    pub expected_next: f64,
    pub dt: f64,
}

impl GeneratorTerms {
    /// Discrete-time generator `(E[Ψ_{H_{k+1}}(X_{k+1})] − Ψ_{H_k}(X_k)) / Δt`.
    pub fn generator(&self) -> f64 {
        (self.expected_next - self.psi_k) / self.dt
    }

    /// `(S, T)`: the state-prediction part and the belief-update part.
    pub fn split(&self) -> (f64, f64) {
        ((self.expected_next - self.psi_updated) / self.dt, (self.psi_updated - self.psi_k) / self.dt)
    }
}

/// A controlled stochastic system with one scalar unknown parameter ξ,
/// closed under a reference policy for safety-probability rollouts.
pub trait StochasticSystem: Sync {
    type State: Clone + Send + Sync;
    type Input: Clone + Send + Sync;

    fn in_safe_set(&self, state: &Self::State) -> bool;

    /// Reference (nominal) policy evaluated with parameter estimate `xi_hat`.
    fn reference_input(&self, state: &Self::State, xi_hat: f64) -> Self::Input;

    /// Draw a plant parameter from `belief`.
    fn sample_parameter(&self, belief: &GaussianBelief, rng: &mut SimRng) -> f64;

    /// Advance by `dt` under parameter `xi`; `None` marks a terminal failure
    /// (counted as unsafe).
    fn step(&self, state: &Self::State, input: &Self::Input, xi: f64, dt: f64, rng: &mut SimRng)
        -> Option<Self::State>;
}
