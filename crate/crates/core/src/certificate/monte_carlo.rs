use rayon::prelude::*;

use super::{GeneratorTerms, SafetyEstimate, SafetyHorizon, StochasticSystem};
use crate::belief::GaussianBelief;
use crate::rng::{family, stream_rng};

/// Monte Carlo estimator of the long-term safety probability.
///
/// Rollout `i` always reads stream `i` of the rollout family under `seed`,
/// so evaluations that share a seed see common random numbers: different
/// beliefs, inputs or horizons are compared on the same noise paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloPsi {
    pub seed: u64,
    pub samples: usize,
    pub horizon: SafetyHorizon,
}

impl MonteCarloPsi {
    pub fn new(seed: u64, samples: usize, horizon: SafetyHorizon) -> Self {
        Self { seed, samples, horizon }
    }

    /// One closed-loop rollout under the reference policy. The parameter is
    /// drawn once from `belief` for the plant; the policy sees the belief mean.
    pub fn rollout_safe<S: StochasticSystem>(
        &self,
        sys: &S,
        x0: &S::State,
        belief: &GaussianBelief,
        index: u64,
    ) -> bool {
        if !sys.in_safe_set(x0) {
            return false;
        }
        let mut rng = stream_rng(self.seed, family::ROLLOUT, index);
        let xi = sys.sample_parameter(belief, &mut rng);
        let mut x = x0.clone();
        for _ in 0..self.horizon.steps {
            let u = sys.reference_input(&x, belief.mean);
            match sys.step(&x, &u, xi, self.horizon.dt_eval, &mut rng) {
                Some(next) if sys.in_safe_set(&next) => x = next,
                _ => return false,
            }
        }
        true
    }

    /// Estimate from rollouts `first .. first + count`.
    pub fn estimate_block<S: StochasticSystem>(
        &self,
        sys: &S,
        x: &S::State,
        belief: &GaussianBelief,
        first: u64,
        count: usize,
    ) -> SafetyEstimate {
        if !sys.in_safe_set(x) {
            return SafetyEstimate::exact(0.0, count);
        }
        let safe =
            (first..first + count as u64).into_par_iter().filter(|&i| self.rollout_safe(sys, x, belief, i)).count();
        SafetyEstimate::from_counts(safe, count)
    }

    /// `Ψ_H(x)` from the configured number of rollouts.
    pub fn estimate<S: StochasticSystem>(&self, sys: &S, x: &S::State, belief: &GaussianBelief) -> SafetyEstimate {
        self.estimate_block(sys, x, belief, 0, self.samples)
    }

    /// Rollouts per propagated sample so that `inner` blocks cover at least
    /// the configured sample count.
    pub fn block_size(&self, inner: usize) -> usize {
        self.samples.div_ceil(inner.max(1))
    }

    /// Nested estimate of `E[Ψ_{H'}(X') | x, u]`.
    ///
    /// `inner` one-step propagations draw the plant parameter from `belief_next`;
    /// propagation `j` evaluates its safety probability on rollout streams
    /// `j·m .. (j+1)·m`, the same streams a plain [`estimate`](Self::estimate)
    /// at `x` uses, which keeps the generator's difference low-variance.
    pub fn expected_next<S: StochasticSystem>(
        &self,
        sys: &S,
        x: &S::State,
        u: &S::Input,
        belief_next: &GaussianBelief,
        dt: f64,
        inner: usize,
    ) -> f64 {
        let m = self.block_size(inner);
        let values: Vec<f64> = (0..inner as u64)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(self.seed, family::PROPAGATION, j);
                let xi = sys.sample_parameter(belief_next, &mut rng);
                match sys.step(x, u, xi, dt, &mut rng) {
                    Some(next) => self.estimate_block(sys, &next, belief_next, j * m as u64, m).value,
                    None => 0.0,
                }
            })
            .collect();
        values.iter().sum::<f64>() / inner as f64
    }

    /// All three terms of the generator at `(x, u)`.
    ///
    /// Both current-state probabilities use the blocks of the nested
    /// estimate, so `S + T` reproduces the generator from one sample set.
    #[allow(clippy::too_many_arguments)]
    pub fn generator_terms<S: StochasticSystem>(
        &self,
        sys: &S,
        x: &S::State,
        u: &S::Input,
        belief_k: &GaussianBelief,
        belief_k1: &GaussianBelief,
        dt: f64,
        inner: usize,
    ) -> GeneratorTerms {
        let n = self.block_size(inner) * inner.max(1);
        GeneratorTerms {
            psi_k: self.estimate_block(sys, x, belief_k, 0, n).value,
            psi_updated: self.estimate_block(sys, x, belief_k1, 0, n).value,
            expected_next: self.expected_next(sys, x, u, belief_k1, dt, inner),
            dt,
        }
    }

    /// Discrete-time generator at `(x, u)`.
    #[allow(clippy::too_many_arguments)]
    pub fn generator<S: StochasticSystem>(
        &self,
        sys: &S,
        x: &S::State,
        u: &S::Input,
        belief_k: &GaussianBelief,
        belief_k1: &GaussianBelief,
        dt: f64,
        inner: usize,
    ) -> f64 {
        self.generator_terms(sys, x, u, belief_k, belief_k1, dt, inner).generator()
    }

    /// `(S, T)` split of the generator at `(x, u)`.
    #[allow(clippy::too_many_arguments)]
    pub fn generator_split<S: StochasticSystem>(
        &self,
        sys: &S,
        x: &S::State,
        u: &S::Input,
        belief_k: &GaussianBelief,
        belief_k1: &GaussianBelief,
        dt: f64,
        inner: usize,
    ) -> (f64, f64) {
        self.generator_terms(sys, x, u, belief_k, belief_k1, dt, inner).split()
    }
}
