//! One-dimensional random walk with an unknown drift, small enough that its
//! safety probability can be computed exactly by enumerating outcome trees.
//!
//! `x' = x + (u + ξ)·Δt + σ·√Δt·w` with `w` on the three-point law
//! `{−√3, 0, √3}` weighted `{1/6, 2/3, 1/6}` (mean 0, variance 1), and `ξ`
//! drawn from the same three-point quadrature of the Gaussian belief.
//! The safe set is `|x| < bound`; leaving it is absorbing.

use rand::Rng;

use super::{constraint_satisfied, select_input, FilterResult, GeneratorTerms, PscConfig, StochasticSystem};
use crate::belief::GaussianBelief;
use crate::rng::SimRng;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Three-point law with unit variance, as `(node, weight)`.
pub const UNIT_NODES: [(f64, f64); 3] = [(-SQRT3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (SQRT3, 1.0 / 6.0)];

fn draw_node(rng: &mut SimRng) -> f64 {
    let u: f64 = rng.gen();
    if u < 1.0 / 6.0 {
        -SQRT3
    } else if u < 5.0 / 6.0 {
        0.0
    } else {
        SQRT3
    }
}

/// Three-point quadrature nodes of a Gaussian belief.
pub fn belief_nodes(belief: &GaussianBelief) -> [(f64, f64); 3] {
    UNIT_NODES.map(|(z, w)| (belief.mean + belief.std() * z, w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyWalk {
    pub dt: f64,
    pub sigma: f64,
    pub bound: f64,
    /// Reference policy `u = −feedback·x − ξ̂`.
    pub feedback: f64,
}

impl Default for ToyWalk {
    fn default() -> Self {
        Self { dt: 0.1, sigma: 0.6, bound: 1.0, feedback: 1.0 }
    }
}

impl ToyWalk {
    pub fn safe(&self, x: f64) -> bool {
        x.abs() < self.bound
    }

    pub fn advance(&self, x: f64, u: f64, xi: f64, w: f64, dt: f64) -> f64 {
        if !self.safe(x) {
            return x;
        }
        x + (u + xi) * dt + self.sigma * dt.sqrt() * w
    }

    fn survive(&self, x: f64, xi: f64, xi_hat: f64, steps: usize) -> f64 {
        if !self.safe(x) {
            return 0.0;
        }
        if steps == 0 {
            return 1.0;
        }
        let u = self.reference_input(&x, xi_hat);
        UNIT_NODES
            .iter()
            .map(|&(w, p)| p * self.survive(self.advance(x, u, xi, w, self.dt), xi, xi_hat, steps - 1))
            .sum()
    }

    /// Exact `Ψ_H(x)` over `steps` rollout steps.
    pub fn exact_psi(&self, x: f64, belief: &GaussianBelief, steps: usize) -> f64 {
        belief_nodes(belief).iter().map(|&(xi, p)| p * self.survive(x, xi, belief.mean, steps)).sum()
    }

    /// Exact `E[Ψ_{H'}(x') | x, u]` with the one-step parameter drawn from `belief_next`.
    pub fn exact_expected_next(&self, x: f64, u: f64, belief_next: &GaussianBelief, steps: usize) -> f64 {
        if !self.safe(x) {
            return 0.0;
        }
        let mut total = 0.0;
        for (xi, pxi) in belief_nodes(belief_next) {
            for (w, pw) in UNIT_NODES {
                total += pxi * pw * self.exact_psi(self.advance(x, u, xi, w, self.dt), belief_next, steps);
            }
        }
        total
    }

    pub fn exact_terms(
        &self,
        x: f64,
        u: f64,
        belief_k: &GaussianBelief,
        belief_k1: &GaussianBelief,
        steps: usize,
    ) -> GeneratorTerms {
        GeneratorTerms {
            psi_k: self.exact_psi(x, belief_k, steps),
            psi_updated: self.exact_psi(x, belief_k1, steps),
            expected_next: self.exact_expected_next(x, u, belief_k1, steps),
            dt: self.dt,
        }
    }
}

impl StochasticSystem for ToyWalk {
    type State = f64;
    type Input = f64;

    fn in_safe_set(&self, x: &f64) -> bool {
        self.safe(*x)
    }

    fn reference_input(&self, x: &f64, xi_hat: f64) -> f64 {
        -self.feedback * x - xi_hat
    }

    fn sample_parameter(&self, belief: &GaussianBelief, rng: &mut SimRng) -> f64 {
        belief.mean + belief.std() * draw_node(rng)
    }

    fn step(&self, x: &f64, u: &f64, xi: f64, dt: f64, rng: &mut SimRng) -> Option<f64> {
        let w = draw_node(rng);
        Some(self.advance(*x, *u, xi, w, dt))
    }
}

/// Trace of one certified episode on the toy.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedEpisode {
    /// Exact `Ψ_{H_k}(X_k)` for `k = 0..=K`.
    pub psi: Vec<f64>,
    pub states: Vec<f64>,
    pub filter: Vec<FilterResult<f64>>,
}

impl CertifiedEpisode {
    pub fn all_feasible(&self) -> bool {
        self.filter.iter().all(|f| f.feasible)
    }
}

/// Runs `beliefs.len() − 1` steps of the exact safety filter around a fixed
/// `desired` input. At step `k` the plant draws its drift from the nodes of
/// `beliefs[k + 1]`, the same law the constraint's expectation assumes.
pub fn certified_episode(
    toy: &ToyWalk,
    beliefs: &[GaussianBelief],
    x0: f64,
    desired: f64,
    config: &PscConfig<f64>,
    rng: &mut SimRng,
) -> CertifiedEpisode {
    let steps = config.horizon.steps;
    let mut x = x0;
    let mut out = CertifiedEpisode { psi: Vec::new(), states: vec![x0], filter: Vec::new() };
    for k in 0..beliefs.len().saturating_sub(1) {
        let (bk, bk1) = (&beliefs[k], &beliefs[k + 1]);
        let psi_k = toy.exact_psi(x, bk, steps);
        let psi_updated = toy.exact_psi(x, bk1, steps);
        out.psi.push(psi_k);
        let choice = select_input(
            &config.candidates,
            |u| 0.5 * (u - desired).powi(2),
            |u| {
                let terms = GeneratorTerms {
                    psi_k,
                    psi_updated,
                    expected_next: toy.exact_expected_next(x, *u, bk1, steps),
                    dt: toy.dt,
                };
                constraint_satisfied(psi_k, terms.generator(), config)
            },
        );
        let xi = toy.sample_parameter(bk1, rng);
        x = toy.step(&x, &choice.input, xi, toy.dt, rng).unwrap_or(x);
        out.states.push(x);
        out.filter.push(choice);
    }
    if let Some(last) = beliefs.last() {
        out.psi.push(toy.exact_psi(x, last, steps));
    }
    out
}

/// Probability that Brownian motion with drift `drift` and scale `sigma`,
/// started at `x < barrier`, stays below `barrier` over a time `tau`.
pub fn brownian_survival(x: f64, drift: f64, sigma: f64, barrier: f64, tau: f64) -> f64 {
    let d = barrier - x;
    if d <= 0.0 {
        return 0.0;
    }
    let s = sigma * tau.sqrt();
    let first = normal_cdf((d - drift * tau) / s);
    let second = (2.0 * drift * d / (sigma * sigma)).exp() * normal_cdf((-d - drift * tau) / s);
    (first - second).clamp(0.0, 1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::MonteCarloPsi;
    use crate::certificate::SafetyHorizon;
    use crate::rng::{family, stream_rng};

    #[test]
    fn nodes_have_unit_variance() {
        let m: f64 = UNIT_NODES.iter().map(|(z, w)| z * w).sum();
        let v: f64 = UNIT_NODES.iter().map(|(z, w)| z * z * w).sum();
        assert!(m.abs() < 1e-15 && (v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_psi_is_monotone_in_horizon() {
        let toy = ToyWalk::default();
        let b = GaussianBelief::new(0.2, 0.04).unwrap();
        let values: Vec<f64> = (0..6).map(|t| toy.exact_psi(0.5, &b, t)).collect();
        assert!((values[0] - 1.0).abs() < 1e-12);
        assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert_eq!(toy.exact_psi(1.2, &b, 5), 0.0);
    }

    #[test]
    fn monte_carlo_matches_enumeration() {
        let toy = ToyWalk::default();
        let b = GaussianBelief::new(0.3, 0.09).unwrap();
        let mc = MonteCarloPsi::new(5, 20_000, SafetyHorizon { steps: 5, dt_eval: toy.dt });
        for x in [0.0, 0.5, 0.8] {
            let exact = toy.exact_psi(x, &b, 5);
            let est = mc.estimate(&toy, &x, &b).value;
            assert!((est - exact).abs() < 0.02, "x={x}: {est} vs {exact}");
        }
    }

    #[test]
    fn survival_limits() {
        assert_eq!(brownian_survival(1.0, 0.0, 1.0, 1.0, 1.0), 0.0);
        assert!(brownian_survival(-50.0, 0.0, 1.0, 1.0, 1.0) > 1.0 - 1e-12);
        // driftless reflection principle: 2Φ(d/√τ) − 1
        let p = brownian_survival(0.0, 0.0, 1.0, 1.0, 1.0);
        assert!((p - (2.0 * normal_cdf(1.0) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn certified_episode_is_reproducible() {
        let toy = ToyWalk::default();
        let beliefs = vec![GaussianBelief::new(0.0, 0.01).unwrap(); 6];
        let cfg = PscConfig {
            epsilon: 0.1,
            gamma_gain: 1.0,
            dt: toy.dt,
            mc_samples: 1,
            inner_samples: 1,
            horizon: SafetyHorizon { steps: 3, dt_eval: toy.dt },
            candidates: vec![-1.0, 0.0, 1.0],
        };
        let run = || certified_episode(&toy, &beliefs, 0.0, 1.0, &cfg, &mut stream_rng(9, family::PLANT, 0));
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.psi.len(), 6);
        assert_eq!(a.states.len(), 6);
    }
}
