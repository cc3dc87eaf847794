use super::{CertificateError, SafetyEstimate};
use crate::belief::GaussianBelief;

/// Finite-difference gradient and Hessian of a safety-probability surface.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiDerivatives {
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    /// Largest 95% half-width among the gradient components, propagated from
    /// the point estimates as if they were independent.
    pub gradient_half_width: f64,
}

/// Central differences of `psi` around `x` with per-coordinate steps `h`.
///
/// `psi` should reuse one seed for every call so the differences are taken
/// on common random numbers.
pub fn psi_derivatives<F>(psi: F, x: &[f64], h: &[f64]) -> PsiDerivatives
where
    F: Fn(&[f64]) -> SafetyEstimate,
{
    assert_eq!(x.len(), h.len(), "one step per coordinate");
    let n = x.len();
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, d) in moves {
            y[i] += d;
        }
        psi(&y)
    };
    let center = psi(x);
    let mut gradient = vec![0.0; n];
    let mut hessian = vec![vec![0.0; n]; n];
    let mut hw: f64 = 0.0;
    for i in 0..n {
        let up = shifted(&[(i, h[i])]);
        let dn = shifted(&[(i, -h[i])]);
        gradient[i] = (up.value - dn.value) / (2.0 * h[i]);
        hessian[i][i] = (up.value - 2.0 * center.value + dn.value) / (h[i] * h[i]);
        hw = hw.max(up.half_width.hypot(dn.half_width) / (2.0 * h[i]));
        for j in 0..i {
            let pp = shifted(&[(i, h[i]), (j, h[j])]).value;
            let pm = shifted(&[(i, h[i]), (j, -h[j])]).value;
            let mp = shifted(&[(i, -h[i]), (j, h[j])]).value;
            let mm = shifted(&[(i, -h[i]), (j, -h[j])]).value;
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hessian[i][j] = v;
            hessian[j][i] = v;
        }
    }
    PsiDerivatives { gradient, hessian, gradient_half_width: hw }
}

/// Infinitesimal drift of `Ψ` along the diffusion: `∇Ψ·E[f] + ½ Σᵢ σᵢ² ∂ᵢ²Ψ`
/// for diagonal noise with per-channel scales `sigma`.
///
/// Fails when `max_half_width` is given and the gradient estimate is noisier.
pub fn ito_drift_term(
    derivs: &PsiDerivatives,
    expected_drift: &[f64],
    sigma: &[f64],
    max_half_width: Option<f64>,
) -> Result<f64, CertificateError> {
    if let Some(threshold) = max_half_width {
        if derivs.gradient_half_width > threshold {
            return Err(CertificateError::HighVariance { half_width: derivs.gradient_half_width, threshold });
        }
    }
    let first: f64 = derivs.gradient.iter().zip(expected_drift).map(|(g, f)| g * f).sum();
    let second: f64 = sigma.iter().enumerate().map(|(i, s)| s * s * derivs.hessian[i][i]).sum();
    Ok(first + 0.5 * second)
}

/// `E[f(ξ)]` for `ξ` distributed as `belief`, by three-point Gauss–Hermite
/// quadrature (exact for polynomials up to degree five).
pub fn expected_under(belief: &GaussianBelief, f: impl Fn(f64) -> Vec<f64>) -> Vec<f64> {
    let s = 3f64.sqrt() * belief.std();
    let nodes = [(belief.mean - s, 1.0 / 6.0), (belief.mean, 2.0 / 3.0), (belief.mean + s, 1.0 / 6.0)];
    let mut acc: Vec<f64> = Vec::new();
    for (xi, w) in nodes {
        let v = f(xi);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(v) {
            *a += w * b;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_surface_has_zero_drift() {
        let d = psi_derivatives(|_| SafetyEstimate::exact(0.8, 1), &[0.1, -0.3], &[1e-3, 1e-3]);
        let v = ito_drift_term(&d, &[2.0, -1.0], &[0.5, 0.5], None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn quadratic_surface_is_exact() {
        // Ψ = 0.5 − x² − x·y  → ∇ = (−2x − y, −x), diag Hessian = (−2, 0)
        let f = |p: &[f64]| SafetyEstimate::exact(0.5 - p[0] * p[0] - p[0] * p[1], 1);
        let d = psi_derivatives(f, &[0.2, 0.1], &[1e-3, 1e-3]);
        assert!((d.gradient[0] + 0.5).abs() < 1e-9);
        assert!((d.gradient[1] + 0.2).abs() < 1e-9);
        assert!((d.hessian[0][1] + 1.0).abs() < 1e-6);
        let v = ito_drift_term(&d, &[1.0, 0.0], &[0.3, 0.0], None).unwrap();
        assert!((v - (-0.5 + 0.5 * 0.09 * -2.0)).abs() < 1e-6);
    }

    #[test]
    fn noisy_gradient_is_flagged() {
        let f = |_: &[f64]| SafetyEstimate { value: 0.5, n_samples: 10, half_width: 0.3 };
        let d = psi_derivatives(f, &[0.0], &[0.01]);
        assert!(matches!(ito_drift_term(&d, &[1.0], &[0.1], Some(1.0)), Err(CertificateError::HighVariance { .. })));
    }

    #[test]
    fn quadrature_matches_moments() {
        let b = GaussianBelief::new(0.4, 0.09).unwrap();
        let m = expected_under(&b, |xi| vec![xi, xi * xi, xi.powi(4)]);
        assert!((m[0] - 0.4).abs() < 1e-14);
        assert!((m[1] - (0.16 + 0.09)).abs() < 1e-14);
        // E ξ⁴ = μ⁴ + 6μ²σ² + 3σ⁴
        assert!((m[2] - (0.0256 + 6.0 * 0.16 * 0.09 + 3.0 * 0.0081)).abs() < 1e-13);
    }
}
