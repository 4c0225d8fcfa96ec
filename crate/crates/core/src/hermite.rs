//! Normalized Hermite functions and Gauss-Hermite quadrature.
//!
//! Everything here works with the *functions* ψ̃_n(ξ) = H_n(ξ) e^{-ξ²/2} /
//! √(2ⁿ n! √π) rather than raw Hermite polynomials: the three-term recurrence
//! on ψ̃ stays O(1) in magnitude up to n in the hundreds, where 2ⁿn! would
//! overflow long before.

use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Fill `out[0..=n_max]` with ψ̃_0(ξ) ... ψ̃_{n_max}(ξ).
///
/// Recurrence: ψ̃_{n+1} = ξ√(2/(n+1))·ψ̃_n − √(n/(n+1))·ψ̃_{n−1}.
pub fn hermite_functions(n_max: usize, xi: f64, out: &mut [f64]) {
    debug_assert!(out.len() > n_max);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    out[0] = h0;
    if n_max == 0 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * xi * h0;
    for n in 1..n_max {
        let a = xi * (2.0 / (n as f64 + 1.0)).sqrt();
        let b = (n as f64 / (n as f64 + 1.0)).sqrt();
        out[n + 1] = a * out[n] - b * out[n - 1];
    }
}

/// Single normalized Hermite function ψ̃_n(ξ).
pub fn hermite_function(n: usize, xi: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    hermite_functions(n, xi, &mut buf);
    buf[n]
}

/// 1D harmonic-oscillator eigenfunction φ_n(x; ω) = ω^{1/4} ψ̃_n(√ω x),
/// normalized so ∫ φ_n² dx = 1.
pub fn ho_eigenfunction(n: usize, omega: f64, x: f64) -> f64 {
    omega.powf(0.25) * hermite_function(n, omega.sqrt() * x)
}

/// Gauss-Hermite rule for ∫ f(x) e^{-x²} dx ≈ Σ wᵢ f(xᵢ), exact for
/// polynomials of degree ≤ 2m-1.
///
/// `total_weights[i]` stores wᵢ·e^{xᵢ²}, the well-scaled combination needed
/// when the Gaussian weight is kept attached to the integrand; the raw wᵢ
/// underflow for large rules while these stay O(1).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub total_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("Gauss-Hermite rule needs at least one node".into()));
        }
        // Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix
        // with off-diagonal √(j/2).
        let mut jacobi = DMatrix::<f64>::zeros(m, m);
        for j in 1..m {
            let off = (j as f64 / 2.0).sqrt();
            jacobi[(j, j - 1)] = off;
            jacobi[(j - 1, j)] = off;
        }
        let eigen = SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eigen.eigenvalues.iter().cloned().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

        // Polish with Newton on ψ̃_m (ψ̃_m'(x) = √(2m)·ψ̃_{m-1}(x) − x·ψ̃_m(x)),
        // then form total weights from wᵢ = e^{-xᵢ²} / (m·ψ̃_{m-1}(xᵢ)²).
        let mut buf = vec![0.0; m + 1];
        let mut total_weights = Vec::with_capacity(m);
        for x in nodes.iter_mut() {
            for _ in 0..2 {
                hermite_functions(m, *x, &mut buf);
                let deriv = (2.0 * m as f64).sqrt() * buf[m - 1] - *x * buf[m];
                if deriv != 0.0 {
                    *x -= buf[m] / deriv;
                }
            }
            hermite_functions(m, *x, &mut buf);
            total_weights.push(1.0 / (m as f64 * buf[m - 1] * buf[m - 1]));
        }
        Ok(GaussHermite { nodes, total_weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫ f(x) e^{-x²} dx with f supplied bare.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.total_weights.iter())
            .map(|(&x, &t)| t * (-x * x).exp() * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_PI: f64 = 1.7724538509055160273;

    #[test]
    fn ground_state_peak_value() {
        // ψ̃_0(0) = π^{-1/4}
        assert!((hermite_function(0, 0.0) - std::f64::consts::PI.powf(-0.25)).abs() < 1e-15);
        // odd orders vanish at the origin
        assert_eq!(hermite_function(1, 0.0), 0.0);
        assert!(hermite_function(3, 0.0).abs() < 1e-15);
    }

    #[test]
    fn recurrence_norm_stable_to_n_200() {
        // trapezoid norm of ψ̃_n on a wide fine 1D grid
        for &n in &[0usize, 5, 50, 200] {
            let half_width = (2.0 * (n as f64 + 0.5)).sqrt() * 1.8 + 6.0;
            let steps = 40_000usize;
            let h = 2.0 * half_width / steps as f64;
            let mut buf = vec![0.0; n + 1];
            let mut norm = 0.0;
            for i in 0..=steps {
                let x = -half_width + i as f64 * h;
                hermite_functions(n, x, &mut buf);
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                norm += w * buf[n] * buf[n] * h;
            }
            assert!((norm - 1.0).abs() < 1e-6, "n={n}: norm={norm}");
        }
    }

    #[test]
    fn quadrature_moments_exact() {
        let rule = GaussHermite::new(8).unwrap();
        // ∫ e^{-x²} = √π, ∫ x² e^{-x²} = √π/2, ∫ x⁴ e^{-x²} = 3√π/4
        assert!((rule.integrate(|_| 1.0) - SQRT_PI).abs() < 1e-13);
        assert!((rule.integrate(|x| x * x) - SQRT_PI / 2.0).abs() < 1e-13);
        assert!((rule.integrate(|x| x.powi(4)) - 0.75 * SQRT_PI).abs() < 1e-13);
        // odd moments vanish by node symmetry
        assert!(rule.integrate(|x| x.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn quadrature_high_degree_exactness() {
        // x^14 needs m ≥ 8; Γ(7.5) / ... closed form: ∫x^{2k}e^{-x²} = √π (2k-1)!!/2^k
        let rule = GaussHermite::new(8).unwrap();
        let dfact13: f64 = (1..=13).step_by(2).map(|v| v as f64).product(); // 13!!
        let expect = SQRT_PI * dfact13 / 2f64.powi(7);
        let got = rule.integrate(|x| x.powi(14));
        assert!((got - expect).abs() < 1e-10 * expect, "{got} vs {expect}");
    }

    #[test]
    fn large_rule_stays_finite_and_positive() {
        let rule = GaussHermite::new(260).unwrap();
        assert!(rule.total_weights.iter().all(|w| w.is_finite() && *w > 0.0));
        assert!((rule.integrate(|_| 1.0) - SQRT_PI).abs() < 1e-11);
    }
}
