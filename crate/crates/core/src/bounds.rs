//! Growth-rate bounds for the quadratic-exponential functional and the
//! resulting worst-case quadratic cost over relative-entropy balls.
//!
//! Everything here is a rate per unit time. Given a decay certificate
//! `(μ, Γ, α)` for an n-dimensional oscillator:
//!
//! * `γ(θ) ≤ (n/2)(μ - √(μ² - 4θαμ))` for `0 ≤ θ < μ/(4α)`;
//! * the worst-case cost rate over states whose relative-entropy rate is at
//!   most ε is bounded by `inf_θ (ε + γ(θ))/θ = nα(1 + σ + √(σ(2+σ)))`
//!   with `σ = 2ε/(nμ)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::certificate::DecayCertificate;
use crate::error::{Error, Result};
use crate::quad::{integrate, MAX_SUBINTERVALS};

/// One sample of the objective `θ ↦ (ε + γ(θ))/θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub gamma: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustBound {
    pub eps: f64,
    /// Dimensionless threshold `2ε/(nμ)`.
    pub sigma: f64,
    pub theta_star: f64,
    pub bound: f64,
    pub theta_max: f64,
    /// Set when the infimum sits on the edge of the θ-range (ε = 0 or a
    /// vanishing cost weight) and `theta_star` is a limit, not a minimizer.
    pub boundary: bool,
    pub mu: f64,
    pub alpha: f64,
    pub n: usize,
    pub curve: Vec<CurvePoint>,
}

fn check_theta(theta: f64, cert: &DecayCertificate) -> Result<()> {
    let theta_max = cert.theta_max();
    if !(theta >= 0.0 && theta < theta_max) {
        return Err(Error::ThetaOutOfRange { theta, theta_max });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeEps(eps))
    }
}

/// Closed-form growth-rate bound `(n/2)(μ - √(μ² - 4θαμ))`.
pub fn qef_rate_bound_closed(theta: f64, n: usize, cert: &DecayCertificate) -> Result<f64> {
    check_theta(theta, cert)?;
    Ok(gamma_closed(theta, n, cert.mu, cert.alpha))
}

// Rationalized to avoid cancellation at small θ.
fn gamma_closed(theta: f64, n: usize, mu: f64, alpha: f64) -> f64 {
    let c = 4.0 * theta * alpha * mu;
    let root = (mu * mu - c).max(0.0).sqrt();
    0.5 * n as f64 * c / (mu + root)
}

/// The same bound evaluated as the spectral integral
/// `-(n/4π) ∫ ln(1 - 2θF(λ)) dλ` with `F(λ) = 2αμ/(λ² + μ²)`.
///
/// The integral is split at a cutoff Λc: adaptive quadrature on `[0, Λc]`
/// and a two-term series for the tail, with Λc chosen so that the
/// truncated series contributes less than `quad_tol / 4`.
pub fn qef_rate_bound_integral(theta: f64, n: usize, cert: &DecayCertificate, quad_tol: f64) -> Result<f64> {
    check_theta(theta, cert)?;
    if !(quad_tol > 0.0) {
        return Err(Error::ConfigInvalid(format!("quadrature tolerance must be positive, got {quad_tol}")));
    }
    let mu = cert.mu;
    // x(λ) = 2θF(λ) = c / (λ² + μ²)
    let c = 4.0 * theta * cert.alpha * mu;
    if c == 0.0 {
        return Ok(0.0);
    }
    let scale = n as f64 / (2.0 * PI); // symmetric integrand, doubled half-line

    // Tail remainder after two series terms: -ln(1-x) - x - x²/2 ≤ x³ for
    // x ≤ 1/2, and ∫_Λc^∞ x³ ≤ c³ / (5 Λc⁵).
    let tail_budget = quad_tol / (4.0 * scale);
    let cutoff = (c * c * c / (5.0 * tail_budget))
        .powf(0.2)
        .max((2.0 * c).sqrt())
        .max(10.0 * mu);

    let (head, _) = integrate(
        |lambda| {
            let x = c / (lambda * lambda + mu * mu);
            -(-x).ln_1p()
        },
        0.0,
        cutoff,
        quad_tol / (2.0 * scale),
        MAX_SUBINTERVALS,
    )?;

    // ∫_Λc^∞ dλ/(λ²+μ²) and ∫_Λc^∞ dλ/(λ²+μ²)²
    let rest = PI / 2.0 - (cutoff / mu).atan();
    let first = c / mu * rest;
    let second = c * c / (2.0 * mu.powi(3)) * (rest - mu * cutoff / (cutoff * cutoff + mu * mu));
    let tail = first + 0.5 * second;

    Ok(scale * (head + tail))
}

/// Closed-form worst-case bound and its minimizing risk-sensitivity.
pub fn worst_case_bound_closed(eps: f64, n: usize, cert: &DecayCertificate) -> Result<RobustBound> {
    check_eps(eps)?;
    let (mu, alpha) = (cert.mu, cert.alpha);
    let nf = n as f64;
    let sigma = 2.0 * eps / (nf * mu);
    let root = (sigma * (2.0 + sigma)).sqrt();
    let bound = nf * alpha * (1.0 + sigma + root);
    let theta_max = cert.theta_max();

    let (theta_star, boundary) = if sigma == 0.0 || alpha == 0.0 {
        (0.0, true)
    } else {
        // (1 + σ - r) = 1 / (1 + σ + r)
        (mu / (2.0 * alpha) * root / (1.0 + sigma + root), false)
    };
    Ok(RobustBound {
        eps,
        sigma,
        theta_star,
        bound,
        theta_max,
        boundary,
        mu,
        alpha,
        n,
        curve: Vec::new(),
    })
}

/// Grid of fractions of θ_max, log-spaced towards both ends of (0, 1).
fn theta_fractions(points: usize) -> Vec<f64> {
    let low = points / 2;
    let high = points - low;
    let mut u: Vec<f64> = (0..low)
        .map(|k| 10f64.powf(-9.0 + (9.0 - 0.5f64.log10().abs()) * k as f64 / low as f64))
        .collect();
    // 1 - u from 0.5 down to 1e-12
    u.extend((0..high).map(|k| {
        let t = k as f64 / (high - 1).max(1) as f64;
        1.0 - 0.5 * 10f64.powf(-t * (12.0 + 0.5f64.log10())).min(1.0)
    }));
    u.retain(|x| *x > 0.0 && *x < 1.0);
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..300 {
        if (b - a) <= rel_tol * (a.abs() + b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes `(ε + γ(θ))/θ` numerically: a θ-grid search followed by
/// golden-section refinement on the bracket around the best grid point.
/// The objective is convex in θ, so the bracket holds the minimizer.
pub fn worst_case_bound_numeric(eps: f64, n: usize, cert: &DecayCertificate, grid: usize) -> Result<RobustBound> {
    check_eps(eps)?;
    if grid < 16 {
        return Err(Error::ConfigInvalid(format!("theta grid needs at least 16 points, got {grid}")));
    }
    let mut closed = worst_case_bound_closed(eps, n, cert)?;
    if cert.alpha == 0.0 {
        // γ ≡ 0; the infimum of ε/θ over θ > 0 is 0.
        return Ok(closed);
    }
    let (mu, alpha) = (cert.mu, cert.alpha);
    let theta_max = cert.theta_max();
    let objective = |theta: f64| (eps + gamma_closed(theta, n, mu, alpha)) / theta;

    let curve = objective_curve(eps, n, cert, grid);
    let best = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective))
        .map(|(k, _)| k)
        .expect("theta grid is nonempty");

    let lo = if best == 0 { curve[0].theta * 1e-3 } else { curve[best - 1].theta };
    let hi = curve.get(best + 1).map_or(theta_max, |p| p.theta);
    let (theta_star, value) = golden_section_min(objective, lo, hi, 1e-13);
    let (theta_star, value) = if value <= curve[best].objective {
        (theta_star, value)
    } else {
        (curve[best].theta, curve[best].objective)
    };

    closed.theta_star = theta_star;
    closed.bound = value;
    closed.boundary = eps == 0.0 || best == 0;
    closed.curve = curve;
    Ok(closed)
}

/// Closed-form bounds for each threshold, sorted by ε ascending.
pub fn sweep(eps_list: &[f64], n: usize, cert: &DecayCertificate) -> Result<Vec<RobustBound>> {
    for &eps in eps_list {
        check_eps(eps)?;
    }
    let mut sorted = eps_list.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|eps| worst_case_bound_closed(eps, n, cert))
        .collect()
}

/// Samples `(θ, γ(θ), (ε + γ(θ))/θ)` on the numeric minimizer's grid.
pub fn objective_curve(eps: f64, n: usize, cert: &DecayCertificate, grid: usize) -> Vec<CurvePoint> {
    if cert.alpha == 0.0 {
        return Vec::new();
    }
    let theta_max = cert.theta_max();
    theta_fractions(grid)
        .into_iter()
        .map(|u| {
            let theta = u * theta_max;
            let gamma = gamma_closed(theta, n, cert.mu, cert.alpha);
            CurvePoint {
                theta,
                gamma,
                objective: (eps + gamma) / theta,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matnum::RealMatrix;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn cert(mu: f64, alpha: f64) -> DecayCertificate {
        DecayCertificate {
            mu,
            gamma: RealMatrix::identity(2, 2),
            alpha,
        }
    }

    fn worked() -> DecayCertificate {
        cert(1.0, 2.0)
    }

    #[test]
    fn closed_growth_rate_values() {
        let c = worked();
        assert_eq!(qef_rate_bound_closed(0.0, 2, &c).unwrap(), 0.0);
        assert_abs_diff_eq!(qef_rate_bound_closed(3.0 / 32.0, 2, &c).unwrap(), 0.5, epsilon = 1e-15);
        let near = qef_rate_bound_closed(0.125 * (1.0 - 1e-14), 2, &c).unwrap();
        assert_abs_diff_eq!(near, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn closed_growth_rate_range() {
        let c = worked();
        for theta in [0.125, 0.2, -1e-9, f64::NAN] {
            assert!(matches!(
                qef_rate_bound_closed(theta, 2, &c),
                Err(Error::ThetaOutOfRange { .. })
            ));
            assert!(matches!(
                qef_rate_bound_integral(theta, 2, &c, 1e-9),
                Err(Error::ThetaOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn integral_matches_closed_form_on_worked_certificate() {
        let c = worked();
        assert_eq!(qef_rate_bound_integral(0.0, 2, &c, 1e-9).unwrap(), 0.0);
        let v = qef_rate_bound_integral(3.0 / 32.0, 2, &c, 1e-9).unwrap();
        // ∫ ln((λ²+a²)/(λ²+μ²)) dλ = 2π(a - μ) with a = μ√(1-u), u = 4θα/μ
        let a = (1.0f64 - 0.75).sqrt();
        let oracle = -(2.0 / (4.0 * PI)) * 2.0 * PI * (a - 1.0);
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-8);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn integral_near_critical_theta() {
        let c = cert(0.7, 3.1);
        let theta = 0.999 * c.theta_max();
        let v = qef_rate_bound_integral(theta, 4, &c, 1e-9).unwrap();
        let w = qef_rate_bound_closed(theta, 4, &c).unwrap();
        assert_abs_diff_eq!(v, w, epsilon = 1e-8);
    }

    #[test]
    fn worked_bound_without_uncertainty() {
        let b = worst_case_bound_closed(0.0, 2, &worked()).unwrap();
        assert_abs_diff_eq!(b.bound, 4.0, epsilon = 1e-15);
        assert_eq!(b.theta_star, 0.0);
        assert!(b.boundary);
        assert_eq!(b.sigma, 0.0);
    }

    #[test]
    fn worked_bound_unit_threshold() {
        let b = worst_case_bound_closed(1.0, 2, &worked()).unwrap();
        assert_abs_diff_eq!(b.sigma, 1.0);
        assert_abs_diff_eq!(b.bound, 4.0 * (2.0 + 3f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(b.theta_star, (2.0 * 3f64.sqrt() - 3.0) / 4.0, epsilon = 1e-14);
        assert!(!b.boundary);
        assert!(b.theta_star > 0.0 && b.theta_star < b.theta_max);
    }

    #[test]
    fn huge_threshold_pushes_theta_to_range_end() {
        let b = worst_case_bound_closed(1e6, 2, &worked()).unwrap();
        assert_relative_eq!(b.theta_star, 0.125, max_relative = 1e-6);
        assert!(b.theta_star < 0.125);
    }

    #[test]
    fn negative_threshold_rejected() {
        let c = worked();
        assert!(matches!(worst_case_bound_closed(-0.1, 2, &c), Err(Error::NegativeEps(_))));
        assert!(matches!(worst_case_bound_numeric(-0.1, 2, &c, 64), Err(Error::NegativeEps(_))));
        assert!(matches!(sweep(&[0.0, -1.0], 2, &c), Err(Error::NegativeEps(_))));
    }

    #[test]
    fn numeric_matches_closed_form_on_worked_certificate() {
        let b = worst_case_bound_numeric(1.0, 2, &worked(), 64).unwrap();
        assert_abs_diff_eq!(b.bound, 14.9282, epsilon = 1e-4);
        assert_abs_diff_eq!(b.theta_star, 0.116025, epsilon = 1e-5);
        assert!(!b.curve.is_empty());
    }

    #[test]
    fn numeric_without_uncertainty_approaches_n_alpha() {
        let b = worst_case_bound_numeric(0.0, 2, &worked(), 64).unwrap();
        assert_abs_diff_eq!(b.bound, 4.0, epsilon = 1e-4);
        assert!(b.boundary);
    }

    #[test]
    fn numeric_grid_refinement() {
        for eps in [0.0, 0.05, 1.0, 30.0] {
            let coarse = worst_case_bound_numeric(eps, 2, &worked(), 64).unwrap();
            let fine = worst_case_bound_numeric(eps, 2, &worked(), 1024).unwrap();
            assert!(fine.bound <= coarse.bound + 1e-9, "eps {eps}");
        }
    }

    #[test]
    fn numeric_rejects_small_grid() {
        assert!(matches!(
            worst_case_bound_numeric(1.0, 2, &worked(), 8),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn sweep_cases() {
        let c = worked();
        assert!(sweep(&[], 2, &c).unwrap().is_empty());
        let one = sweep(&[0.0], 2, &c).unwrap();
        assert_abs_diff_eq!(one[0].bound, 4.0);
        let rows = sweep(&[1.0, 0.0, 0.5], 2, &c).unwrap();
        let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        assert_eq!(eps, vec![0.0, 0.5, 1.0]);
        assert!(rows.windows(2).all(|w| w[0].bound <= w[1].bound));
    }

    #[test]
    fn vanishing_alpha_is_degenerate() {
        let c = cert(1.0, 0.0);
        let b = worst_case_bound_closed(1.0, 2, &c).unwrap();
        assert_eq!(b.bound, 0.0);
        assert!(b.boundary);
        assert_eq!(qef_rate_bound_closed(10.0, 2, &c).unwrap(), 0.0);
        assert_eq!(worst_case_bound_numeric(1.0, 2, &c, 32).unwrap().bound, 0.0);
    }

    #[test]
    fn theta_fractions_cover_both_ends() {
        let u = theta_fractions(64);
        assert!(u[0] <= 1e-8);
        assert!(1.0 - u[u.len() - 1] <= 1e-11);
        assert!(u.windows(2).all(|w| w[0] < w[1]));
    }
}
