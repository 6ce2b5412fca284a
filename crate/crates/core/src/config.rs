use serde::{Deserialize, Serialize};

/// Numeric tolerances and grid sizes used across the pipeline.
///
/// Defaults match the documented contracts; a run may override any field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative Lyapunov residual, scaled by `1 + ‖Q‖`.
    pub lyapunov_residual: f64,
    /// Relative realizability residual, scaled by `1 + ‖A‖‖Θ‖`.
    pub realizability: f64,
    /// `|det Θ| > theta_singular · ‖Θ‖ⁿ`.
    pub theta_singular: f64,
    /// Absolute symmetry slack for K and Π.
    pub symmetry: f64,
    /// Loewner-order slack for the Lyapunov inequality.
    pub ali: f64,
    /// Slack for sampled decay margins `α e^{-μ|τ|} - ‖Z(τ)‖`.
    pub decay_margin: f64,
    /// Absolute quadrature tolerance for the spectral integrals.
    pub quad_tol: f64,
    /// Points on the sampled τ-grid used to verify a certificate.
    pub tau_points: usize,
    /// The τ-grid spans `[0, tau_span / μ]`.
    pub tau_span: f64,
    /// μ-grid size for certificate optimization.
    pub mu_grid: usize,
    /// θ-grid size for numeric bound minimization.
    pub theta_grid: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lyapunov_residual: 1e-10,
            realizability: 1e-10,
            theta_singular: 1e-12,
            symmetry: 1e-12,
            ali: 1e-9,
            decay_margin: 1e-9,
            quad_tol: 1e-9,
            tau_points: 50,
            tau_span: 10.0,
            mu_grid: 64,
            theta_grid: 256,
        }
    }
}
