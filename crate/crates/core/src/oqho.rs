//! Open quantum harmonic oscillator models.
//!
//! An oscillator is specified by its CCR matrix Θ, Hamiltonian matrix K,
//! system-field coupling M and cost weight Π. From these we derive the
//! drift/dispersion pair `A = 2Θ(K + MᵀJM)`, `B = 2ΘMᵀ`, the invariant
//! Gaussian state with covariance `P + iΘ`, and the two-point kernels
//! Σ(τ), Λ(τ) and Z(τ).

use nalgebra::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matnum::{
    complexify, expm, min_symmetric_eigenvalue, operator_norm_real, solve_lyapunov,
    spectral_abscissa, sqrtm_psd, ComplexMatrix, RealMatrix, PSD_CLAMP,
};

/// Canonical symplectic block matrix `[[0, I], [-I, 0]]` of even order.
pub fn symplectic_j(order: usize) -> RealMatrix {
    assert!(order % 2 == 0, "symplectic form needs even order, got {order}");
    let h = order / 2;
    let mut j = RealMatrix::zeros(order, order);
    for k in 0..h {
        j[(k, h + k)] = 1.0;
        j[(h + k, k)] = -1.0;
    }
    j
}

/// Ito matrix `Ω = I + iJ` of vacuum input fields.
///
/// Only `Re Ω = I` enters the Lyapunov equation; `Im Ω = J` shows up through
/// the `B J Bᵀ` term of the realizability residual.
pub fn ito_matrix(m: usize) -> ComplexMatrix {
    complexify(&RealMatrix::identity(m, m), &symplectic_j(m))
}

/// Physical parameters of an oscillator and its quadratic cost.
#[derive(Debug, Clone, PartialEq)]
pub struct OqhoParams {
    /// CCR matrix, n×n, antisymmetric and nonsingular.
    pub theta: RealMatrix,
    /// Hamiltonian matrix, n×n symmetric.
    pub k: RealMatrix,
    /// Coupling matrix, m×n.
    pub coupling: RealMatrix,
    /// Cost weight, n×n symmetric PSD.
    pub pi: RealMatrix,
}

impl OqhoParams {
    /// Builds and validates a parameter set with default tolerances.
    pub fn new(theta: RealMatrix, k: RealMatrix, coupling: RealMatrix, pi: RealMatrix) -> Result<Self> {
        let p = Self { theta, k, coupling, pi };
        p.validate(&Tolerances::default())?;
        Ok(p)
    }

    /// The two-mode reference oscillator: Θ = J, K = 0, M = I, Π = I.
    pub fn unit_oscillator() -> Self {
        Self {
            theta: symplectic_j(2),
            k: RealMatrix::zeros(2, 2),
            coupling: RealMatrix::identity(2, 2),
            pi: RealMatrix::identity(2, 2),
        }
    }

    /// Number of system variables.
    pub fn n(&self) -> usize {
        self.theta.nrows()
    }

    /// Number of field channels.
    pub fn m(&self) -> usize {
        self.coupling.nrows()
    }

    /// Checks shapes first, then the algebraic invariants.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let n = self.n();
        let m = self.m();
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if n == 0 || n % 2 != 0 {
            return bad(format!("n must be even and positive, got {n}"));
        }
        if m == 0 || m % 2 != 0 {
            return bad(format!("m must be even and positive, got {m}"));
        }
        if !self.theta.is_square() {
            return bad(format!("Theta must be square, got {:?}", self.theta.shape()));
        }
        for (name, mat, shape) in [
            ("K", &self.k, (n, n)),
            ("M", &self.coupling, (m, n)),
            ("Pi", &self.pi, (n, n)),
        ] {
            if mat.shape() != shape {
                return bad(format!("{name} must be {shape:?}, got {:?}", mat.shape()));
            }
        }
        if let Some(x) = [&self.theta, &self.k, &self.coupling, &self.pi]
            .iter()
            .flat_map(|m| m.iter())
            .find(|x| !x.is_finite())
        {
            return bad(format!("non-finite entry {x}"));
        }

        let theta_norm = operator_norm_real(&self.theta);
        let asym = (&self.theta + self.theta.transpose()).amax();
        if asym > tol.symmetry * (1.0 + theta_norm) {
            return bad(format!("Theta is not antisymmetric (|Θ+Θᵀ| = {asym:e})"));
        }
        let det = self.theta.determinant().abs();
        if det <= tol.theta_singular * theta_norm.powi(n as i32) || theta_norm == 0.0 {
            return bad(format!("Theta is singular (|det| = {det:e})"));
        }
        let k_asym = (&self.k - self.k.transpose()).amax();
        if k_asym > tol.symmetry * (1.0 + self.k.amax()) {
            return bad(format!("K is not symmetric (|K-Kᵀ| = {k_asym:e})"));
        }
        let pi_asym = (&self.pi - self.pi.transpose()).amax();
        if pi_asym > tol.symmetry * (1.0 + self.pi.amax()) {
            return bad(format!("Pi is not symmetric (|Π-Πᵀ| = {pi_asym:e})"));
        }
        let pi_min = min_symmetric_eigenvalue(&self.pi);
        if pi_min < -PSD_CLAMP * operator_norm_real(&self.pi) {
            return bad(format!("Pi is not positive semidefinite (min eigenvalue {pi_min:e})"));
        }
        Ok(())
    }
}

/// Drift and dispersion matrices of `dX = A X dt + B dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub j: RealMatrix,
    /// `‖AΘ + ΘAᵀ + BJBᵀ‖` for the Θ the pair was built against.
    pub pr_residual: f64,
    pub abscissa: f64,
    pub hurwitz: bool,
}

impl StateSpace {
    /// Wraps an arbitrary (A, B) pair, measuring realizability against `theta`.
    pub fn from_matrices(a: RealMatrix, b: RealMatrix, theta: &RealMatrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || theta.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "A {:?}, B {:?}, Theta {:?}",
                a.shape(),
                b.shape(),
                theta.shape()
            )));
        }
        if b.ncols() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "B must have an even number of columns, got {}",
                b.ncols()
            )));
        }
        let abscissa = spectral_abscissa(&a);
        let mut ss = Self {
            j: symplectic_j(b.ncols()),
            a,
            b,
            pr_residual: 0.0,
            abscissa,
            hurwitz: abscissa < 0.0,
        };
        ss.pr_residual = check_physical_realizability(&ss, theta)?;
        Ok(ss)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Decay margin `-max Re spec(A)`; positive iff Hurwitz.
    pub fn decay_margin(&self) -> f64 {
        -self.abscissa
    }
}

/// `A = 2Θ(K + MᵀJM)`, `B = 2ΘMᵀ`.
pub fn build_state_space(params: &OqhoParams) -> Result<StateSpace> {
    build_state_space_with(params, &Tolerances::default())
}

pub fn build_state_space_with(params: &OqhoParams, tol: &Tolerances) -> Result<StateSpace> {
    params.validate(tol)?;
    let j = symplectic_j(params.m());
    let mt = params.coupling.transpose();
    let a = 2.0 * &params.theta * (&params.k + &mt * &j * &params.coupling);
    let b = 2.0 * &params.theta * mt;
    StateSpace::from_matrices(a, b, &params.theta)
}

/// Operator norm of `AΘ + ΘAᵀ + BJBᵀ`.
pub fn check_physical_realizability(ss: &StateSpace, theta: &RealMatrix) -> Result<f64> {
    let n = ss.a.nrows();
    if theta.shape() != (n, n) || ss.b.nrows() != n || ss.j.nrows() != ss.b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "A {:?}, B {:?}, J {:?}, Theta {:?}",
            ss.a.shape(),
            ss.b.shape(),
            ss.j.shape(),
            theta.shape()
        )));
    }
    let r = &ss.a * theta + theta * ss.a.transpose() + &ss.b * &ss.j * ss.b.transpose();
    Ok(operator_norm_real(&r))
}

/// Invariant Gaussian state of a stable oscillator under vacuum fields.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantModel {
    /// Real part of the quantum covariance `P + iΘ`.
    pub p: RealMatrix,
    pub theta: RealMatrix,
    /// Steady-state mean cost rate `tr(Π P)`.
    pub nominal_rate: f64,
}

impl InvariantModel {
    pub fn quantum_covariance(&self) -> ComplexMatrix {
        complexify(&self.p, &self.theta)
    }
}

/// Solves `AP + PAᵀ + BBᵀ = 0` and evaluates `tr(Π P)`.
pub fn invariant_model(params: &OqhoParams, ss: &StateSpace) -> Result<InvariantModel> {
    if !ss.hurwitz {
        return Err(Error::NotHurwitz { abscissa: ss.abscissa });
    }
    let bbt = &ss.b * ss.b.transpose();
    let p = solve_lyapunov(&ss.a, &bbt)?;
    let nominal_rate = (&params.pi * &p).trace().max(0.0);
    Ok(InvariantModel {
        p,
        theta: params.theta.clone(),
        nominal_rate,
    })
}

fn two_point(a: &RealMatrix, base: &RealMatrix, tau: f64) -> RealMatrix {
    if tau >= 0.0 {
        expm(&(a * tau)) * base
    } else {
        base * expm(&(a.transpose() * -tau))
    }
}

/// Two-point CCR matrix Λ(τ): `e^{τA}Θ` for τ ≥ 0, `Θe^{-τAᵀ}` otherwise.
pub fn ccr_kernel(ss: &StateSpace, theta: &RealMatrix, tau: f64) -> RealMatrix {
    two_point(&ss.a, theta, tau)
}

/// Two-point covariance Σ(τ), built from P the way Λ is built from Θ.
pub fn covariance_kernel(inv: &InvariantModel, ss: &StateSpace, tau: f64) -> RealMatrix {
    two_point(&ss.a, &inv.p, tau)
}

/// Z(τ) = √Π (Σ(τ) + iΛ(τ)) √Π.
pub fn weighted_covariance(
    params: &OqhoParams,
    inv: &InvariantModel,
    ss: &StateSpace,
    tau: f64,
) -> Result<ComplexMatrix> {
    let root = sqrtm_psd(&params.pi)?;
    Ok(weighted_covariance_with_root(&root, inv, ss, tau))
}

/// Z(τ) for a precomputed `√Π`.
pub fn weighted_covariance_with_root(
    sqrt_pi: &RealMatrix,
    inv: &InvariantModel,
    ss: &StateSpace,
    tau: f64,
) -> ComplexMatrix {
    let e = if tau >= 0.0 {
        expm(&(&ss.a * tau))
    } else {
        expm(&(ss.a.transpose() * -tau))
    };
    let (sigma, lambda) = if tau >= 0.0 {
        (&e * &inv.p, &e * &inv.theta)
    } else {
        (&inv.p * &e, &inv.theta * &e)
    };
    let re = sqrt_pi * sigma * sqrt_pi;
    let im = sqrt_pi * lambda * sqrt_pi;
    ComplexMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
        Complex::new(re[(i, j)], im[(i, j)])
    })
}

/// Draws a random oscillator with a Hurwitz drift.
///
/// K is symmetrized standard normal, M has standard normal entries, Θ is the
/// canonical symplectic form and Π = GGᵀ/n for standard normal G. Draws whose
/// drift has spectral abscissa above `-min_margin` are rejected.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, min_margin: f64) -> OqhoParams {
    assert!(n % 2 == 0 && m % 2 == 0 && n > 0 && m > 0);
    let mut normal = |r: usize, c: usize| RealMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    loop {
        let g = normal(n, n);
        let k = (&g + g.transpose()) * 0.5;
        let coupling = normal(m, n);
        let h = normal(n, n);
        let pi = &h * h.transpose() / n as f64;
        let params = OqhoParams {
            theta: symplectic_j(n),
            k,
            coupling,
            pi: (&pi + pi.transpose()) * 0.5,
        };
        let Ok(ss) = build_state_space(&params) else {
            continue;
        };
        if ss.abscissa < -min_margin {
            return params;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matnum::{operator_norm, to_complex};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn worked() -> (OqhoParams, StateSpace, InvariantModel) {
        let p = OqhoParams::unit_oscillator();
        let ss = build_state_space(&p).unwrap();
        let inv = invariant_model(&p, &ss).unwrap();
        (p, ss, inv)
    }

    #[test]
    fn j_squares_to_minus_identity() {
        for m in [2, 4, 6] {
            let j = symplectic_j(m);
            assert_eq!(&j * &j, -RealMatrix::identity(m, m));
            assert_eq!(&j * j.transpose(), RealMatrix::identity(m, m));
        }
    }

    #[test]
    fn ito_matrix_is_hermitian_psd() {
        let omega = ito_matrix(2);
        assert_eq!(omega.adjoint(), omega);
        assert_abs_diff_eq!(operator_norm(&omega), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn worked_state_space() {
        let (_, ss, _) = worked();
        assert!((&ss.a + RealMatrix::identity(2, 2) * 2.0).amax() < 1e-15);
        assert!((&ss.b - symplectic_j(2) * 2.0).amax() < 1e-15);
        assert!(ss.hurwitz);
        assert!(ss.pr_residual <= 1e-12);
    }

    #[test]
    fn zero_coupling_is_not_hurwitz() {
        let mut p = OqhoParams::unit_oscillator();
        p.coupling = RealMatrix::zeros(2, 2);
        let ss = build_state_space(&p).unwrap();
        assert_eq!(ss.a, RealMatrix::zeros(2, 2));
        assert_eq!(ss.b, RealMatrix::zeros(2, 2));
        assert!(!ss.hurwitz);
        assert!(matches!(invariant_model(&p, &ss), Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn realizability_residual_cases() {
        let theta = symplectic_j(2);
        let a = RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let ss = StateSpace::from_matrices(a, RealMatrix::zeros(2, 2), &theta).unwrap();
        assert_abs_diff_eq!(ss.pr_residual, 3.0, epsilon = 1e-14);

        // A = -I gives AΘ + ΘAᵀ = -2Θ, not zero.
        let ss = StateSpace::from_matrices(-RealMatrix::identity(2, 2), RealMatrix::zeros(2, 2), &theta).unwrap();
        assert_abs_diff_eq!(check_physical_realizability(&ss, &theta).unwrap(), 2.0, epsilon = 1e-14);

        assert!(matches!(
            check_physical_realizability(&ss, &symplectic_j(4)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let base = OqhoParams::unit_oscillator();

        let mut p = base.clone();
        p.theta = RealMatrix::identity(2, 2);
        assert!(matches!(build_state_space(&p), Err(Error::InvalidParams(_))));

        let mut p = base.clone();
        p.theta = RealMatrix::zeros(2, 2);
        assert!(matches!(build_state_space(&p), Err(Error::InvalidParams(_))));

        let mut p = base.clone();
        p.k = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(build_state_space(&p), Err(Error::InvalidParams(_))));

        let mut p = base.clone();
        p.pi = -RealMatrix::identity(2, 2);
        assert!(matches!(build_state_space(&p), Err(Error::InvalidParams(_))));

        let mut p = base.clone();
        p.coupling = RealMatrix::identity(3, 2);
        assert!(matches!(build_state_space(&p), Err(Error::InvalidParams(_))));

        let mut p = base;
        p.k[(0, 0)] = f64::NAN;
        assert!(matches!(build_state_space(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn worked_invariant_state() {
        let (p, ss, inv) = worked();
        assert!((&inv.p - RealMatrix::identity(2, 2)).amax() < 1e-14);
        assert_abs_diff_eq!(inv.nominal_rate, 2.0, epsilon = 1e-14);

        let mut zero_cost = p.clone();
        zero_cost.pi = RealMatrix::zeros(2, 2);
        let inv0 = invariant_model(&zero_cost, &ss).unwrap();
        assert_eq!(inv0.nominal_rate, 0.0);
    }

    #[test]
    fn ccr_kernel_values() {
        let (p, ss, _) = worked();
        assert_eq!(ccr_kernel(&ss, &p.theta, 0.0), p.theta);
        let l1 = ccr_kernel(&ss, &p.theta, 1.0);
        assert!((l1 - symplectic_j(2) * (-2f64).exp()).amax() < 1e-15);
    }

    #[test]
    fn covariance_kernel_values() {
        let (_, ss, inv) = worked();
        assert_eq!(covariance_kernel(&inv, &ss, 0.0), inv.p);
        let s = covariance_kernel(&inv, &ss, 0.5);
        assert!((s - RealMatrix::identity(2, 2) * (-1f64).exp()).amax() < 1e-14);
    }

    #[test]
    fn kernel_reflection_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_params(&mut rng, 4, 2, 1e-2);
        let ss = build_state_space(&p).unwrap();
        let inv = invariant_model(&p, &ss).unwrap();
        for k in 1..=50 {
            let tau = 0.1 * k as f64;
            let l = ccr_kernel(&ss, &p.theta, tau);
            let lm = ccr_kernel(&ss, &p.theta, -tau);
            assert!((lm + l.transpose()).amax() < 1e-10);
            let s = covariance_kernel(&inv, &ss, tau);
            let sm = covariance_kernel(&inv, &ss, -tau);
            assert!((sm - s.transpose()).amax() < 1e-10);
        }
    }

    #[test]
    fn weighted_covariance_values() {
        let (p, ss, inv) = worked();
        let z0 = weighted_covariance(&p, &inv, &ss, 0.0).unwrap();
        assert_abs_diff_eq!(operator_norm(&z0), 2.0, epsilon = 1e-14);
        let z1 = weighted_covariance(&p, &inv, &ss, 1.0).unwrap();
        assert_abs_diff_eq!(operator_norm(&z1), 2.0 * (-2f64).exp(), epsilon = 1e-14);

        let mut zero_cost = p;
        zero_cost.pi = RealMatrix::zeros(2, 2);
        let z = weighted_covariance(&zero_cost, &inv, &ss, 0.3).unwrap();
        assert_eq!(z, to_complex(&RealMatrix::zeros(2, 2)));
    }

    #[test]
    fn weighted_covariance_norm_decreases_on_worked_model() {
        let (p, ss, inv) = worked();
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let z = weighted_covariance(&p, &inv, &ss, 0.125 * k as f64).unwrap();
            let norm = operator_norm(&z);
            assert!(norm <= prev + 1e-15);
            prev = norm;
        }
    }

    #[test]
    fn random_params_are_valid_and_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_params(&mut rng, 4, 4, 1e-3);
            let ss = build_state_space(&p).unwrap();
            assert!(ss.hurwitz);
            let inv = invariant_model(&p, &ss).unwrap();
            assert!(min_symmetric_eigenvalue(&inv.p) >= -1e-10);
        }
    }
}
