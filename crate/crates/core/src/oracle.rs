//! Classical-limit oracles for the covariance machinery.
//!
//! Treating the system variables as commuting random variables turns the
//! oscillator into an Ornstein–Uhlenbeck process `dx = Ax dt + B dw` driven
//! by a standard Wiener process. Two independent routes then estimate the
//! same cost rates: Euler–Maruyama Monte Carlo, and the large-deviations
//! spectral integral
//! `(1/(4πθ)) ∫ -ln det(I - 2θΦ(λ)) dλ`, `Φ(λ) = √Π G(iλ) BBᵀ G(iλ)* √Π`.

use std::cell::Cell;
use std::f64::consts::PI;

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matnum::{operator_norm_real, solve_lyapunov, sqrtm_psd, ComplexMatrix, RealMatrix};
use crate::oqho::{OqhoParams, StateSpace};
use crate::quad::{integrate, MAX_SUBINTERVALS};

/// Fraction of overflowing exponential moments above which an estimate is
/// flagged as unreliable.
pub const OVERFLOW_FLAG_FRACTION: f64 = 1e-3;

/// Largest exponent whose exponential is a finite `f64`.
const MAX_EXPONENT: f64 = 709.78;

/// Absolute accuracy of the spectral rate.
pub const SPECTRAL_RATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Time horizon T.
    pub horizon: f64,
    pub dt: f64,
    pub trajectories: usize,
    pub seed: u64,
    /// Risk-sensitivity for the exponential moment; 0 for the plain rate.
    pub theta: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= 10.0 * self.dt && self.horizon.is_finite()) {
            return bad(format!("horizon {} must be at least 10 dt", self.horizon));
        }
        if self.trajectories < 100 {
            return bad(format!("need at least 100 trajectories, got {}", self.trajectories));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return bad(format!("theta must be nonnegative, got {}", self.theta));
        }
        Ok(())
    }

    /// Default step `1e-3 · min(1, 1/‖A‖)`.
    pub fn default_dt(a: &RealMatrix) -> f64 {
        let norm = operator_norm_real(a);
        1e-3 * if norm > 1.0 { 1.0 / norm } else { 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    /// Mean of the per-path time-averaged cost `xᵀΠx` after burn-in.
    pub quad_rate_estimate: f64,
    pub quad_rate_stderr: f64,
    /// `(1/(θT')) ln E exp(θ ∫ xᵀΠx)` over the post-burn-in window T'.
    pub exp_rate_estimate: Option<f64>,
    pub exp_rate_stderr: Option<f64>,
    /// Steady-state target `tr(ΠP)`, also the θ → 0 limit of the exp rate.
    pub nominal_rate: f64,
    /// Spectral oracle at the same θ, when θ > 0 and subcritical.
    pub spectral_rate: Option<f64>,
    pub burn_in: f64,
    /// Set when `T·μ < 5`: the window is too short for stationarity.
    pub finite_horizon: bool,
    /// Paths whose exponent exceeded the `f64` range.
    pub overflowed: usize,
    pub overflow_flagged: bool,
    pub trajectories: usize,
}

impl SimReport {
    /// Distance from the nominal rate in standard errors.
    pub fn quad_z_score(&self) -> f64 {
        if self.quad_rate_stderr > 0.0 {
            (self.quad_rate_estimate - self.nominal_rate) / self.quad_rate_stderr
        } else if self.quad_rate_estimate == self.nominal_rate {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

struct PathSchedule {
    steps: usize,
    burn_steps: usize,
    burn_in: f64,
    window: f64,
    finite_horizon: bool,
}

fn schedule(ss: &StateSpace, cfg: &SimConfig) -> PathSchedule {
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mu = ss.decay_margin();
    let finite_horizon = cfg.horizon * mu < 5.0;
    let burn_in = (5.0 / mu).max(0.1 * cfg.horizon).min(0.5 * cfg.horizon);
    let burn_steps = ((burn_in / cfg.dt).round() as usize).min(steps - 1);
    PathSchedule {
        steps,
        burn_steps,
        burn_in: burn_steps as f64 * cfg.dt,
        window: (steps - burn_steps) as f64 * cfg.dt,
        finite_horizon,
    }
}

/// Row-major copies of the Euler–Maruyama step, noise and cost matrices.
struct StepMatrices {
    n: usize,
    m: usize,
    dt: f64,
    step: Vec<f64>,
    noise: Vec<f64>,
    weight: Vec<f64>,
}

impl StepMatrices {
    fn new(ss: &StateSpace, pi: &RealMatrix, dt: f64) -> Self {
        let (n, m) = (ss.n(), ss.b.ncols());
        let sqdt = dt.sqrt();
        Self {
            n,
            m,
            dt,
            step: (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    f64::from(u8::from(i == j)) + dt * ss.a[(i, j)]
                })
                .collect(),
            noise: (0..n * m).map(|k| sqdt * ss.b[(k / m, k % m)]).collect(),
            weight: (0..n * n).map(|k| pi[(k / n, k % n)]).collect(),
        }
    }

    fn silent(&self) -> bool {
        self.noise.iter().all(|&x| x == 0.0) || self.weight.iter().all(|&x| x == 0.0)
    }
}

/// One path with stack-allocated state, for the common small sizes.
fn run_path_fixed<const N: usize, const M: usize>(mats: &StepMatrices, sched: &PathSchedule, rng: &mut ChaCha8Rng) -> f64 {
    let mut step = [[0.0; N]; N];
    let mut noise = [[0.0; M]; N];
    let mut weight = [[0.0; N]; N];
    for i in 0..N {
        step[i].copy_from_slice(&mats.step[i * N..(i + 1) * N]);
        noise[i].copy_from_slice(&mats.noise[i * M..(i + 1) * M]);
        weight[i].copy_from_slice(&mats.weight[i * N..(i + 1) * N]);
    }
    let mut x = [0.0; N];
    let mut xi = [0.0; M];
    let mut cost = 0.0;
    for s in 0..sched.steps {
        if s >= sched.burn_steps {
            let mut q = 0.0;
            for i in 0..N {
                let mut row = 0.0;
                for j in 0..N {
                    row += weight[i][j] * x[j];
                }
                q += x[i] * row;
            }
            cost += q;
        }
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let mut next = [0.0; N];
        for i in 0..N {
            let mut acc = 0.0;
            for j in 0..N {
                acc += step[i][j] * x[j];
            }
            for k in 0..M {
                acc += noise[i][k] * xi[k];
            }
            next[i] = acc;
        }
        x = next;
    }
    cost * mats.dt
}

fn run_path_dyn(mats: &StepMatrices, sched: &PathSchedule, rng: &mut ChaCha8Rng) -> f64 {
    let (n, m) = (mats.n, mats.m);
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut xi = vec![0.0; m];
    let mut cost = 0.0;
    for s in 0..sched.steps {
        if s >= sched.burn_steps {
            let mut q = 0.0;
            for i in 0..n {
                let row = &mats.weight[i * n..(i + 1) * n];
                q += x[i] * row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
            }
            cost += q;
        }
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for i in 0..n {
            let drift: f64 = mats.step[i * n..(i + 1) * n].iter().zip(&x).map(|(a, v)| a * v).sum();
            let diff: f64 = mats.noise[i * m..(i + 1) * m].iter().zip(&xi).map(|(b, w)| b * w).sum();
            next[i] = drift + diff;
        }
        std::mem::swap(&mut x, &mut next);
    }
    cost * mats.dt
}

/// Integrated cost `∫ xᵀΠx dt` over the post-burn-in window, one value per
/// path. Path `k` draws from ChaCha stream `k` of the configured seed.
fn path_costs(ss: &StateSpace, pi: &RealMatrix, cfg: &SimConfig, sched: &PathSchedule) -> Vec<f64> {
    let mats = StepMatrices::new(ss, pi, cfg.dt);
    if mats.silent() {
        return vec![0.0; cfg.trajectories];
    }
    (0..cfg.trajectories)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(path as u64);
            match (mats.n, mats.m) {
                (2, 2) => run_path_fixed::<2, 2>(&mats, sched, &mut rng),
                (2, 4) => run_path_fixed::<2, 4>(&mats, sched, &mut rng),
                (4, 2) => run_path_fixed::<4, 2>(&mats, sched, &mut rng),
                (4, 4) => run_path_fixed::<4, 4>(&mats, sched, &mut rng),
                _ => run_path_dyn(&mats, sched, &mut rng),
            }
        })
        .collect()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
    (mean, (var / count).sqrt())
}

fn nominal_rate(ss: &StateSpace, params: &OqhoParams) -> Result<f64> {
    let p = solve_lyapunov(&ss.a, &(&ss.b * ss.b.transpose()))?;
    Ok((&params.pi * p).trace())
}

fn check_inputs(ss: &StateSpace, params: &OqhoParams, cfg: &SimConfig) -> Result<()> {
    cfg.validate()?;
    if !ss.hurwitz {
        return Err(Error::NotHurwitz { abscissa: ss.abscissa });
    }
    if params.pi.shape() != (ss.n(), ss.n()) {
        return Err(Error::DimensionMismatch(format!(
            "Pi {:?} against n = {}",
            params.pi.shape(),
            ss.n()
        )));
    }
    Ok(())
}

fn quad_report(ss: &StateSpace, params: &OqhoParams, cfg: &SimConfig, sched: &PathSchedule, costs: &[f64]) -> Result<SimReport> {
    let rates: Vec<f64> = costs.iter().map(|c| c / sched.window).collect();
    let (mean, stderr) = mean_and_stderr(&rates);
    Ok(SimReport {
        quad_rate_estimate: mean,
        quad_rate_stderr: stderr,
        exp_rate_estimate: None,
        exp_rate_stderr: None,
        nominal_rate: nominal_rate(ss, params)?,
        spectral_rate: None,
        burn_in: sched.burn_in,
        finite_horizon: sched.finite_horizon,
        overflowed: 0,
        overflow_flagged: false,
        trajectories: cfg.trajectories,
    })
}

/// Monte Carlo estimate of the stationary mean cost rate `E xᵀΠx`.
///
/// Paths start at `x(0) = 0`; the first `max(5/μ, 0.1T)` (capped at `T/2`)
/// of each path is discarded before averaging.
pub fn simulate_quadratic_rate(ss: &StateSpace, params: &OqhoParams, cfg: &SimConfig) -> Result<SimReport> {
    check_inputs(ss, params, cfg)?;
    let sched = schedule(ss, cfg);
    let costs = path_costs(ss, &params.pi, cfg, &sched);
    quad_report(ss, params, cfg, &sched, &costs)
}

/// Monte Carlo estimate of the exponential-moment rate
/// `(1/(θT')) ln E exp(θ ∫ xᵀΠx dt)`, accumulated with log-sum-exp.
pub fn simulate_exp_moment_rate(ss: &StateSpace, params: &OqhoParams, cfg: &SimConfig) -> Result<SimReport> {
    check_inputs(ss, params, cfg)?;
    let theta = cfg.theta;
    if theta <= 0.0 {
        return Err(Error::ConfigInvalid(
            "exponential moment needs theta > 0; use the quadratic rate for theta = 0".into(),
        ));
    }
    let sched = schedule(ss, cfg);
    let costs = path_costs(ss, &params.pi, cfg, &sched);
    let mut report = quad_report(ss, params, cfg, &sched, &costs)?;

    let exponents: Vec<f64> = costs.iter().map(|c| theta * c).filter(|e| e.is_finite()).collect();
    let overflowed = costs.len() - exponents.len() + exponents.iter().filter(|&&e| e > MAX_EXPONENT).count();
    let peak = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = exponents.iter().map(|e| (e - peak).exp()).collect();
    let (w_mean, w_stderr) = mean_and_stderr(&shifted);
    let scale = theta * sched.window;
    report.exp_rate_estimate = Some((peak + w_mean.ln()) / scale);
    report.exp_rate_stderr = Some(w_stderr / w_mean / scale);
    report.overflowed = overflowed;
    report.overflow_flagged = overflowed as f64 > OVERFLOW_FLAG_FRACTION * costs.len() as f64;
    report.spectral_rate = classical_spectral_rate(ss, params, theta).ok();
    Ok(report)
}

/// Eigenvalues of Φ(λ), as squared singular values of `√Π G(iλ) B`.
fn spectral_eigenvalues(a: &RealMatrix, b: &ComplexMatrix, sqrt_pi: &ComplexMatrix, lambda: f64) -> Vec<f64> {
    let n = a.nrows();
    let resolvent = ComplexMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { lambda } else { 0.0 };
        Complex::new(-a[(i, j)], diag)
    });
    let g_b = resolvent
        .lu()
        .solve(b)
        .expect("iλI - A is invertible for Hurwitz A");
    (sqrt_pi * g_b)
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s * s)
        .collect()
}

/// Classical large-deviations rate of `∫ xᵀΠx` divided by θ.
///
/// Returns `tr(ΠP)` at θ = 0, the limit of the expression.
pub fn classical_spectral_rate(ss: &StateSpace, params: &OqhoParams, theta: f64) -> Result<f64> {
    if !ss.hurwitz {
        return Err(Error::NotHurwitz { abscissa: ss.abscissa });
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::ThetaSupercritical { theta, peak: f64::NAN });
    }
    let a = &ss.a;
    let b = ss.b.map(|x| Complex::new(x, 0.0));
    let sqrt_pi = sqrtm_psd(&params.pi)?.map(|x| Complex::new(x, 0.0));
    let scale = operator_norm_real(a).max(ss.decay_margin());

    let peak = Cell::new(0.0f64);
    // Integrand in φ with λ = s·tan φ, so dλ = s·sec²φ dφ.
    let integrand = |phi: f64| {
        let lambda = scale * phi.tan();
        let eig = spectral_eigenvalues(a, &b, &sqrt_pi, lambda);
        let top = eig.iter().copied().fold(0.0, f64::max);
        peak.set(peak.get().max(2.0 * theta * top));
        let g: f64 = if theta == 0.0 {
            eig.iter().map(|e| 2.0 * e).sum()
        } else {
            eig.iter().map(|e| -(-2.0 * theta * e).ln_1p() / theta).sum()
        };
        let jac = scale / phi.cos().powi(2);
        g * jac
    };

    // Catch supercriticality before the quadrature sees a NaN.
    for k in 0..=256 {
        let phi = 0.5 * PI * k as f64 / 257.0;
        integrand(phi);
    }
    if peak.get() >= 1.0 {
        return Err(Error::ThetaSupercritical { theta, peak: peak.get() });
    }

    let (half_line, _) = integrate(integrand, 0.0, 0.5 * PI, 2.0 * PI * SPECTRAL_RATE_TOL, MAX_SUBINTERVALS)?;
    if peak.get() >= 1.0 {
        return Err(Error::ThetaSupercritical { theta, peak: peak.get() });
    }
    // Φ(-λ) is the conjugate of Φ(λ): the integrand is even.
    Ok(half_line / (2.0 * PI))
}
