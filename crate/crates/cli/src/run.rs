use std::path::PathBuf;

use clap::ValueEnum;
use qrobust_core::bounds::{worst_case_bound_closed, worst_case_bound_numeric};
use qrobust_core::certificate::{make_certificate, optimize_mu, tau_grid, verify_certificate};
use qrobust_core::matnum::operator_norm_real;
use qrobust_core::oqho::{build_state_space_with, invariant_model};
use qrobust_core::oracle::{simulate_exp_moment_rate, simulate_quadratic_rate};
use qrobust_core::{DecayCertificate, InvariantModel, OqhoParams, SimConfig, StateSpace, Tolerances};
use serde::Serialize;
use serde_json::json;

use crate::model::{matrix_rows, ModelFile, ParseError};
use crate::report::{
    BoundRow, CertificateSection, InvariantSection, MuSource, OracleSection, Report, SimInputs, ValidateSection,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Validate,
    Invariant,
    Certify,
    Bound,
    Sweep,
    Oracle,
    All,
}

impl Command {
    fn reaches(self, stage: Command) -> bool {
        match self {
            Command::All => true,
            Command::Oracle => matches!(stage, Command::Validate | Command::Invariant | Command::Oracle),
            Command::Sweep => stage <= Command::Bound,
            cmd => stage <= cmd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model_path: PathBuf,
    pub eps: Vec<f64>,
    pub mu: Option<f64>,
    pub mu_grid: Option<usize>,
    pub tolerances: Tolerances,
    pub sim: SimInputs,
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: Command, model_path: impl Into<PathBuf>) -> Self {
        Self {
            command,
            model_path: model_path.into(),
            eps: vec![0.0, 1.0],
            mu: None,
            mu_grid: None,
            tolerances: Tolerances::default(),
            sim: SimInputs {
                horizon: 50.0,
                dt: None,
                paths: 2000,
                seed: 0,
                theta: 0.0,
            },
            format: Format::Json,
        }
    }

    fn check(&self) -> Result<(), CliError> {
        if self.format == Format::Csv && self.command != Command::Sweep {
            return Err(CliError::Usage("CSV output is only available for sweep".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(CliError::Usage(format!("eps values must be finite and nonnegative, got {e}")));
        }
        if self.command.reaches(Command::Bound) && self.eps.is_empty() {
            return Err(CliError::Usage("no eps values given".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qrobust_core::Error),
    #[error("realizability residual {residual:e} exceeds {limit:e}")]
    NotRealizable { residual: f64, limit: f64 },
    #[error("certificate verification failed (ALI margin {ali_margin:e}, decay margin {decay_margin:e})")]
    CertificateFailed { ali_margin: f64, decay_margin: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use qrobust_core::Error as E;
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Core(E::NotHurwitz { .. }) => 4,
            CliError::Core(
                E::SingularSolve { .. } | E::QuadratureFailure { .. } | E::NotPsd { .. },
            )
            | CliError::NotRealizable { .. }
            | CliError::CertificateFailed { .. } => 5,
            CliError::Core(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 if matches!(self, CliError::Parse(_)) => "ParseError",
            2 => "UsageError",
            3 => "InvalidParams",
            4 => "NotHurwitz",
            5 => "NumericFailure",
            _ => "IoError",
        }
    }
}

/// A failed run: the error plus whatever stages completed before it.
#[derive(Debug)]
pub struct Failure {
    pub error: CliError,
    pub report: Option<Report>,
}

impl Failure {
    pub fn to_json(&self) -> serde_json::Value {
        let mut error = json!({
            "kind": self.error.kind(),
            "exit_code": self.error.exit_code(),
            "message": self.error.to_string(),
        });
        if let CliError::Parse(p) = &self.error {
            error["detail"] = serde_json::to_value(p).expect("parse error serializes");
        }
        json!({ "error": error, "report": self.report })
    }
}

impl From<CliError> for Failure {
    fn from(error: CliError) -> Self {
        Self { error, report: None }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Report, Failure> {
    cfg.check()?;
    let model = ModelFile::load(&cfg.model_path).map_err(CliError::from)?;
    let params = model.to_params().map_err(CliError::from)?;
    let mut report = Report {
        command: cfg.command,
        inputs: crate::report::Inputs {
            model,
            eps: cfg.eps.clone(),
            mu: cfg.mu,
            mu_grid: cfg.mu_grid.unwrap_or(cfg.tolerances.mu_grid),
            sim: cfg.sim,
        },
        tolerances: cfg.tolerances,
        validate: None,
        invariant: None,
        certificate: None,
        bounds: None,
        oracle: None,
    };
    match stages(cfg, &params, &mut report) {
        Ok(()) => Ok(report),
        Err(error) => Err(Failure {
            error,
            report: Some(report),
        }),
    }
}

fn stages(cfg: &RunConfig, params: &OqhoParams, report: &mut Report) -> Result<(), CliError> {
    let tol = &cfg.tolerances;
    let ss = validate_stage(params, tol, report)?;
    if cfg.command == Command::Validate {
        return Ok(());
    }

    let inv = invariant_model(params, &ss)?;
    report.invariant = Some(InvariantSection {
        p: matrix_rows(&inv.p),
        nominal_rate: inv.nominal_rate,
    });

    if cfg.command.reaches(Command::Certify) {
        let cert = certify_stage(cfg, params, &ss, &inv, report)?;
        if cfg.command.reaches(Command::Bound) {
            let mut eps = cfg.eps.clone();
            if cfg.command == Command::Sweep {
                eps.sort_by(f64::total_cmp);
            }
            let rows = eps
                .iter()
                .map(|&e| {
                    let closed = worst_case_bound_closed(e, params.n(), &cert)?;
                    let numeric = worst_case_bound_numeric(e, params.n(), &cert, tol.theta_grid)?;
                    Ok(BoundRow::new(&closed, &numeric))
                })
                .collect::<qrobust_core::Result<Vec<_>>>()?;
            report.bounds = Some(rows);
        }
    }

    if cfg.command.reaches(Command::Oracle) {
        oracle_stage(cfg, params, &ss, report)?;
    }
    Ok(())
}

fn validate_stage(params: &OqhoParams, tol: &Tolerances, report: &mut Report) -> Result<StateSpace, CliError> {
    let ss = build_state_space_with(params, tol)?;
    report.validate = Some(ValidateSection {
        n: params.n(),
        m: params.m(),
        a: matrix_rows(&ss.a),
        b: matrix_rows(&ss.b),
        pr_residual: ss.pr_residual,
        spectral_abscissa: ss.abscissa,
        hurwitz: ss.hurwitz,
    });
    let limit = tol.realizability * (1.0 + operator_norm_real(&ss.a) * operator_norm_real(&params.theta));
    if ss.pr_residual > limit {
        return Err(CliError::NotRealizable {
            residual: ss.pr_residual,
            limit,
        });
    }
    Ok(ss)
}

fn certify_stage(
    cfg: &RunConfig,
    params: &OqhoParams,
    ss: &StateSpace,
    inv: &InvariantModel,
    report: &mut Report,
) -> Result<DecayCertificate, CliError> {
    let tol = &cfg.tolerances;
    let (cert, source, target) = match cfg.mu {
        Some(mu) => (make_certificate(ss, inv, params, mu)?, MuSource::Given, None),
        None => {
            // one certificate serves every row; tune it for the largest threshold
            let target = cfg.eps.iter().copied().fold(0.0, f64::max);
            let grid = cfg.mu_grid.unwrap_or(tol.mu_grid);
            (optimize_mu(ss, inv, params, target, grid)?, MuSource::Optimized, Some(target))
        }
    };
    let taus = tau_grid(cert.mu, tol.tau_points, tol.tau_span);
    let verification = verify_certificate(&cert, ss, inv, params, &taus, tol)?;
    let passed = verification.passed;
    let (ali_margin, decay_margin) = (verification.ali_margin, verification.min_decay_margin);
    report.certificate = Some(CertificateSection {
        mu: cert.mu,
        mu_source: source,
        optimized_for_eps: target,
        alpha: cert.alpha,
        gamma: matrix_rows(&cert.gamma),
        theta_max: cert.theta_max(),
        verification,
    });
    if !passed {
        return Err(CliError::CertificateFailed { ali_margin, decay_margin });
    }
    Ok(cert)
}

fn oracle_stage(cfg: &RunConfig, params: &OqhoParams, ss: &StateSpace, report: &mut Report) -> Result<(), CliError> {
    let sim = SimConfig {
        horizon: cfg.sim.horizon,
        dt: cfg.sim.dt.unwrap_or_else(|| SimConfig::default_dt(&ss.a)),
        trajectories: cfg.sim.paths,
        seed: cfg.sim.seed,
        theta: cfg.sim.theta,
    };
    let result = if sim.theta > 0.0 {
        simulate_exp_moment_rate(ss, params, &sim)?
    } else {
        simulate_quadratic_rate(ss, params, &sim)?
    };
    report.oracle = Some(OracleSection {
        dt: sim.dt,
        quad_z_score: result.quad_z_score(),
        sim: result,
    });
    Ok(())
}
