//! Report layout. Sections appear in pipeline order and are omitted when
//! the command does not reach them.

use qrobust_core::{CertificateReport, RobustBound, SimReport, Tolerances};
use serde::Serialize;

use crate::model::ModelFile;
use crate::run::Command;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: Command,
    pub inputs: Inputs,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant: Option<InvariantSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<BoundRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inputs {
    pub model: ModelFile,
    pub eps: Vec<f64>,
    pub mu: Option<f64>,
    pub mu_grid: usize,
    pub sim: SimInputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimInputs {
    pub horizon: f64,
    /// `None` means the default step derived from ‖A‖.
    pub dt: Option<f64>,
    pub paths: usize,
    pub seed: u64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateSection {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    pub pr_residual: f64,
    pub spectral_abscissa: f64,
    pub hurwitz: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantSection {
    #[serde(rename = "P")]
    pub p: Rows,
    pub nominal_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MuSource {
    Given,
    Optimized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSection {
    pub mu: f64,
    pub mu_source: MuSource,
    /// Threshold the rate was optimized for, when `mu_source` is `optimized`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimized_for_eps: Option<f64>,
    pub alpha: f64,
    #[serde(rename = "Gamma")]
    pub gamma: Rows,
    pub theta_max: f64,
    pub verification: CertificateReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub eps: f64,
    pub sigma: f64,
    pub theta_star: f64,
    pub bound: f64,
    pub theta_max: f64,
    pub boundary: bool,
    pub mu: f64,
    pub alpha: f64,
    pub n: usize,
    pub numeric_theta_star: f64,
    pub numeric_bound: f64,
}

impl BoundRow {
    pub fn new(closed: &RobustBound, numeric: &RobustBound) -> Self {
        Self {
            eps: closed.eps,
            sigma: closed.sigma,
            theta_star: closed.theta_star,
            bound: closed.bound,
            theta_max: closed.theta_max,
            boundary: closed.boundary,
            mu: closed.mu,
            alpha: closed.alpha,
            n: closed.n,
            numeric_theta_star: numeric.theta_star,
            numeric_bound: numeric.bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSection {
    pub dt: f64,
    #[serde(flatten)]
    pub sim: SimReport,
    pub quad_z_score: f64,
}

pub const CSV_HEADER: [&str; 7] = ["eps", "sigma", "theta_star", "bound", "mu", "alpha", "n"];

/// Sweep rows as CSV with the fixed header, in the order given.
pub fn bounds_csv(rows: &[BoundRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.eps.to_string(),
            r.sigma.to_string(),
            r.theta_star.to_string(),
            r.bound.to_string(),
            r.mu.to_string(),
            r.alpha.to_string(),
            r.n.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
