//! Model files: a JSON document with dimensions `n`, `m` and matrices
//! `Theta`, `K`, `M`, `Pi` as row-major nested arrays.

use std::fmt;
use std::path::Path;

use qrobust_core::{OqhoParams, RealMatrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "Theta")]
    pub theta: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub coupling: Vec<Vec<f64>>,
    #[serde(rename = "Pi")]
    pub pi: Vec<Vec<f64>>,
}

/// Malformed or unreadable model file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseError {
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ParseError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            line: None,
            column: None,
            field: Some(field.into()),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        write!(f, "{}", self.message)?;
        if let (Some(line), Some(col)) = (self.line, self.column) {
            write!(f, " (line {line}, column {col})")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

impl From<serde_json::Error> for ParseError {
    fn from(err: serde_json::Error) -> Self {
        let field = err
            .to_string()
            .split('`')
            .nth(1)
            .filter(|_| err.is_data())
            .map(str::to_owned);
        // serde_json appends its own position; keep the bare message
        let full = err.to_string();
        let message = full
            .rsplit_once(" at line ")
            .map_or(full.as_str(), |(head, _)| head)
            .to_owned();
        Self {
            message,
            line: Some(err.line()),
            column: Some(err.column()),
            field,
        }
    }
}

fn to_matrix(name: &str, rows: &[Vec<f64>], shape: (usize, usize)) -> Result<RealMatrix, ParseError> {
    if rows.len() != shape.0 {
        return Err(ParseError::field(
            name,
            format!("expected {} rows, found {}", shape.0, rows.len()),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != shape.1 {
            return Err(ParseError::field(
                format!("{name}[{i}]"),
                format!("expected {} entries, found {}", shape.1, row.len()),
            ));
        }
    }
    Ok(RealMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
}

fn to_rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParseError {
            message: format!("cannot read {}: {e}", path.display()),
            line: None,
            column: None,
            field: None,
        })?;
        Self::parse(&text)
    }

    /// Shape-checks the matrices against `n` and `m`. Algebraic invariants
    /// are left to [`OqhoParams::validate`].
    pub fn to_params(&self) -> Result<OqhoParams, ParseError> {
        let (n, m) = (self.n, self.m);
        Ok(OqhoParams {
            theta: to_matrix("Theta", &self.theta, (n, n))?,
            k: to_matrix("K", &self.k, (n, n))?,
            coupling: to_matrix("M", &self.coupling, (m, n))?,
            pi: to_matrix("Pi", &self.pi, (n, n))?,
        })
    }

    pub fn from_params(p: &OqhoParams) -> Self {
        Self {
            n: p.n(),
            m: p.m(),
            theta: to_rows(&p.theta),
            k: to_rows(&p.k),
            coupling: to_rows(&p.coupling),
            pi: to_rows(&p.pi),
        }
    }
}

pub(crate) fn matrix_rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    to_rows(m)
}
