//! Report documents. Field order is fixed by the struct layouts, so equal
//! inputs serialize to identical bytes.

use nctorus::serial::{MatrixJson, ModuleJson};
use nctorus::{Convention, DescentParams, TruncationPolicy};
use serde::Serialize;

use crate::config::Job;

pub const TOOL: &str = "nctorus";

#[derive(Debug, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub n: usize,
    pub truncation: TruncationPolicy,
    pub tol: f64,
    pub seed: u64,
    pub max_truncation_loss: f64,
    pub warnings: Vec<String>,
}

impl Header {
    pub fn new(command: &'static str, job: &Job, max_truncation_loss: f64) -> Self {
        Self {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command,
            n: job.n(),
            truncation: job.policy,
            tol: job.tol,
            seed: job.seed,
            max_truncation_loss,
            warnings: job.rational_warning().into_iter().collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// `None` when an earlier failure made the check impossible.
    pub value: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn skipped(name: impl Into<String>, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value: None,
            threshold,
            passed: false,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    #[serde(flatten)]
    pub header: Header,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Serialize)]
pub struct YmResiduals {
    /// Closed-form evaluation of the spectral value.
    pub ym_spectral_closed_form: f64,
    /// Relative gap between the column and closed-form spectral paths.
    pub spectral_cross_check: f64,
    /// `|ym_spectral − c·ym_dynamical| / max(1, ym_dynamical)`.
    pub agreement: f64,
    pub compatibility: f64,
    pub curvature_skew: f64,
    pub projection_idempotency: f64,
    pub projection_self_adjointness: f64,
}

#[derive(Debug, Serialize)]
pub struct YmReport {
    #[serde(flatten)]
    pub header: Header,
    pub passed: bool,
    pub input_convention: Convention,
    pub q: usize,
    pub ym_dynamical: f64,
    pub ym_spectral: f64,
    pub constant_c: f64,
    /// `ym_spectral / ym_dynamical`; absent when `ym_dynamical = 0`.
    pub ratio: Option<f64>,
    /// Both values are exactly zero (flat connection).
    pub ratio_exact_zero: bool,
    /// `|ratio − c| / c`.
    pub ratio_relative_deviation: Option<f64>,
    pub residuals: YmResiduals,
}

#[derive(Debug, Serialize)]
pub struct ProjectionReport {
    #[serde(flatten)]
    pub header: Header,
    pub passed: bool,
    pub q: usize,
    pub input_idempotency: f64,
    pub input_self_adjointness: f64,
    pub idempotency: f64,
    pub self_adjointness: f64,
    /// `‖z p − p̃ z‖`.
    pub similarity: f64,
    /// `‖p̃ − p‖`.
    pub change: f64,
    pub output: &'static str,
}

#[derive(Debug, Serialize)]
pub struct ProjectionFile {
    pub module: ModuleJson,
    pub z: MatrixJson,
    pub z_inv: MatrixJson,
}

#[derive(Debug, Serialize)]
pub struct OptimizeReport {
    #[serde(flatten)]
    pub header: Header,
    pub passed: bool,
    pub params: DescentParams,
    pub iterations: usize,
    pub initial_ym: f64,
    pub final_ym: f64,
    pub final_grad_norm: f64,
    pub converged: bool,
    pub line_search_failed: bool,
    pub monotone: bool,
    pub trace: &'static str,
    pub final_connection: &'static str,
}
