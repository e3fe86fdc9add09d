//! JSON run reports.

use std::time::Instant;

use charfn_core::linalg::Tolerances;
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    CertificateOnly,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
    pub elapsed_ms: f64,
}

impl Check {
    fn new(name: impl Into<String>, verdict: Verdict) -> Self {
        Self {
            name: name.into(),
            verdict,
            residual: None,
            tolerance: None,
            exact: None,
            detail: Value::Null,
            elapsed_ms: 0.0,
        }
    }

    /// Passes when `residual ≤ tolerance` (NaN fails).
    pub fn residual(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let verdict = if residual <= tolerance { Verdict::Pass } else { Verdict::Fail };
        Self { residual: Some(residual), tolerance: Some(tolerance), ..Self::new(name, verdict) }
    }

    pub fn exact(name: impl Into<String>, holds: bool) -> Self {
        let verdict = if holds { Verdict::Pass } else { Verdict::Fail };
        Self { exact: Some(true), ..Self::new(name, verdict) }
    }

    pub fn verdict(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { Verdict::Pass } else { Verdict::Fail })
    }

    pub fn certificate(name: impl Into<String>, detail: Value) -> Self {
        Self { detail, ..Self::new(name, Verdict::CertificateOnly) }
    }

    pub fn failed(name: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Self { detail: serde_json::json!({ "error": message.to_string() }), ..Self::new(name, Verdict::Fail) }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn with_residual(mut self, residual: f64) -> Self {
        self.residual = Some(residual);
        self
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}/{}", self.name);
        self
    }
}

/// Runs `f` and stamps the elapsed wall time on every check it returns.
pub fn timed(f: impl FnOnce() -> Vec<Check>) -> Vec<Check> {
    let start = Instant::now();
    let mut checks = f();
    let ms = start.elapsed().as_secs_f64() * 1e3;
    for c in &mut checks {
        c.elapsed_ms = ms;
    }
    checks
}

pub fn timed_one(f: impl FnOnce() -> Check) -> Check {
    timed(|| vec![f()]).pop().expect("one check")
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub mode: String,
    pub tolerances: Tolerances,
    /// Threshold for composite float identities.
    pub composite_tolerance: f64,
    /// Threshold for single-step float identities.
    pub step_tolerance: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub certificate_only: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub environment: Environment,
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl RunReport {
    pub fn new(command: impl Into<String>, config: Value, environment: Environment, checks: Vec<Check>) -> Self {
        let mut summary = Summary::default();
        for c in &checks {
            match c.verdict {
                Verdict::Pass => summary.pass += 1,
                Verdict::Fail => summary.fail += 1,
                Verdict::CertificateOnly => summary.certificate_only += 1,
            }
        }
        Self { schema_version: SCHEMA_VERSION, command: command.into(), config, environment, checks, summary }
    }

    /// 0 when nothing failed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.summary.fail == 0 {
            0
        } else {
            1
        }
    }
}
