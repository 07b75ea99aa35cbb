//! Serializable check records shared by the diagnostics and the CLI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One verification line. `z` is present for statistical checks only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub params: BTreeMap<String, f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub z: Option<f64>,
}

impl CheckRecord {
    /// A Monte Carlo record with z = (estimate - target)/stderr; a zero
    /// standard error gives z = 0 on exact agreement.
    pub fn statistical(check: &str, params: &[(&str, f64)], estimate: f64, stderr: f64, target: f64) -> Self {
        let diff = estimate - target;
        let z = if stderr > 0.0 {
            diff / stderr
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::MAX
        };
        CheckRecord {
            check: check.to_string(),
            params: to_map(params),
            estimate,
            stderr,
            target,
            z: Some(z),
        }
    }

    /// A deterministic record; `stderr` carries the numerical error estimate.
    pub fn deterministic(check: &str, params: &[(&str, f64)], estimate: f64, error: f64, target: f64) -> Self {
        CheckRecord {
            check: check.to_string(),
            params: to_map(params),
            estimate,
            stderr: error,
            target,
            z: None,
        }
    }
}

fn to_map(params: &[(&str, f64)]) -> BTreeMap<String, f64> {
    params.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
