//! Job configuration files.

use std::fmt;

use levy_conditioning::conditioned_sim::ClockFamily;
use levy_conditioning::resolvent::TailCutoff;
use levy_conditioning::{IntervalUnion, LevyModel, MCConfig, PointSet, QuadratureConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JobKind {
    #[serde(alias = "tabulate_h")]
    TabulateH,
    #[serde(alias = "tabulate_phi")]
    TabulatePhi,
    #[serde(alias = "verify_clocks")]
    VerifyClocks,
    #[serde(alias = "simulate")]
    Simulate,
    #[serde(alias = "diagnose")]
    Diagnose,
    #[serde(alias = "check_model")]
    CheckModel,
}

impl JobKind {
    pub fn stem(&self) -> &'static str {
        match self {
            JobKind::TabulateH => "tabulate_h",
            JobKind::TabulatePhi => "tabulate_phi",
            JobKind::VerifyClocks => "verify_clocks",
            JobKind::Simulate => "simulate",
            JobKind::Diagnose => "diagnose",
            JobKind::CheckModel => "check_model",
        }
    }
}

impl fmt::Display for JobKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.stem())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ModelBlock {
    pub fn build(&self) -> Result<LevyModel, CliError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::Validation(format!("field `model.{name}` is required for kind `{}`", self.kind)))
        };
        let wrap = |e: levy_conditioning::Error| CliError::Validation(format!("field `model`: {e}"));
        match self.kind.as_str() {
            "brownian_motion" | "BrownianMotion" => LevyModel::brownian(self.sigma.unwrap_or(1.0)).map_err(wrap),
            "symmetric_stable" | "SymmetricStable" => LevyModel::symmetric_stable(need(self.alpha, "alpha")?).map_err(wrap),
            "asymmetric_stable" | "AsymmetricStable" => {
                LevyModel::asymmetric_stable(need(self.alpha, "alpha")?, need(self.beta, "beta")?).map_err(wrap)
            }
            other => Err(CliError::Validation(format!(
                "field `model.kind`: unknown kind `{other}` (expected brownian_motion, symmetric_stable or asymmetric_stable)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetBlock {
    Points(Vec<f64>),
    Intervals(Vec<(f64, f64)>),
    Lattice(f64),
}

/// A validated target set.
#[derive(Debug, Clone)]
pub enum TargetSet {
    Points(PointSet),
    Intervals(IntervalUnion),
    Lattice(f64),
}

impl SetBlock {
    pub fn build(&self) -> Result<TargetSet, CliError> {
        let wrap = |e: levy_conditioning::Error| CliError::Validation(format!("field `set`: {e}"));
        Ok(match self {
            SetBlock::Points(p) => TargetSet::Points(PointSet::new(p.clone()).map_err(wrap)?),
            SetBlock::Intervals(iv) => TargetSet::Intervals(IntervalUnion::new(iv.clone()).map_err(wrap)?),
            SetBlock::Lattice(l) => {
                if !(*l > 0.0 && l.is_finite()) {
                    return Err(CliError::Validation(format!("field `set.lattice`: spacing must be positive, got {l}")));
                }
                TargetSet::Lattice(*l)
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub times: Vec<f64>,
}

impl GridBlock {
    /// x_min, x_min + step, ..., x_max (inclusive up to rounding).
    pub fn x_values(&self) -> Result<Vec<f64>, CliError> {
        let field = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Validation(format!("field `grid.{name}` is required")));
        let (lo, hi, step) = (field(self.x_min, "x_min")?, field(self.x_max, "x_max")?, field(self.step, "step")?);
        if !(step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
            return Err(CliError::Validation(format!(
                "field `grid`: need step > 0 and x_max >= x_min (got {lo}, {hi}, {step})"
            )));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| lo + i as f64 * step).collect())
    }
}

/// Monte Carlo block; omitted fields take the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub root_seed: Option<u64>,
}

impl McBlock {
    pub fn build(&self, seed_override: Option<u64>) -> Result<MCConfig, CliError> {
        let d = MCConfig::default();
        let mc = MCConfig {
            n_paths: self.n_paths.unwrap_or(d.n_paths),
            dt: self.dt.unwrap_or(d.dt),
            t_max: self.t_max.unwrap_or(d.t_max),
            root_seed: seed_override.or(self.root_seed).unwrap_or(d.root_seed),
        };
        mc.validate().map_err(|e| CliError::Validation(format!("field `mc`: {e}")))?;
        Ok(mc)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureBlock {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_panels: Option<usize>,
    /// Fixed frequency cutoff; automatic when absent.
    pub tail_cutoff: Option<f64>,
}

impl QuadratureBlock {
    pub fn build(&self) -> Result<QuadratureConfig, CliError> {
        let d = QuadratureConfig::default();
        let cfg = QuadratureConfig {
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            max_panels: self.max_panels.unwrap_or(d.max_panels),
            tail_cutoff_policy: self.tail_cutoff.map(TailCutoff::Fixed).unwrap_or(d.tail_cutoff_policy),
        };
        cfg.validate().map_err(|e| CliError::Validation(format!("field `quadrature`: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// File stem; defaults to the job name.
    #[serde(default)]
    pub prefix: Option<String>,
    /// Number of individual paths written by Simulate.
    #[serde(default = "default_record_paths")]
    pub record_paths: usize,
}

fn default_record_paths() -> usize {
    100
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            prefix: None,
            record_paths: default_record_paths(),
        }
    }
}

/// Weighted-versus-rejection comparison run by Diagnose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCheckBlock {
    pub q: f64,
    pub t: f64,
    /// The functional is the indicator of X_t > threshold.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub model: ModelBlock,
    pub job: JobKind,
    #[serde(default)]
    pub set: Option<SetBlock>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub clocks: Vec<ClockFamily>,
    #[serde(default)]
    pub mc: McBlock,
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    #[serde(default)]
    pub cross_check: Option<CrossCheckBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<JobConfig, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn target(&self) -> Result<TargetSet, CliError> {
        self.set
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("field `set` is required for job {}", self.job)))?
            .build()
    }

    pub fn point_set(&self) -> Result<PointSet, CliError> {
        match self.target()? {
            TargetSet::Points(p) => Ok(p),
            _ => Err(CliError::Validation(format!("field `set`: job {} needs a point set", self.job))),
        }
    }

    pub fn start(&self) -> Result<f64, CliError> {
        self.x
            .ok_or_else(|| CliError::Validation(format!("field `x` is required for job {}", self.job)))
    }

    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        let t = &self.grid.times;
        if t.is_empty() {
            return Err(CliError::Validation("field `grid.times` must be nonempty".into()));
        }
        if t.iter().any(|v| !(*v >= 0.0)) || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Validation("field `grid.times` must be non-negative and increasing".into()));
        }
        Ok(t.clone())
    }

    pub fn stem(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| self.job.stem().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = JobConfig::parse(r#"{"model":{"kind":"brownian_motion"},"job":"TabulateH","grid":{"x_min":-1,"x_max":1,"step":0.5}}"#).unwrap();
        assert_eq!(c.job, JobKind::TabulateH);
        assert_eq!(c.grid.x_values().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(c.model.build().is_ok());
    }

    #[test]
    fn errors_name_fields() {
        let e = JobConfig::parse(r#"{"job":"TabulateH"}"#).unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");
        let c = JobConfig::parse(r#"{"model":{"kind":"symmetric_stable"},"job":"check_model"}"#).unwrap();
        assert!(c.model.build().unwrap_err().to_string().contains("model.alpha"));
        let c = JobConfig::parse(r#"{"model":{"kind":"brownian_motion"},"job":"Simulate","set":{"intervals":[[0,1]]}}"#).unwrap();
        assert!(c.point_set().unwrap_err().to_string().contains("set"));
    }

    #[test]
    fn clocks_and_sets() {
        let c = JobConfig::parse(
            r#"{"model":{"kind":"brownian_motion","sigma":2},"job":"VerifyClocks","set":{"points":[0,1]},
               "clocks":[{"kind":"exponential"},{"kind":"two_point_hit","gamma":0.5}]}"#,
        )
        .unwrap();
        assert_eq!(c.clocks[1], ClockFamily::TwoPointHit { gamma: 0.5 });
        assert_eq!(c.point_set().unwrap().points(), &[0.0, 1.0]);
        let mc = c.mc.build(Some(9)).unwrap();
        assert_eq!(mc.root_seed, 9);
    }
}
