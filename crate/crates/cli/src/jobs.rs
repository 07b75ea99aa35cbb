//! Job runners. Every runner returns the files it wrote and the number of
//! statistical records with |z| above the failure threshold.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use levy_conditioning::conditioned_sim::{
    estimator_cross_check, martingale_records, simulate_conditioned_times, transience_from_ensemble, verify_clock_limit,
    ClockFamily, PathEnsemble,
};
use levy_conditioning::harmonic::lattice::DEFAULT_TAIL_TOL;
use levy_conditioning::levy_model::{check_condition_a, check_lattice_condition, AdmissibilityReport};
use levy_conditioning::report::CheckRecord;
use levy_conditioning::resolvent::{h, h_gamma};
use levy_conditioning::{HarmonicFn, LevyModel, MCConfig, QuadratureConfig};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{JobConfig, JobKind, McBlock, ModelBlock, SetBlock, TargetSet};
use crate::CliError;

/// |z| above this fails a verification job.
pub const Z_FAIL: f64 = 4.0;

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    job: JobKind,
    model: &'a ModelBlock,
    set: Option<&'a SetBlock>,
    gamma: f64,
    quadrature: QuadratureConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc: Option<MCConfig>,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    metadata: &'a Metadata<'a>,
    records: &'a [CheckRecord],
    failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<T>,
}

struct Context<'a> {
    cfg: &'a JobConfig,
    model: LevyModel,
    quad: QuadratureConfig,
    mc: MCConfig,
    out_dir: &'a Path,
    outcome: Outcome,
}

impl<'a> Context<'a> {
    fn metadata(&self, with_mc: bool) -> Metadata<'a> {
        Metadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            job: self.cfg.job,
            model: &self.cfg.model,
            set: self.cfg.set.as_ref(),
            gamma: self.cfg.gamma,
            quadrature: self.quad,
            mc: with_mc.then_some(self.mc),
        }
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}.{suffix}", self.cfg.stem()))
    }

    fn write(&mut self, path: PathBuf, text: &str) -> Result<(), CliError> {
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        info!("wrote {}", path.display());
        self.outcome.files.push(path);
        Ok(())
    }

    fn write_csv(&mut self, suffix: &str, with_mc: bool, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let meta = serde_json::to_string(&self.metadata(with_mc)).expect("metadata serializes");
        let mut text = format!("# {meta}\n{}\n", header.join(","));
        for r in rows {
            // Infallible for String.
            let _ = writeln!(text, "{}", r.join(","));
        }
        self.write(self.path(suffix), &text)
    }

    fn write_report<T: Serialize>(&mut self, with_mc: bool, records: &[CheckRecord], details: Option<T>) -> Result<(), CliError> {
        let failures = records
            .iter()
            .filter(|r| r.z.map(|z| !(z.abs() <= Z_FAIL)).unwrap_or(false))
            .count();
        self.outcome.failures += failures;
        let meta = self.metadata(with_mc);
        let report = Report {
            metadata: &meta,
            records,
            failures,
            details,
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        self.write(self.path("report.json"), &text)
    }

    fn harmonic(&self) -> Result<HarmonicFn, CliError> {
        Ok(match self.cfg.target()? {
            TargetSet::Points(p) => HarmonicFn::points(&self.model, p, self.cfg.gamma, &self.quad)?,
            TargetSet::Intervals(iv) => HarmonicFn::bounded(&self.model, iv, self.mc, &self.quad)?,
            TargetSet::Lattice(l) => HarmonicFn::lattice(&self.model, l, DEFAULT_TAIL_TOL)?,
        })
    }
}

fn num(v: f64) -> String {
    // Shortest round-trip digits, with an exponent for very large or small values.
    format!("{v:?}")
}

/// Validates the configuration and runs its job.
pub fn run_job(cfg: &JobConfig, out_dir: &Path, seed_override: Option<u64>) -> Result<Outcome, CliError> {
    let model = cfg.model.build()?;
    let quad = cfg.quadrature.build()?;
    let mc = McBlock::build(&cfg.mc, seed_override)?;
    if !out_dir.is_dir() {
        return Err(CliError::Validation(format!("output directory {} does not exist", out_dir.display())));
    }
    let mut ctx = Context {
        cfg,
        model,
        quad,
        mc,
        out_dir,
        outcome: Outcome::default(),
    };
    match cfg.job {
        JobKind::TabulateH => tabulate_h(&mut ctx)?,
        JobKind::TabulatePhi => tabulate_phi(&mut ctx)?,
        JobKind::VerifyClocks => verify_clocks(&mut ctx)?,
        JobKind::Simulate => simulate(&mut ctx)?,
        JobKind::Diagnose => diagnose(&mut ctx)?,
        JobKind::CheckModel => check_model(&mut ctx)?,
    }
    Ok(ctx.outcome)
}

fn tabulate_h(ctx: &mut Context) -> Result<(), CliError> {
    let xs = ctx.cfg.grid.x_values()?;
    let gamma = ctx.cfg.gamma;
    let rows: Vec<Vec<String>> = xs
        .par_iter()
        .map(|&x| -> Result<Vec<String>, CliError> {
            let base = h(&ctx.model, x, &ctx.quad)?;
            let tilted = h_gamma(&ctx.model, gamma, x, &ctx.quad)?;
            Ok(vec![num(x), num(base.value), num(tilted.value), num(base.error.max(tilted.error))])
        })
        .collect::<Result<_, _>>()?;
    ctx.write_csv("csv", false, &["x", "h", "h_gamma", "error"], &rows)
}

fn tabulate_phi(ctx: &mut Context) -> Result<(), CliError> {
    let xs = ctx.cfg.grid.x_values()?;
    let phi = ctx.harmonic()?;
    let mc_used = phi.kind() == levy_conditioning::HarmonicKind::BoundedSet;
    let rows: Vec<Vec<String>> = if mc_used {
        // The Monte Carlo evaluator is parallel inside.
        xs.iter()
            .map(|&x| Ok(row_phi(x, phi.eval(x)?)))
            .collect::<Result<_, CliError>>()?
    } else {
        xs.par_iter()
            .map(|&x| Ok(row_phi(x, phi.eval(x)?)))
            .collect::<Result<_, CliError>>()?
    };
    ctx.write_csv("csv", mc_used, &["x", "phi", "error"], &rows)
}

fn row_phi(x: f64, e: levy_conditioning::Estimate) -> Vec<String> {
    vec![num(x), num(e.value), num(e.error)]
}

fn verify_clocks(ctx: &mut Context) -> Result<(), CliError> {
    let set = ctx.cfg.point_set()?;
    let x = ctx.cfg.start()?;
    if ctx.cfg.clocks.is_empty() {
        return Err(CliError::Validation("field `clocks` must be nonempty".into()));
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut trajectories = Vec::new();
    for (i, family) in ctx.cfg.clocks.iter().enumerate() {
        let grid = match family {
            ClockFamily::Exponential => &ctx.cfg.grid.q,
            _ => &ctx.cfg.grid.c,
        };
        if grid.is_empty() {
            let name = if matches!(family, ClockFamily::Exponential) { "q" } else { "c" };
            return Err(CliError::Validation(format!("field `grid.{name}` is required by clocks[{i}]")));
        }
        let tr = verify_clock_limit(&ctx.model, &set, x, *family, grid, &ctx.quad)?;
        for &(p, v) in &tr.rows {
            rows.push(vec![family.name().to_string(), num(tr.gamma), num(p), num(v), num(tr.target)]);
        }
        records.extend(tr.records());
        trajectories.push(tr);
    }
    ctx.write_csv("csv", false, &["clock", "gamma", "parameter", "value", "target"], &rows)?;
    ctx.write_report(false, &records, Some(trajectories))
}

fn ensemble(ctx: &Context, phi: &HarmonicFn) -> Result<PathEnsemble, CliError> {
    let x = ctx.cfg.start()?;
    let times = ctx.cfg.times()?;
    Ok(simulate_conditioned_times(&ctx.model, phi, x, &times, &ctx.mc)?)
}

fn simulate(ctx: &mut Context) -> Result<(), CliError> {
    let phi = ctx.harmonic()?;
    let ens = ensemble(ctx, &phi)?;
    let summary: Vec<Vec<String>> = ens
        .summary()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                num(s.t),
                num(s.mean_weight),
                num(s.mean_weight_stderr),
                num(s.survival_fraction),
                num(s.weighted_mean_x),
                num(ens.weighted_median_abs(i)),
                num(s.absorbed_weight_mass),
            ]
        })
        .collect();
    ctx.write_csv(
        "summary.csv",
        true,
        &["t", "mean_weight", "mean_weight_stderr", "survival_fraction", "weighted_mean_x", "weighted_median_abs_x", "absorbed_weight_mass"],
        &summary,
    )?;
    let keep = ctx.cfg.output.record_paths.min(ens.n_paths);
    let mut paths = Vec::with_capacity(keep * ens.times.len());
    for p in 0..keep {
        for (i, t) in ens.times.iter().enumerate() {
            paths.push(vec![
                p.to_string(),
                num(*t),
                num(ens.values[i][p]),
                (ens.alive[i][p] as u8).to_string(),
                num(ens.weights[i][p]),
            ]);
        }
    }
    ctx.write_csv("paths.csv", true, &["path", "t", "x", "alive", "weight"], &paths)?;
    let records = martingale_records(&ens);
    #[derive(Serialize)]
    struct Details {
        biased: bool,
        phi_x0: f64,
    }
    ctx.write_report(
        true,
        &records,
        Some(Details {
            biased: ens.biased,
            phi_x0: ens.phi_x0,
        }),
    )
}

fn diagnose(ctx: &mut Context) -> Result<(), CliError> {
    let phi = ctx.harmonic()?;
    let ens = ensemble(ctx, &phi)?;
    if ens.times.len() < 2 {
        return Err(CliError::Validation("field `grid.times` needs at least two times for Diagnose".into()));
    }
    let mut records = martingale_records(&ens);
    let transience = transience_from_ensemble(&ens);
    records.extend(transience.records());
    if let Some(cc) = &ctx.cfg.cross_check {
        let threshold = cc.threshold;
        let cmp = estimator_cross_check(&ctx.model, &phi, ens.x0, cc.t, cc.q, |y| (y > threshold) as u8 as f64, &ctx.mc)?;
        let se = (cmp.weighted.error.powi(2) + cmp.rejection.stderr.powi(2)).sqrt();
        records.push(CheckRecord::statistical(
            "estimator_cross_check",
            &[("q", cc.q), ("t", cc.t), ("threshold", threshold)],
            cmp.weighted.value,
            se,
            cmp.rejection.estimate,
        ));
    }
    ctx.write_report(true, &records, Some(transience))
}

fn check_model(ctx: &mut Context) -> Result<(), CliError> {
    ctx.model.validate()?;
    let qs = if ctx.cfg.grid.q.is_empty() { vec![1.0] } else { ctx.cfg.grid.q.clone() };
    let spacing = match ctx.cfg.set.as_ref().map(|s| s.build()).transpose()? {
        Some(TargetSet::Lattice(l)) => Some(l),
        _ => None,
    };
    #[derive(Serialize)]
    struct Row {
        q: f64,
        report: AdmissibilityReport,
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for q in qs {
        let mut report = check_condition_a(&ctx.model, q)?;
        if let Some(l) = spacing {
            report.lattice_condition = Some(check_lattice_condition(&ctx.model, l, q)?);
        }
        records.push(CheckRecord::deterministic(
            "condition_a_integral",
            &[("q", q)],
            report.condition_a_integral_estimate,
            0.0,
            f64::NAN,
        ));
        rows.push(Row { q, report });
    }
    ctx.write_report(false, &records, Some(rows))
}
