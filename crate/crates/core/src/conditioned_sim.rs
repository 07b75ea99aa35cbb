//! Clock limits and the h-transformed dynamics.
//!
//! The clock limits are computed exactly from the hitting systems. The
//! conditioned law is sampled by weighting unconditioned paths with
//! w_t = φ(X_t) 1{T_A > t} / φ(x).

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{AvoidSet, HarmonicFn, HarmonicKind};
use crate::hitting::{self, finite_set_hitting_limit, PointSet};
use crate::levy_model::{sample_increment, LevyModel, ModelKind};
use crate::paths::{path_rng, Step, Stepper};
use crate::report::CheckRecord;
use crate::resolvent::{Estimate, QuadratureConfig};

pub use crate::paths::MCConfig;

/// One member of a clock family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClockSpec {
    Exponential { q: f64 },
    OnePointHit { c: f64 },
    TwoPointHit { c: f64, d: f64, gamma_target: f64 },
    InverseLocalTime { c: f64, u: f64 },
}

/// A clock family indexed by q (exponential) or c (the others).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClockFamily {
    Exponential,
    OnePointHit,
    TwoPointHit { gamma: f64 },
    InverseLocalTime { u: f64 },
}

impl ClockFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ClockFamily::Exponential => "exponential",
            ClockFamily::OnePointHit => "one_point_hit",
            ClockFamily::TwoPointHit { .. } => "two_point_hit",
            ClockFamily::InverseLocalTime { .. } => "inverse_local_time",
        }
    }

    /// The γ selected in the limit along a grid of parameter `sample`.
    pub fn limit_gamma(&self, sample: f64) -> f64 {
        match self {
            ClockFamily::Exponential => 0.0,
            ClockFamily::OnePointHit | ClockFamily::InverseLocalTime { .. } => sample.signum(),
            ClockFamily::TwoPointHit { gamma } => *gamma,
        }
    }

    /// The family member at parameter p.
    pub fn member(&self, p: f64) -> Result<ClockSpec> {
        Ok(match *self {
            ClockFamily::Exponential => ClockSpec::Exponential { q: p },
            ClockFamily::OnePointHit => ClockSpec::OnePointHit { c: p },
            ClockFamily::TwoPointHit { gamma } => {
                if !(gamma.abs() < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "two-point clocks need |gamma| < 1, got {gamma}"
                    )));
                }
                // (d - c)/(c + d) = γ
                ClockSpec::TwoPointHit {
                    c: p,
                    d: p * (1.0 + gamma) / (1.0 - gamma),
                    gamma_target: gamma,
                }
            }
            ClockFamily::InverseLocalTime { u } => ClockSpec::InverseLocalTime { c: p, u },
        })
    }
}

fn point_probability(sol: &hitting::HittingSolution, point: f64) -> f64 {
    sol.set.index_of(point).map(|i| sol.probs[i]).unwrap_or(0.0)
}

/// The normalized clock quantity for one clock.
pub fn clock_value(model: &LevyModel, set: &PointSet, x: f64, clock: ClockSpec, cfg: &QuadratureConfig) -> Result<f64> {
    let outside = |c: f64| -> Result<()> {
        if set.contains(c) || c == x {
            Err(Error::InvalidInput(format!("auxiliary point {c} must avoid A and x")))
        } else {
            Ok(())
        }
    };
    match clock {
        ClockSpec::Exponential { q } => Ok(hitting::normalized_survival(model, q, x, set, cfg)?.value),
        ClockSpec::OnePointHit { c } => {
            outside(c)?;
            let sol = finite_set_hitting_limit(model, x, &set.union(&[c])?, cfg)?;
            Ok(hitting::h_b(model, c, cfg)? * point_probability(&sol, c))
        }
        ClockSpec::TwoPointHit { c, d, .. } => {
            outside(c)?;
            outside(-d)?;
            let sol = finite_set_hitting_limit(model, x, &set.union(&[c, -d])?, cfg)?;
            let p = point_probability(&sol, c) + point_probability(&sol, -d);
            Ok(hitting::h_c(model, c, d, cfg)? * p)
        }
        ClockSpec::InverseLocalTime { c, u } => {
            let base = clock_value(model, set, x, ClockSpec::OnePointHit { c }, cfg)?;
            if u == 0.0 {
                return Ok(base);
            }
            let g = hitting::green_at_origin(model, &set.shifted(-c)?, cfg)?;
            Ok(base * (-u / g).exp())
        }
    }
}

/// A clock trajectory and its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockTrajectory {
    pub family: ClockFamily,
    pub gamma: f64,
    pub rows: Vec<(f64, f64)>,
    pub target: f64,
}

impl ClockTrajectory {
    pub fn final_value(&self) -> f64 {
        self.rows.last().map(|r| r.1).unwrap_or(f64::NAN)
    }

    pub fn records(&self) -> Vec<CheckRecord> {
        self.rows
            .iter()
            .map(|&(p, v)| {
                let key = if matches!(self.family, ClockFamily::Exponential) { "q" } else { "c" };
                CheckRecord::deterministic(
                    &format!("clock_{}", self.family.name()),
                    &[(key, p), ("gamma", self.gamma)],
                    v,
                    (v - self.target).abs(),
                    self.target,
                )
            })
            .collect()
    }
}

/// Largest relative change allowed between the last two grid values.
pub const GRID_CHANGE_LIMIT: f64 = 0.05;

/// Evaluates a clock family along `grid` and the limit φ^{(γ)}(x).
pub fn verify_clock_limit(
    model: &LevyModel,
    set: &PointSet,
    x: f64,
    family: ClockFamily,
    grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ClockTrajectory> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("clock grid needs at least two values".into()));
    }
    let gamma = family.limit_gamma(grid[grid.len() - 1]);
    if grid.iter().any(|&p| family.limit_gamma(p) != gamma) {
        return Err(Error::InvalidInput("clock grid must not change sign".into()));
    }
    let rows: Vec<(f64, f64)> = grid
        .iter()
        .map(|&p| Ok((p, clock_value(model, set, x, family.member(p)?, cfg)?)))
        .collect::<Result<_>>()?;
    let target = HarmonicFn::points(model, set.clone(), gamma, cfg)?.eval(x)?.value;
    let (prev, last) = (rows[rows.len() - 2].1, rows[rows.len() - 1].1);
    let scale = last.abs().max(prev.abs());
    let change = if scale > 0.0 { (last - prev).abs() / scale } else { 0.0 };
    if change > GRID_CHANGE_LIMIT {
        return Err(Error::GridTooCoarse { relative_change: change });
    }
    Ok(ClockTrajectory {
        family,
        gamma,
        rows,
        target,
    })
}

/// Weighted path skeletons observed at fixed times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub x0: f64,
    pub phi_x0: f64,
    /// values[i][p]: X at times[i] on path p (absorption point once absorbed).
    pub values: Vec<Vec<f64>>,
    pub alive: Vec<Vec<bool>>,
    pub weights: Vec<Vec<f64>>,
    pub phi_values: Vec<Vec<f64>>,
    pub dt: f64,
    pub n_paths: usize,
    pub root_seed: u64,
    pub biased: bool,
}

/// Per-time summary of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSummary {
    pub t: f64,
    pub mean_weight: f64,
    pub mean_weight_stderr: f64,
    pub survival_fraction: f64,
    pub weighted_mean_x: f64,
    pub absorbed_weight_mass: f64,
}

/// Sample mean and standard error, accumulated about the first value so a
/// constant sample is reproduced exactly.
fn mean_stderr(values: impl Iterator<Item = f64>, n: usize) -> Estimate {
    let mut values = values.peekable();
    let shift = values.peek().copied().unwrap_or(0.0);
    let (mut s, mut s2) = (0.0, 0.0);
    for v in values {
        let d = v - shift;
        s += d;
        s2 += d * d;
    }
    let nf = n as f64;
    let mean = s / nf;
    let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Estimate {
        value: shift + mean,
        error: (var / nf).sqrt(),
    }
}

impl PathEnsemble {
    /// Ê[F] = mean of w·F(X_t) at time index i, with standard error.
    pub fn weighted_mean<F: Fn(f64) -> f64>(&self, i: usize, f: F) -> Estimate {
        let it = self.weights[i].iter().zip(&self.values[i]).map(|(w, x)| if *w == 0.0 { 0.0 } else { w * f(*x) });
        mean_stderr(it, self.n_paths)
    }

    pub fn mean_weight(&self, i: usize) -> Estimate {
        mean_stderr(self.weights[i].iter().cloned(), self.n_paths)
    }

    /// Total weight carried by absorbed paths (zero by construction).
    pub fn absorbed_weight_mass(&self, i: usize) -> f64 {
        self.weights[i]
            .iter()
            .zip(&self.alive[i])
            .filter(|(_, a)| !**a)
            .map(|(w, _)| *w)
            .sum()
    }

    /// Weighted median of |X_t|.
    pub fn weighted_median_abs(&self, i: usize) -> f64 {
        let mut pairs: Vec<(f64, f64)> = self.values[i]
            .iter()
            .zip(&self.weights[i])
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| (x.abs(), *w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        for (x, w) in &pairs {
            acc += w;
            if acc >= 0.5 * total {
                return *x;
            }
        }
        f64::NAN
    }

    pub fn summary(&self) -> Vec<TimeSummary> {
        (0..self.times.len())
            .map(|i| {
                let mw = self.mean_weight(i);
                TimeSummary {
                    t: self.times[i],
                    mean_weight: mw.value,
                    mean_weight_stderr: mw.error,
                    survival_fraction: self.alive[i].iter().filter(|a| **a).count() as f64 / self.n_paths as f64,
                    weighted_mean_x: self.weighted_mean(i, |x| x).value,
                    absorbed_weight_mass: self.absorbed_weight_mass(i),
                }
            })
            .collect()
    }
}

/// φ(x) at or below this value is treated as zero.
pub const PHI_ZERO_TOL: f64 = 1e-9;

/// Half-width of the h table covering the paths up to time t.
fn table_half_width(model: &LevyModel, phi: &HarmonicFn, x: f64, t: f64) -> f64 {
    let span = match phi.set() {
        AvoidSet::Points(p) => (x - p.min()).abs().max((x - p.max()).abs()),
        _ => 0.0,
    };
    let spread = match model.kind() {
        ModelKind::BrownianMotion { sigma } => 10.0 * sigma * t.sqrt(),
        ModelKind::SymmetricStable { alpha } | ModelKind::AsymmetricStable { alpha, .. } => 20.0 * t.powf(1.0 / alpha),
        ModelKind::UserExponent { .. } => 20.0 * t.sqrt(),
    };
    (span + spread + 1.0).min(500.0)
}

/// Simulates to each of `times` (sorted, non-negative) with fixed steps.
pub fn simulate_conditioned_times(
    model: &LevyModel,
    phi: &HarmonicFn,
    x: f64,
    times: &[f64],
    mc: &MCConfig,
) -> Result<PathEnsemble> {
    mc.validate()?;
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("observation times must be non-negative and sorted".into()));
    }
    if phi.kind() == HarmonicKind::BoundedSet {
        return Err(Error::InvalidInput(
            "bounded-set harmonic functions are Monte Carlo estimates; weights need a deterministic φ".into(),
        ));
    }
    let fast = phi.accelerated(table_half_width(model, phi, x, *times.last().unwrap()))?;
    let phi_x = fast.value(x)?;
    if phi_x <= PHI_ZERO_TOL {
        return Err(Error::ZeroDenominator { value: phi_x });
    }
    let set = phi.set().clone();
    let stepper = Stepper::new(model, &set)?;
    let per_path: Vec<Result<Vec<(f64, bool, f64)>>> = (0..mc.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(mc.root_seed, i);
            let mut out = Vec::with_capacity(times.len());
            let mut pos = x;
            let mut alive = true;
            let mut now = 0.0;
            for &t in times {
                if alive && t > now {
                    match stepper.run_fixed(pos, t - now, mc.dt, &mut rng)? {
                        Step::Alive(y) => pos = y,
                        Step::Absorbed(y) => {
                            pos = y;
                            alive = false;
                        }
                    }
                }
                now = t;
                let phi_t = if alive { fast.value(pos)? } else { 0.0 };
                out.push((pos, alive, phi_t));
            }
            Ok(out)
        })
        .collect();
    let k = times.len();
    let mut values = vec![Vec::with_capacity(mc.n_paths); k];
    let mut alive = vec![Vec::with_capacity(mc.n_paths); k];
    let mut weights = vec![Vec::with_capacity(mc.n_paths); k];
    let mut phi_values = vec![Vec::with_capacity(mc.n_paths); k];
    for path in per_path {
        for (i, (v, a, p)) in path?.into_iter().enumerate() {
            values[i].push(v);
            alive[i].push(a);
            phi_values[i].push(p);
            weights[i].push(if a { p / phi_x } else { 0.0 });
        }
    }
    Ok(PathEnsemble {
        times: times.to_vec(),
        x0: x,
        phi_x0: phi_x,
        values,
        alive,
        weights,
        phi_values,
        dt: mc.dt,
        n_paths: mc.n_paths,
        root_seed: mc.root_seed,
        biased: stepper.biased(),
    })
}

/// Simulates to the single time t.
pub fn simulate_conditioned(model: &LevyModel, phi: &HarmonicFn, x: f64, t: f64, mc: &MCConfig) -> Result<PathEnsemble> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("time must be positive, got {t}")));
    }
    simulate_conditioned_times(model, phi, x, &[t], mc)
}

/// Ê[φ(X_t) 1{T_A > t}] against φ(x) at each time.
pub fn martingale_check(model: &LevyModel, phi: &HarmonicFn, x: f64, times: &[f64], mc: &MCConfig) -> Result<Vec<CheckRecord>> {
    let ens = simulate_conditioned_times(model, phi, x, times, mc)?;
    Ok(martingale_records(&ens))
}

pub fn martingale_records(ens: &PathEnsemble) -> Vec<CheckRecord> {
    (0..ens.times.len())
        .map(|i| {
            let e = mean_stderr(ens.phi_values[i].iter().cloned(), ens.n_paths);
            CheckRecord::statistical(
                "martingale",
                &[("t", ens.times[i]), ("n_paths", ens.n_paths as f64)],
                e.value,
                e.error,
                ens.phi_x0,
            )
        })
        .collect()
}

/// Transience indicators under the weighted law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceReport {
    pub times: Vec<f64>,
    /// Weighted E[1/φ(X_t)] with standard errors.
    pub inverse_phi: Vec<Estimate>,
    /// Paired decrease between consecutive times: (mean, stderr).
    pub decrements: Vec<Estimate>,
    pub weighted_medians: Vec<f64>,
    pub absorbed_weight_mass: Vec<f64>,
    pub decreasing: bool,
    pub medians_increasing: bool,
}

impl TransienceReport {
    pub fn records(&self) -> Vec<CheckRecord> {
        let mut out = Vec::new();
        for (i, e) in self.inverse_phi.iter().enumerate() {
            out.push(CheckRecord::deterministic(
                "transience_inverse_phi",
                &[("t", self.times[i])],
                e.value,
                e.error,
                f64::NAN,
            ));
        }
        for (i, d) in self.decrements.iter().enumerate() {
            // Decrements are tested against 0 from above.
            out.push(CheckRecord::deterministic(
                "transience_decrement",
                &[("t0", self.times[i]), ("t1", self.times[i + 1])],
                d.value,
                d.error,
                0.0,
            ));
        }
        for (i, m) in self.weighted_medians.iter().enumerate() {
            out.push(CheckRecord::deterministic("transience_median_abs_x", &[("t", self.times[i])], *m, 0.0, f64::NAN));
        }
        out
    }
}

/// Margin, in standard errors, required for each decrease.
pub const TRANSIENCE_MARGIN: f64 = 3.0;

pub fn transience_diagnostic(model: &LevyModel, phi: &HarmonicFn, x: f64, times: &[f64], mc: &MCConfig) -> Result<TransienceReport> {
    if times.len() < 2 {
        return Err(Error::InvalidInput("transience needs at least two times".into()));
    }
    let ens = simulate_conditioned_times(model, phi, x, times, mc)?;
    Ok(transience_from_ensemble(&ens))
}

pub fn transience_from_ensemble(ens: &PathEnsemble) -> TransienceReport {
    let inv = |i: usize, p: usize| -> f64 {
        let phi_t = ens.phi_values[i][p];
        if ens.alive[i][p] && phi_t > 0.0 {
            ens.weights[i][p] / phi_t
        } else {
            0.0
        }
    };
    let k = ens.times.len();
    let inverse_phi: Vec<Estimate> = (0..k).map(|i| mean_stderr((0..ens.n_paths).map(|p| inv(i, p)), ens.n_paths)).collect();
    let decrements: Vec<Estimate> = (0..k - 1)
        .map(|i| mean_stderr((0..ens.n_paths).map(|p| inv(i, p) - inv(i + 1, p)), ens.n_paths))
        .collect();
    let weighted_medians: Vec<f64> = (0..k).map(|i| ens.weighted_median_abs(i)).collect();
    TransienceReport {
        times: ens.times.clone(),
        decreasing: decrements.iter().all(|d| d.value > TRANSIENCE_MARGIN * d.error),
        medians_increasing: weighted_medians.windows(2).all(|w| w[1] > w[0]),
        absorbed_weight_mass: (0..k).map(|i| ens.absorbed_weight_mass(i)).collect(),
        inverse_phi,
        decrements,
        weighted_medians,
    }
}

/// Result of the exponential-clock rejection estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub accepted: usize,
    pub total: usize,
}

/// Estimates E_x[F(X_t) | T_A > e_q] by simulating e_q independently and
/// keeping the paths that survive it.
pub fn rejection_estimate<F>(model: &LevyModel, set: &AvoidSet, x: f64, t: f64, q: f64, f: F, mc: &MCConfig) -> Result<RejectionEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    mc.validate()?;
    if !(q > 0.0 && t > 0.0) {
        return Err(Error::InvalidInput("rejection estimator needs q > 0 and t > 0".into()));
    }
    let clock = Exp::new(q).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let stepper = Stepper::new(model, set)?;
    let outcomes: Vec<Result<Option<f64>>> = (0..mc.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(mc.root_seed, i);
            let e: f64 = clock.sample(&mut rng);
            let first = e.min(t);
            let pos = match stepper.run_fixed(x, first, mc.dt, &mut rng)? {
                Step::Alive(y) => y,
                Step::Absorbed(_) => return Ok(None),
            };
            if e <= t {
                // Survived the clock; the path continues freely to t.
                let mut y = pos;
                let mut now = e;
                while now < t {
                    let h = mc.dt.min(t - now);
                    y += sample_increment(model, h, &mut rng)?;
                    now += h;
                }
                return Ok(Some(y));
            }
            match stepper.run_adaptive(pos, e - t, mc.dt, &mut rng)? {
                Step::Alive(_) => Ok(Some(pos)),
                Step::Absorbed(_) => Ok(None),
            }
        })
        .collect();
    let mut kept = Vec::new();
    for o in outcomes {
        if let Some(y) = o? {
            kept.push(f(y));
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput("no path survived the exponential clock".into()));
    }
    let e = mean_stderr(kept.iter().cloned(), kept.len());
    Ok(RejectionEstimate {
        estimate: e.value,
        stderr: e.error,
        accepted: kept.len(),
        total: mc.n_paths,
    })
}

/// The weighted and rejection estimators of the same conditioned
/// expectation, with the z-score of their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorComparison {
    pub weighted: Estimate,
    pub rejection: RejectionEstimate,
    pub z: f64,
}

pub fn estimator_cross_check<F>(
    model: &LevyModel,
    phi: &HarmonicFn,
    x: f64,
    t: f64,
    q: f64,
    f: F,
    mc: &MCConfig,
) -> Result<EstimatorComparison>
where
    F: Fn(f64) -> f64 + Sync,
{
    let ens = simulate_conditioned(model, phi, x, t, mc)?;
    let weighted = ens.weighted_mean(0, &f);
    // Independent randomness for the second estimator.
    let rmc = mc.with_seed(mc.root_seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let rejection = rejection_estimate(model, phi.set(), x, t, q, &f, &rmc)?;
    let z = (weighted.value - rejection.estimate) / (weighted.error.powi(2) + rejection.stderr.powi(2)).sqrt();
    Ok(EstimatorComparison { weighted, rejection, z })
}

/// Draws a uniform in [0, 1) from a path stream; exposed for reproducibility
/// tests of the stream layout.
pub fn stream_probe(root_seed: u64, index: u64) -> f64 {
    path_rng(root_seed, index).random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0).unwrap()
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn two() -> PointSet {
        PointSet::new(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn exponential_clock_approaches_phi() {
        let tr = verify_clock_limit(&bm(), &two(), 2.0, ClockFamily::Exponential, &[1e-1, 1e-2, 1e-3, 1e-4], &cfg()).unwrap();
        assert!((tr.target - 1.0).abs() < 1e-9);
        for (q, v) in &tr.rows {
            let s = (2.0 * q).sqrt();
            assert!((v - (1.0 - (-s).exp()) / s).abs() < 1e-8, "q={q}: {v}");
        }
    }

    #[test]
    fn one_point_and_local_time_clocks() {
        let grid = [10.0, 30.0, 100.0];
        let oh = verify_clock_limit(&bm(), &two(), 2.0, ClockFamily::OnePointHit, &grid, &cfg()).unwrap();
        assert!((oh.target - 2.0).abs() < 1e-9);
        for (c, v) in &oh.rows {
            assert!((v - 2.0 * c / (c - 1.0)).abs() < 1e-7);
        }
        let il = verify_clock_limit(&bm(), &two(), 2.0, ClockFamily::InverseLocalTime { u: 0.0 }, &grid, &cfg()).unwrap();
        assert_eq!(il.rows, oh.rows);
        let il = verify_clock_limit(&bm(), &two(), 2.0, ClockFamily::InverseLocalTime { u: 1.0 }, &grid, &cfg()).unwrap();
        // Green function of {-c, 1 - c} at 0 is 2(c - 1) for BM.
        let v = il.rows[2].1;
        assert!((v - 2.0 * 100.0 / 99.0 * (-1.0 / 198f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn two_point_clock_targets_tilted_phi() {
        let fam = ClockFamily::TwoPointHit { gamma: 0.5 };
        let tr = verify_clock_limit(&bm(), &two(), 2.0, fam, &[100.0, 1000.0, 10000.0], &cfg()).unwrap();
        assert!((tr.target - 1.5).abs() < 1e-9);
        assert!((tr.final_value() - 1.5).abs() < 1e-2, "{tr:?}");
        assert!(ClockFamily::TwoPointHit { gamma: 1.0 }.member(1.0).is_err());
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let r = verify_clock_limit(&bm(), &two(), 2.0, ClockFamily::OnePointHit, &[3.0, 4.0], &cfg());
        assert!(matches!(r, Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn zero_denominator() {
        let phi = HarmonicFn::points(&bm(), two(), 0.0, &cfg()).unwrap();
        let mc = MCConfig { n_paths: 10, ..Default::default() };
        assert!(matches!(
            simulate_conditioned(&bm(), &phi, 0.5, 1.0, &mc),
            Err(Error::ZeroDenominator { .. })
        ));
    }

    #[test]
    fn small_ensemble_properties() {
        let phi = HarmonicFn::points(&bm(), two(), 0.0, &cfg()).unwrap();
        let mc = MCConfig {
            n_paths: 4000,
            dt: 1e-2,
            ..Default::default()
        };
        let ens = simulate_conditioned_times(&bm(), &phi, 2.0, &[0.0, 0.5, 1.0], &mc).unwrap();
        assert!(ens.weights[0].iter().all(|w| *w == 1.0));
        for i in 0..3 {
            assert_eq!(ens.absorbed_weight_mass(i), 0.0);
            assert!(ens.weights[i].iter().all(|w| *w >= 0.0));
            let m = ens.mean_weight(i);
            assert!((m.value - 1.0).abs() <= 3.0 * m.error + 1e-12, "{m:?}");
        }
        let again = simulate_conditioned_times(&bm(), &phi, 2.0, &[0.0, 0.5, 1.0], &mc).unwrap();
        assert_eq!(ens, again);
    }

    #[test]
    fn bounded_set_functions_are_not_simulated() {
        let iv = crate::harmonic::IntervalUnion::new(vec![(0.0, 1.0)]).unwrap();
        let mc = MCConfig { n_paths: 10, ..Default::default() };
        let phi = HarmonicFn::bounded(&bm(), iv, mc, &cfg()).unwrap();
        assert!(matches!(simulate_conditioned(&bm(), &phi, 2.0, 1.0, &mc), Err(Error::InvalidInput(_))));
    }
}
