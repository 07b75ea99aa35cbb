//! Resolvent density r_q, the differences h_q(x) = r_q(0) - r_q(-x) and the
//! renormalized zero resolvent h = lim_{q→0} h_q, all by Fourier inversion
//! of 1/(q + Ψ).
//!
//! With w(λ) = 1/(q + Ψ(λ)) = u + iv the integrands are
//!
//! * r_q(x): cos(λx) u + sin(λx) v
//! * h_q(x): 2 sin²(λx/2) u + sin(λx) v
//!
//! integrated over (0, ∞) and divided by π. The range is split at a cutoff
//! Λ. The head [0, Λ] gets panels between consecutive zeros of cos(λx); the
//! tail is the sum of a non-oscillatory power-law part and an oscillatory
//! part summed by half-periods.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::{fit_growth, LevyModel, ModelKind};
use crate::quadrature::{self, Integral, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailCutoff {
    AutoByOscillation,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub tail_cutoff_policy: TailCutoff,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_panels: 4096,
            tail_cutoff_policy: TailCutoff::AutoByOscillation,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidInput("quadrature tolerances must be positive".into()));
        }
        if self.max_panels < 64 {
            return Err(Error::InvalidInput(format!(
                "max_panels must be at least 64, got {}",
                self.max_panels
            )));
        }
        if let TailCutoff::Fixed(l) = self.tail_cutoff_policy {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidInput(format!("fixed cutoff must be positive, got {l}")));
            }
        }
        Ok(())
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance {
            abs: self.abs_tol,
            rel: self.rel_tol,
            max_panels: self.max_panels,
        }
    }
}

/// A resolvent-type value at (q, x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventValue {
    pub value: f64,
    pub error_estimate: f64,
    pub q: f64,
    pub x: f64,
}

/// A value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub const fn exact(value: f64) -> Estimate {
        Estimate { value, error: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Transform {
    Density,
    Difference,
}

/// Local growth order of |Ψ| at the origin, used to pick the substitution on
/// the first panel.
fn origin_order(model: &LevyModel) -> f64 {
    match model.kind() {
        ModelKind::BrownianMotion { .. } => 2.0,
        ModelKind::SymmetricStable { alpha } | ModelKind::AsymmetricStable { alpha, .. } => *alpha,
        ModelKind::UserExponent { .. } => fit_growth(|l| model.psi(l).norm(), 1e-6, 1e-5)
            .map(|(p, _)| p)
            .unwrap_or(1.5),
    }
}

fn cutoff(model: &LevyModel, q: f64, x: f64, cfg: &QuadratureConfig) -> f64 {
    let mut lam = match cfg.tail_cutoff_policy {
        TailCutoff::Fixed(l) => l,
        TailCutoff::AutoByOscillation => {
            let target = 8.0 * q.max(1.0);
            let mut l = 2f64.powi(-10);
            while model.psi(l).norm() < target && l < 2f64.powi(30) {
                l *= 2.0;
            }
            l
        }
    };
    if x != 0.0 {
        let period = PI / x.abs();
        // Keep the head panel count within budget for large |x|.
        let budget = (cfg.max_panels / 8) as f64 * period;
        if matches!(cfg.tail_cutoff_policy, TailCutoff::AutoByOscillation) && lam > budget {
            lam = budget.max(period);
        }
        // Move onto a zero of cos(λ|x|).
        let k = (lam / period - 0.5).ceil().max(0.0);
        lam = (k + 0.5) * period;
    }
    lam
}

/// Integral of f over [0, b] through λ = b s^k, which tames algebraic
/// behaviour at the origin.
fn origin_panel<F: Fn(f64) -> f64>(f: &F, b: f64, k: i32, tol: Tolerance) -> Result<Integral> {
    let kf = k as f64;
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let lam = b * s.powi(k);
        f(lam) * b * kf * s.powi(k - 1)
    };
    quadrature::adaptive(&g, &[0.0, 0.125, 0.5, 1.0], tol)
}

fn transform(model: &LevyModel, q: f64, x: f64, kind: Transform, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("x must be finite, got {x}")));
    }
    if kind == Transform::Difference && x == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let tol = cfg.tolerance();
    let w = |lam: f64| -> Complex64 {
        let d = q + model.psi(lam);
        if d.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            d.inv()
        }
    };
    let full = |lam: f64| -> f64 {
        let wv = w(lam);
        let (s, c) = (lam * x).sin_cos();
        match kind {
            Transform::Density => c * wv.re + s * wv.im,
            Transform::Difference => {
                let half = (0.5 * lam * x).sin();
                2.0 * half * half * wv.re + s * wv.im
            }
        }
    };

    let lam_max = cutoff(model, q, x, cfg);
    let mut breaks = vec![0.0];
    if x != 0.0 {
        let period = PI / x.abs();
        let zeros = (lam_max / period - 0.5).round() as usize;
        let stride = (zeros / (cfg.max_panels / 4).max(1)).max(1);
        let mut k = 0;
        while k < zeros {
            breaks.push((k as f64 + 0.5) * period);
            k += stride;
        }
    }
    if *breaks.last().unwrap() < lam_max * (1.0 - 1e-12) {
        breaks.push(lam_max);
    }
    let order = origin_order(model);
    let power = if order >= 1.999 { 2 } else { (1.0 / (2.0 - order)).ceil().clamp(2.0, 12.0) as i32 };
    let mut total = origin_panel(&full, breaks[1], power, tol)?;
    if breaks.len() > 2 {
        total = total.add(quadrature::adaptive(&full, &breaks[1..], tol)?);
    }

    let p = model.tail_exponent()?;
    if p <= 1.0 {
        return Err(Error::IndeterminateTail(format!("tail order {p} does not exceed 1")));
    }
    let tail = match (kind, x == 0.0) {
        (Transform::Density, true) => quadrature::power_tail(&|l| w(l).re, lam_max, p, tol)?,
        (Transform::Density, false) => quadrature::oscillatory_tail(&full, lam_max, PI / x.abs(), tol)?,
        (Transform::Difference, _) => {
            let smooth = quadrature::power_tail(&|l| w(l).re, lam_max, p, tol)?;
            let osc = |l: f64| {
                let wv = w(l);
                let (s, c) = (l * x).sin_cos();
                -(c * wv.re - s * wv.im)
            };
            smooth.add(quadrature::oscillatory_tail(&osc, lam_max, PI / x.abs(), tol)?)
        }
    };
    total = total.add(tail);
    Ok(Estimate {
        value: total.value / PI,
        error: total.error / PI,
    })
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("q must be positive, got {q}")))
    }
}

/// r_q(x).
pub fn resolvent_density(model: &LevyModel, q: f64, x: f64, cfg: &QuadratureConfig) -> Result<ResolventValue> {
    check_q(q)?;
    let e = transform(model, q, x, Transform::Density, cfg)?;
    Ok(ResolventValue {
        value: e.value,
        error_estimate: e.error,
        q,
        x,
    })
}

/// h_q(x) = r_q(0) - r_q(-x) as a single integral.
pub fn h_q(model: &LevyModel, q: f64, x: f64, cfg: &QuadratureConfig) -> Result<ResolventValue> {
    check_q(q)?;
    let e = transform(model, q, x, Transform::Difference, cfg)?;
    Ok(ResolventValue {
        value: e.value,
        error_estimate: e.error,
        q,
        x,
    })
}

const ORIGIN_PROBES: [f64; 3] = [1e-8, 1e-6, 1e-4];
const ORIGIN_SLOPE_LIMIT: f64 = -0.9;

/// Rejects integrands Re[(1 - e^{iλx})/Ψ(λ)] growing faster than λ^{-0.9}
/// at the origin.
fn probe_origin(model: &LevyModel, x: f64) -> Result<()> {
    let f = |lam: f64| {
        let wv = model.psi(lam).inv();
        let half = (0.5 * lam * x).sin();
        (2.0 * half * half * wv.re + (lam * x).sin() * wv.im).abs()
    };
    let vals: Vec<f64> = ORIGIN_PROBES.iter().map(|&l| f(l)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularOrigin { exponent: f64::NEG_INFINITY });
    }
    for i in 0..2 {
        if vals[i] == 0.0 || vals[i + 1] == 0.0 {
            continue;
        }
        let slope = (vals[i + 1] / vals[i]).ln() / (ORIGIN_PROBES[i + 1] / ORIGIN_PROBES[i]).ln();
        if slope < ORIGIN_SLOPE_LIMIT {
            return Err(Error::SingularOrigin { exponent: slope });
        }
    }
    Ok(())
}

/// h(x), the q = 0 integral.
pub fn h(model: &LevyModel, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if x == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    probe_origin(model, x)?;
    transform(model, 0.0, x, Transform::Difference, cfg)
}

/// h(x) + γx/m², with the tilt dropped when m² = ∞.
pub fn h_gamma(model: &LevyModel, gamma: f64, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_gamma(gamma)?;
    let base = h(model, x, cfg)?;
    Ok(Estimate {
        value: base.value + tilt(model, gamma) * x,
        error: base.error,
    })
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gamma must lie in [-1, 1], got {gamma}")))
    }
}

/// γ/m², zero for infinite variance.
pub fn tilt(model: &LevyModel, gamma: f64) -> f64 {
    if model.m2().is_finite() {
        gamma / model.m2()
    } else {
        0.0
    }
}

/// Pairs (q, q·r_q(0)) along a decreasing grid.
pub fn qr0_limit_check(model: &LevyModel, q_grid: &[f64], cfg: &QuadratureConfig) -> Result<Vec<(f64, f64)>> {
    if q_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("q grid must be strictly decreasing".into()));
    }
    q_grid
        .iter()
        .map(|&q| Ok((q, q * resolvent_density(model, q, 0.0, cfg)?.value)))
        .collect()
}

/// Richardson extrapolation of h_q(x) on q ∈ {1e-2, 1e-3, 1e-4}, assuming an
/// expansion in powers of √q.
pub fn h_extrapolated(model: &LevyModel, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let qs = [1e-2, 1e-3, 1e-4];
    let mut vals = [0.0; 3];
    let mut err = 0.0;
    for (v, &q) in vals.iter_mut().zip(&qs) {
        let r = h_q(model, q, x, cfg)?;
        *v = r.value;
        err += r.error_estimate;
    }
    // Solve v_i = h + c1 s_i + c2 s_i² for h.
    let s: Vec<f64> = qs.iter().map(|q| q.sqrt()).collect();
    let m = nalgebra::Matrix3::new(1.0, s[0], s[0] * s[0], 1.0, s[1], s[1] * s[1], 1.0, s[2], s[2] * s[2]);
    let rhs = nalgebra::Vector3::new(vals[0], vals[1], vals[2]);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned { condition: f64::INFINITY })?;
    Ok(Estimate {
        value: sol[0],
        error: err + (sol[0] - vals[2]).abs() * 1e-2,
    })
}

/// Direct and extrapolated h(x) side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationCheck {
    pub x: f64,
    pub direct: f64,
    pub extrapolated: f64,
    pub discrepancy: f64,
}

/// Threshold above which the extrapolation check logs a warning.
pub const EXTRAPOLATION_WARN: f64 = 1e-4;

pub fn cross_check_h(model: &LevyModel, x: f64, cfg: &QuadratureConfig) -> Result<ExtrapolationCheck> {
    let direct = h(model, x, cfg)?.value;
    let extrapolated = h_extrapolated(model, x, cfg)?.value;
    let discrepancy = (direct - extrapolated).abs();
    if discrepancy > EXTRAPOLATION_WARN {
        warn!("h({x}) = {direct} but small-q extrapolation gives {extrapolated} (difference {discrepancy:e})");
    }
    Ok(ExtrapolationCheck {
        x,
        direct,
        extrapolated,
        discrepancy,
    })
}

/// A translation kernel k(y) evaluated with an error estimate.
pub trait Kernel: Send + Sync {
    fn eval(&self, y: f64) -> Result<Estimate>;
}

/// y ↦ h(y).
#[derive(Clone, Debug)]
pub struct HKernel {
    pub model: LevyModel,
    pub cfg: QuadratureConfig,
}

impl Kernel for HKernel {
    fn eval(&self, y: f64) -> Result<Estimate> {
        h(&self.model, y, &self.cfg)
    }
}

/// y ↦ h_q(y).
#[derive(Clone, Debug)]
pub struct HqKernel {
    pub model: LevyModel,
    pub q: f64,
    pub cfg: QuadratureConfig,
}

impl Kernel for HqKernel {
    fn eval(&self, y: f64) -> Result<Estimate> {
        let r = h_q(&self.model, self.q, y, &self.cfg)?;
        Ok(Estimate {
            value: r.value,
            error: r.error_estimate,
        })
    }
}

/// y ↦ r_q(y).
#[derive(Clone, Debug)]
pub struct RqKernel {
    pub model: LevyModel,
    pub q: f64,
    pub cfg: QuadratureConfig,
}

impl Kernel for RqKernel {
    fn eval(&self, y: f64) -> Result<Estimate> {
        let r = resolvent_density(&self.model, self.q, y, &self.cfg)?;
        Ok(Estimate {
            value: r.value,
            error: r.error_estimate,
        })
    }
}

/// h tabulated on a uniform grid through 0, interpolated by 4-point Lagrange
/// stencils that never straddle the kink at the origin. Arguments outside
/// the table fall back to quadrature.
#[derive(Clone, Debug)]
pub struct HTable {
    step: f64,
    half: usize,
    values: Vec<f64>,
    max_error: f64,
    fallback: HKernel,
}

impl HTable {
    /// Tabulates on [-half_width, half_width] with spacing close to `step`.
    pub fn build(model: &LevyModel, half_width: f64, step: f64, cfg: &QuadratureConfig) -> Result<HTable> {
        if !(half_width > 0.0 && step > 0.0 && step < half_width) {
            return Err(Error::InvalidInput(format!(
                "table needs 0 < step < half_width, got step {step}, half_width {half_width}"
            )));
        }
        let half = (half_width / step).ceil() as usize;
        let step = half_width / half as f64;
        let grid: Vec<f64> = (0..=2 * half).map(|i| (i as f64 - half as f64) * step).collect();
        let evals: Vec<Estimate> = grid
            .par_iter()
            .map(|&y| h(model, y, cfg))
            .collect::<Result<Vec<_>>>()?;
        let max_error = evals.iter().map(|e| e.error).fold(0.0, f64::max);
        Ok(HTable {
            step,
            half,
            values: evals.iter().map(|e| e.value).collect(),
            max_error,
            fallback: HKernel {
                model: model.clone(),
                cfg: *cfg,
            },
        })
    }

    pub fn half_width(&self) -> f64 {
        self.step * self.half as f64
    }

    /// Interpolated value inside the table, `None` outside.
    pub fn lookup(&self, y: f64) -> Option<f64> {
        let pos = y / self.step + self.half as f64;
        let last = 2 * self.half;
        if !(pos >= 0.0 && pos <= last as f64) {
            return None;
        }
        let i = (pos.floor() as usize).min(last - 1);
        // Stencil i-1..=i+2 clipped to one side of the origin index.
        let (lo, hi) = if y >= 0.0 { (self.half, last) } else { (0, self.half) };
        let mut start = i.saturating_sub(1).max(lo);
        if start + 3 > hi {
            start = hi.saturating_sub(3).max(lo);
        }
        let end = (start + 3).min(hi);
        let mut acc = 0.0;
        for j in start..=end {
            let mut basis = 1.0;
            for k in start..=end {
                if k != j {
                    basis *= (pos - k as f64) / (j as f64 - k as f64);
                }
            }
            acc += basis * self.values[j];
        }
        Some(acc)
    }
}

impl Kernel for HTable {
    fn eval(&self, y: f64) -> Result<Estimate> {
        match self.lookup(y) {
            Some(v) => Ok(Estimate {
                value: v,
                error: self.max_error,
            }),
            None => self.fallback.eval(y),
        }
    }
}
