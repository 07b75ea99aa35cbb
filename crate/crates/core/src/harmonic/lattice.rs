//! Fourier series on the lattice LZ.
//!
//! With λ_n = 2πn/L and θ = 2πx/L the terms ±n are paired into real terms,
//! for example φ_{LZ}(x) = Σ_{n≥1} 2 Re[(1 - e^{iθn})/Ψ(λ_n)]. Partial sums
//! are extended by doubling N. The non-oscillating part of the remainder is
//! added from the fitted power law C n^{-p}; the oscillating part is bounded
//! by summation by parts, 2C N^{-p}/|sin(θ/2)|.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy_model::{LevyModel, TAIL_ORDER_THRESHOLD};
use crate::resolvent::Estimate;

/// Default truncation tolerance.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
const START_TERMS: usize = 64;
const MAX_TERMS: usize = 1 << 20;

/// Partial sums of Σ_{n≥1} term(n) with the tail treatment above.
/// `term(n)` returns (full term, non-oscillating part).
fn paired_series<T>(model: &LevyModel, spacing: f64, q: f64, theta: f64, tail_tol: f64, term: T) -> Result<Estimate>
where
    T: Fn(usize, Complex64) -> (f64, f64),
{
    let base = 2.0 * PI / spacing;
    let w = |n: usize| (q + model.psi(base * n as f64)).inv();
    let oscillates = (0.5 * theta).sin().abs() > 1e-300;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut n_done = 0;
    let mut target = START_TERMS;
    loop {
        for n in (n_done + 1)..=target {
            // Kahan summation keeps 10^6 terms at rounding level.
            let y = term(n, w(n)).0 - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        n_done = target;
        let n = n_done as f64;
        let wn = w(n_done);
        let psi_n = model.psi(base * n).norm();
        let psi_h = model.psi(base * (n_done / 2) as f64).norm();
        let p = (psi_n / psi_h).ln() / 2f64.ln();
        if !(p > TAIL_ORDER_THRESHOLD) {
            return Err(Error::TailNotConvergent { exponent: p });
        }
        let (_, smooth_n) = term(n_done, wn);
        // Non-oscillating remainder Σ_{m>N} c m^{-p} ≈ c (N+½)^{1-p}/(p-1).
        let c_smooth = smooth_n * n.powf(p);
        let correction = c_smooth * (n + 0.5).powf(1.0 - p) / (p - 1.0);
        let correction_err = correction.abs() * p * (p + 1.0) / (24.0 * n * n);
        let osc_bound = if oscillates {
            2.0 * wn.norm() / (0.5 * theta).sin().abs()
        } else {
            0.0
        };
        let error = osc_bound + correction_err;
        if error < tail_tol || n_done >= MAX_TERMS {
            if error >= tail_tol {
                warn!("lattice series stopped at {n_done} terms with tail bound {error:e} above {tail_tol:e}");
            }
            return Ok(Estimate {
                value: sum + correction,
                error,
            });
        }
        target = n_done * 2;
    }
}

/// φ_{LZ}(x) = Σ_{n≠0} (1 - e^{iθn})/Ψ(2πn/L).
pub fn phi_lattice(model: &LevyModel, spacing: f64, x: f64, tail_tol: f64) -> Result<Estimate> {
    check(spacing, tail_tol)?;
    let r = x.rem_euclid(spacing);
    if r == 0.0 || r == spacing {
        return Ok(Estimate::exact(0.0));
    }
    let theta = 2.0 * PI * r / spacing;
    let e = paired_series(model, spacing, 0.0, theta, tail_tol, |n, w| {
        let a = theta * n as f64;
        let half = (0.5 * a).sin();
        (2.0 * (2.0 * half * half * w.re + a.sin() * w.im), 2.0 * w.re)
    })?;
    Ok(Estimate {
        value: e.value,
        error: e.error,
    })
}

fn check(spacing: f64, tail_tol: f64) -> Result<()> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidInput(format!("lattice spacing must be positive, got {spacing}")));
    }
    if !(tail_tol > 0.0) {
        return Err(Error::InvalidInput(format!("tail tolerance must be positive, got {tail_tol}")));
    }
    Ok(())
}

/// (R_q(0), R_q(x)) with R_q(x) = Σ_n e^{iθn}/(q + Ψ(2πn/L)).
pub fn lattice_r_q(model: &LevyModel, spacing: f64, q: f64, x: f64) -> Result<(f64, f64)> {
    check(spacing, DEFAULT_TAIL_TOL)?;
    if !(q > 0.0) {
        return Err(Error::InvalidInput(format!("q must be positive, got {q}")));
    }
    let at = |x: f64| -> Result<f64> {
        let r = x.rem_euclid(spacing);
        let theta = 2.0 * PI * r / spacing;
        let tol = DEFAULT_TAIL_TOL * (1.0 / q).max(1.0);
        let s = paired_series(model, spacing, q, theta, tol, |n, w| {
            let a = theta * n as f64;
            (2.0 * (a.cos() * w.re - a.sin() * w.im), if r == 0.0 { 2.0 * w.re } else { 0.0 })
        })?;
        Ok(1.0 / q + s.value)
    };
    Ok((at(0.0)?, at(x)?))
}

/// H_q(x) = R_q(0) - R_q(x) as one series, free of the 1/q cancellation.
pub fn lattice_h_q(model: &LevyModel, spacing: f64, q: f64, x: f64, tail_tol: f64) -> Result<Estimate> {
    check(spacing, tail_tol)?;
    if !(q > 0.0) {
        return Err(Error::InvalidInput(format!("q must be positive, got {q}")));
    }
    let r = x.rem_euclid(spacing);
    if r == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let theta = 2.0 * PI * r / spacing;
    paired_series(model, spacing, q, theta, tail_tol, |n, w| {
        let a = theta * n as f64;
        let half = (0.5 * a).sin();
        (2.0 * (2.0 * half * half * w.re + a.sin() * w.im), 2.0 * w.re)
    })
}

/// φ_{LZ} tabulated on one period and interpolated by 4-point Lagrange
/// stencils kept inside [0, L].
#[derive(Debug, Clone)]
pub struct PeriodicTable {
    spacing: f64,
    values: Vec<f64>,
    max_error: f64,
}

impl PeriodicTable {
    pub fn build(model: &LevyModel, spacing: f64, intervals: usize, tail_tol: f64) -> Result<PeriodicTable> {
        if intervals < 4 {
            return Err(Error::InvalidInput("periodic table needs at least 4 intervals".into()));
        }
        let h = spacing / intervals as f64;
        let mut values = Vec::with_capacity(intervals + 1);
        let mut max_error: f64 = 0.0;
        for i in 0..=intervals {
            let e = phi_lattice(model, spacing, i as f64 * h, tail_tol)?;
            values.push(e.value);
            max_error = max_error.max(e.error);
        }
        Ok(PeriodicTable {
            spacing,
            values,
            max_error,
        })
    }

    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    pub fn eval(&self, x: f64) -> f64 {
        let m = self.values.len() - 1;
        let pos = x.rem_euclid(self.spacing) / self.spacing * m as f64;
        let i = (pos.floor() as usize).min(m - 1);
        let start = i.saturating_sub(1).min(m - 3);
        let mut acc = 0.0;
        for j in start..start + 4 {
            let mut basis = 1.0;
            for k in start..start + 4 {
                if k != j {
                    basis *= (pos - k as f64) / (j as f64 - k as f64);
                }
            }
            acc += basis * self.values[j];
        }
        acc
    }
}
