//! Lévy processes described by their characteristic exponent
//! `E[exp(iλX_t)] = exp(-tΨ(λ))`, admissibility checks and increment samplers.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// User-supplied characteristic exponent.
pub type ExponentFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// User-supplied sampler of `X_Δ - X_0` given `Δ`.
pub type IncrementSampler = Arc<dyn Fn(f64, &mut dyn RngCore) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ModelKind {
    BrownianMotion { sigma: f64 },
    SymmetricStable { alpha: f64 },
    AsymmetricStable { alpha: f64, beta: f64 },
    UserExponent { exponent: ExponentFn },
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::BrownianMotion { sigma } => write!(f, "BrownianMotion(sigma={sigma})"),
            ModelKind::SymmetricStable { alpha } => write!(f, "SymmetricStable(alpha={alpha})"),
            ModelKind::AsymmetricStable { alpha, beta } => {
                write!(f, "AsymmetricStable(alpha={alpha}, beta={beta})")
            }
            ModelKind::UserExponent { .. } => write!(f, "UserExponent"),
        }
    }
}

/// A recurrent one-dimensional Lévy process.
///
/// `m2` is the variance of `X_1`, `f64::INFINITY` when it does not exist.
#[derive(Clone)]
pub struct LevyModel {
    kind: ModelKind,
    m2: f64,
    sampler: Option<IncrementSampler>,
    label: String,
}

/// Probe grid used for the symmetry and zero checks: 0 and ±10^k for
/// k = -6, -5.8, ..., 5.8.
pub fn probe_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(121);
    grid.push(0.0);
    for i in 0..60 {
        let v = 10f64.powf(-6.0 + 0.2 * i as f64);
        grid.push(v);
        grid.push(-v);
    }
    grid
}

impl fmt::Debug for LevyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyModel")
            .field("kind", &self.kind)
            .field("m2", &self.m2)
            .field("sampler", &self.sampler.is_some())
            .field("label", &self.label)
            .finish()
    }
}

impl LevyModel {
    pub fn brownian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Model(format!("sigma must be positive, got {sigma}")));
        }
        Ok(LevyModel {
            kind: ModelKind::BrownianMotion { sigma },
            m2: sigma * sigma,
            sampler: None,
            label: format!("brownian(sigma={sigma})"),
        })
    }

    pub fn symmetric_stable(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(LevyModel {
            kind: ModelKind::SymmetricStable { alpha },
            m2: f64::INFINITY,
            sampler: None,
            label: format!("symmetric_stable(alpha={alpha})"),
        })
    }

    pub fn asymmetric_stable(alpha: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::Model(format!("beta must lie in [-1, 1], got {beta}")));
        }
        Ok(LevyModel {
            kind: ModelKind::AsymmetricStable { alpha, beta },
            m2: f64::INFINITY,
            sampler: None,
            label: format!("asymmetric_stable(alpha={alpha}, beta={beta})"),
        })
    }

    /// Wraps an arbitrary exponent. When `m2` is `None` the variance is
    /// estimated from the second central difference of Ψ at the origin.
    pub fn user(exponent: ExponentFn, m2: Option<f64>, sampler: Option<IncrementSampler>) -> Result<Self> {
        let m2 = match m2 {
            Some(v) if v > 0.0 => v,
            Some(v) => return Err(Error::Model(format!("variance must be positive, got {v}"))),
            None => estimate_variance(&exponent)?,
        };
        let model = LevyModel {
            kind: ModelKind::UserExponent { exponent },
            m2,
            sampler,
            label: "user".to_string(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Gaussian scale σ for Brownian models.
    pub fn brownian_sigma(&self) -> Option<f64> {
        match self.kind {
            ModelKind::BrownianMotion { sigma } => Some(sigma),
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self.kind {
            ModelKind::BrownianMotion { .. } | ModelKind::SymmetricStable { .. } => true,
            ModelKind::AsymmetricStable { beta, .. } => beta == 0.0,
            ModelKind::UserExponent { .. } => false,
        }
    }

    pub fn has_sampler(&self) -> bool {
        self.sampler.is_some() || !matches!(self.kind, ModelKind::UserExponent { .. })
    }

    /// Growth order p in |Ψ(λ)| ~ c λ^p at infinity.
    pub fn tail_exponent(&self) -> Result<f64> {
        match self.kind {
            ModelKind::BrownianMotion { .. } => Ok(2.0),
            ModelKind::SymmetricStable { alpha } | ModelKind::AsymmetricStable { alpha, .. } => Ok(alpha),
            ModelKind::UserExponent { .. } => Ok(fit_growth(|l| self.psi(l).norm(), 1e3, 1e4)?.0),
        }
    }

    /// Ψ(λ) without input validation, for the inner loops.
    #[inline]
    pub(crate) fn psi(&self, lambda: f64) -> Complex64 {
        match &self.kind {
            ModelKind::BrownianMotion { sigma } => Complex64::new(0.5 * sigma * sigma * lambda * lambda, 0.0),
            ModelKind::SymmetricStable { alpha } => Complex64::new(lambda.abs().powf(*alpha), 0.0),
            ModelKind::AsymmetricStable { alpha, beta } => {
                let r = lambda.abs().powf(*alpha);
                let skew = -beta * (0.5 * PI * alpha).tan() * lambda.signum();
                if lambda == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(r, r * skew)
                }
            }
            ModelKind::UserExponent { exponent } => exponent(lambda),
        }
    }

    /// Checks the structural properties of Ψ on the probe grid: Ψ(0) = 0,
    /// Hermitian symmetry, non-negative real part and Ψ(λ) ≠ 0 for λ ≠ 0.
    pub fn validate(&self) -> Result<()> {
        let zero = self.psi(0.0);
        if !(zero.norm() <= 1e-12) {
            return Err(Error::Model(format!("exponent at 0 is {zero}, expected 0")));
        }
        for &l in probe_grid().iter().filter(|l| **l > 0.0) {
            let p = self.psi(l);
            let m = self.psi(-l);
            if !(p.re.is_finite() && p.im.is_finite() && m.re.is_finite() && m.im.is_finite()) {
                return Err(Error::Model(format!("exponent is not finite at ±{l:e}")));
            }
            if (m - p.conj()).norm() > 1e-12 * (1.0 + p.norm()) {
                return Err(Error::Model(format!("exponent is not Hermitian at {l:e}")));
            }
            if p.re < -1e-12 * (1.0 + p.norm()) {
                return Err(Error::Model(format!("exponent has negative real part at {l:e}")));
            }
            if p.norm() == 0.0 {
                return Err(Error::Model(format!("exponent vanishes at {l:e}")));
            }
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::Model(format!("stable index must lie in (1, 2), got {alpha}")))
    }
}

/// Second central difference of Re Ψ at the origin. The variance is declared
/// infinite when the difference blows up or fails to settle between steps
/// 1e-3 and 1e-4.
fn estimate_variance(exponent: &ExponentFn) -> Result<f64> {
    let second = |h: f64| (exponent(h) + exponent(-h) - exponent(0.0) * 2.0).re / (h * h);
    let coarse = second(1e-3);
    let fine = second(1e-4);
    if !coarse.is_finite() || !fine.is_finite() {
        return Err(Error::Model("exponent is not finite near the origin".into()));
    }
    if fine > 1e8 || (fine - coarse).abs() > 1e-2 * fine.abs() {
        return Ok(f64::INFINITY);
    }
    if fine <= 0.0 {
        return Err(Error::Model(format!("non-positive curvature {fine:e} at the origin")));
    }
    Ok(fine)
}

/// Least-squares slope of log g against log λ over 21 log-spaced probes in
/// [lo, hi]. Returns (slope, intercept c with g ≈ c λ^slope).
pub(crate) fn fit_growth<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> Result<(f64, f64)> {
    const N: usize = 21;
    let mut xs = [0.0; N];
    let mut ys = [0.0; N];
    for i in 0..N {
        let l = lo * (hi / lo).powf(i as f64 / (N - 1) as f64);
        let v = g(l);
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::IndeterminateTail(format!("non-positive or non-finite value {v} at {l:e}")));
        }
        xs[i] = l.ln();
        ys[i] = v.ln();
    }
    let mx = xs.iter().sum::<f64>() / N as f64;
    let my = ys.iter().sum::<f64>() / N as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / N as f64;
    if resid.sqrt() > 0.05 {
        return Err(Error::IndeterminateTail(format!(
            "log-log fit residual {:.3} over [{lo:e}, {hi:e}]",
            resid.sqrt()
        )));
    }
    Ok((slope, intercept.exp()))
}

/// Tail orders at or below this value are treated as divergent.
pub const TAIL_ORDER_THRESHOLD: f64 = 1.02;

/// Outcome of the admissibility checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub condition_a: bool,
    pub condition_a_integral_estimate: f64,
    pub tail_order: f64,
    pub lattice_condition: Option<bool>,
    pub notes: String,
}

/// Ψ(λ) with the finiteness check applied to user exponents.
pub fn eval_exponent(model: &LevyModel, lambda: f64) -> Result<Complex64> {
    let v = model.psi(lambda);
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Model(format!("exponent is not finite at {lambda}: {v}")))
    }
}

const CONDITION_A_CUTOFF: f64 = 1e4;

/// Estimates ∫_0^∞ |1/(q+Ψ(λ))| dλ: adaptive quadrature up to a cutoff plus
/// a power-law tail whose order is fitted over the top decade.
pub fn check_condition_a(model: &LevyModel, q: f64) -> Result<AdmissibilityReport> {
    if !(q > 0.0) {
        return Err(Error::InvalidInput(format!("q must be positive, got {q}")));
    }
    let cutoff = CONDITION_A_CUTOFF;
    let g = |l: f64| 1.0 / (q + model.psi(l)).norm();
    let (order, _) = fit_growth(|l| model.psi(l).norm(), cutoff / 10.0, cutoff)?;
    let breaks: Vec<f64> = std::iter::once(0.0)
        .chain((0..=4).map(|k| 10f64.powi(k)))
        .collect();
    let head = quadrature::adaptive(
        &g,
        &breaks,
        Tolerance {
            abs: 1e-8,
            rel: 1e-8,
            max_panels: 4096,
        },
    )?;
    let pass = order > TAIL_ORDER_THRESHOLD;
    let (estimate, notes) = if pass {
        // g ~ C λ^{-order} beyond the cutoff
        let c = g(cutoff) * cutoff.powf(order);
        let tail = c * cutoff.powf(1.0 - order) / (order - 1.0);
        (head.value + tail, format!("tail order {order:.4} > {TAIL_ORDER_THRESHOLD}"))
    } else {
        (f64::INFINITY, format!("tail order {order:.4} <= {TAIL_ORDER_THRESHOLD}: integral diverges"))
    };
    Ok(AdmissibilityReport {
        condition_a: pass,
        condition_a_integral_estimate: estimate,
        tail_order: order,
        lattice_condition: None,
        notes,
    })
}

/// Convergence of Σ_n |1/(q+Ψ(2πn/L))|, judged by the decay order of the
/// terms over n ∈ [10^3, 10^4].
pub fn check_lattice_condition(model: &LevyModel, spacing: f64, q: f64) -> Result<bool> {
    if !(q > 0.0 && spacing > 0.0) {
        return Err(Error::InvalidInput(format!(
            "q and lattice spacing must be positive, got q={q}, L={spacing}"
        )));
    }
    let base = 2.0 * PI / spacing;
    let (slope, _) = fit_growth(|n| (q + model.psi(base * n)).norm(), 1e3, 1e4)?;
    Ok(slope > TAIL_ORDER_THRESHOLD)
}

/// One draw of `X_Δ - X_0`.
pub fn sample_increment<R: RngCore>(model: &LevyModel, dt: f64, rng: &mut R) -> Result<f64> {
    if let Some(sampler) = &model.sampler {
        return Ok(sampler(dt, rng));
    }
    Ok(match model.kind {
        ModelKind::BrownianMotion { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            sigma * dt.sqrt() * z
        }
        ModelKind::SymmetricStable { alpha } => dt.powf(1.0 / alpha) * stable_standard(alpha, 0.0, rng),
        ModelKind::AsymmetricStable { alpha, beta } => dt.powf(1.0 / alpha) * stable_standard(alpha, beta, rng),
        ModelKind::UserExponent { .. } => return Err(Error::NoSampler),
    })
}

/// Chambers–Mallows–Stuck draw with characteristic function
/// exp(-|λ|^α (1 - iβ tan(πα/2) sgn λ)), α ≠ 1.
pub fn stable_standard<R: RngCore + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    let t = beta * (0.5 * PI * alpha).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(0.5 / alpha);
    let shifted = alpha * (v + b);
    s * shifted.sin() / v.cos().powf(1.0 / alpha) * ((v - shifted).cos() / w).powf((1.0 - alpha) / alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cauchy() -> LevyModel {
        LevyModel::user(Arc::new(|l: f64| Complex64::new(l.abs(), 0.0)), Some(1.0), None).unwrap()
    }

    #[test]
    fn exponent_examples() {
        let bm = LevyModel::brownian(1.0).unwrap();
        assert_eq!(eval_exponent(&bm, 2.0).unwrap(), Complex64::new(2.0, 0.0));
        let st = LevyModel::symmetric_stable(1.5).unwrap();
        let v = eval_exponent(&st, -3.0).unwrap();
        assert!((v.re - 27f64.sqrt()).abs() < 1e-12 && v.im == 0.0);
        for m in [bm, st, LevyModel::asymmetric_stable(1.5, 0.4).unwrap()] {
            assert_eq!(eval_exponent(&m, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn user_exponent_rejects_non_finite_values() {
        let m = LevyModel {
            kind: ModelKind::UserExponent {
                exponent: Arc::new(|l: f64| if l > 5.0 { Complex64::new(f64::NAN, 0.0) } else { Complex64::new(l * l, 0.0) }),
            },
            m2: 2.0,
            sampler: None,
            label: "broken".into(),
        };
        assert!(matches!(eval_exponent(&m, 6.0), Err(Error::Model(_))));
        assert!(eval_exponent(&m, 1.0).is_ok());
    }

    #[test]
    fn built_in_models_pass_structural_checks() {
        for m in [
            LevyModel::brownian(0.7).unwrap(),
            LevyModel::symmetric_stable(1.2).unwrap(),
            LevyModel::asymmetric_stable(1.7, -0.6).unwrap(),
            cauchy(),
        ] {
            m.validate().unwrap();
        }
        assert_eq!(probe_grid().len(), 121);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(LevyModel::brownian(0.0).is_err());
        assert!(LevyModel::symmetric_stable(2.0).is_err());
        assert!(LevyModel::symmetric_stable(1.0).is_err());
        assert!(LevyModel::asymmetric_stable(1.5, 1.5).is_err());
        let bad = LevyModel::user(Arc::new(|l: f64| Complex64::new(-l * l, 0.0)), Some(1.0), None);
        assert!(bad.is_err());
    }

    #[test]
    fn variance_estimate_for_user_exponents() {
        let gaussian = LevyModel::user(Arc::new(|l: f64| Complex64::new(1.5 * l * l, 0.0)), None, None).unwrap();
        assert!((gaussian.m2() - 3.0).abs() < 1e-6);
        let stable = LevyModel::user(Arc::new(|l: f64| Complex64::new(l.abs().powf(1.5), 0.0)), None, None).unwrap();
        assert!(stable.m2().is_infinite());
        assert_eq!(LevyModel::brownian(2.0).unwrap().m2(), 4.0);
        assert!(LevyModel::symmetric_stable(1.9).unwrap().m2().is_infinite());
    }

    #[test]
    fn condition_a_verdicts() {
        let bm = check_condition_a(&LevyModel::brownian(1.0).unwrap(), 1.0).unwrap();
        assert!(bm.condition_a);
        // ∫_0^∞ dλ/(1+λ²/2) = π/√2
        assert!((bm.condition_a_integral_estimate - PI / 2f64.sqrt()).abs() < 1e-6);
        let st = check_condition_a(&LevyModel::symmetric_stable(1.5).unwrap(), 1.0).unwrap();
        assert!(st.condition_a);
        assert!((st.tail_order - 1.5).abs() < 1e-9);
        let c = check_condition_a(&cauchy(), 1.0).unwrap();
        assert!(!c.condition_a);
        assert!(c.condition_a_integral_estimate.is_infinite());
        assert!(check_condition_a(&cauchy(), 0.0).is_err());
    }

    #[test]
    fn indeterminate_tail_is_reported() {
        // |Ψ| oscillates between two growth orders: no stable log-log slope.
        let wild = LevyModel::user(
            Arc::new(|l: f64| {
                let r = if l == 0.0 { 0.0 } else { l * l * (2.0 + (3.0 * l.abs().ln()).sin()).powi(4) };
                Complex64::new(r, 0.0)
            }),
            Some(1.0),
            None,
        )
        .unwrap();
        assert!(matches!(check_condition_a(&wild, 1.0), Err(Error::IndeterminateTail(_))));
    }

    #[test]
    fn lattice_condition_verdicts() {
        assert!(check_lattice_condition(&LevyModel::brownian(1.0).unwrap(), 1.0, 0.1).unwrap());
        assert!(check_lattice_condition(&LevyModel::symmetric_stable(1.5).unwrap(), 2.0, 1.0).unwrap());
        assert!(!check_lattice_condition(&cauchy(), 1.0, 1.0).unwrap());
    }

    #[test]
    fn brownian_increments_have_the_right_moments() {
        let bm = LevyModel::brownian(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_increment(&bm, 1.0, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.004, "mean {mean}");
        let draws: Vec<f64> = (0..n).map(|_| sample_increment(&bm, 0.25, &mut rng).unwrap()).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.01, "variance {var}");
    }

    /// Empirical characteristic function at λ against exp(-Ψ(λ)), within 3
    /// Monte Carlo standard errors on each component.
    fn check_cf(model: &LevyModel, lambda: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 400_000;
        let (mut re, mut im, mut re2, mut im2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = sample_increment(model, 1.0, &mut rng).unwrap();
            let (s, c) = (lambda * x).sin_cos();
            re += c;
            im += s;
            re2 += c * c;
            im2 += s * s;
        }
        let nf = n as f64;
        let (re, im) = (re / nf, im / nf);
        let se_re = ((re2 / nf - re * re) / nf).sqrt();
        let se_im = ((im2 / nf - im * im) / nf).sqrt();
        let target = (-model.psi(lambda)).exp();
        assert!((re - target.re).abs() < 3.0 * se_re, "re {re} vs {}", target.re);
        assert!((im - target.im).abs() < 3.0 * se_im + 1e-12, "im {im} vs {}", target.im);
    }

    #[test]
    fn stable_sampler_matches_characteristic_function() {
        let st = LevyModel::symmetric_stable(1.5).unwrap();
        check_cf(&st, 1.0, 11);
        check_cf(&LevyModel::asymmetric_stable(1.5, 0.7).unwrap(), 1.0, 12);
        check_cf(&LevyModel::asymmetric_stable(1.3, -1.0).unwrap(), 0.6, 13);
    }

    #[test]
    fn user_models_without_sampler_cannot_simulate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_increment(&cauchy(), 1.0, &mut rng), Err(Error::NoSampler));
    }
}
