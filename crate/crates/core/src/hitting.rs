//! Hitting distributions of finite point sets.
//!
//! For A = {a_1, ..., a_n} the q = 0 system in the unknowns (P_1..P_n, φ) is
//!
//! ```text
//! Σ_k P_k h(a_k - a_j) + φ = h(x - a_j),   j = 1..n
//! Σ_k P_k                  = 1
//! ```
//!
//! with P_k = P_x(T_{a_k} = T_A) and φ = φ_A(x). At q > 0 the same layout
//! with h_q in place of h and a corner entry 1/r_q(0) yields
//! Φ_k = P_x[e^{-qT_A}; X_{T_A} = a_k] and ψ = r_q(0) P_x(T_A > e_q).

use std::sync::Arc;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::resolvent::{self, Estimate, HKernel, HqKernel, Kernel, QuadratureConfig, RqKernel};

/// Minimal separation between points.
pub const MIN_SEPARATION: f64 = 1e-9;
/// Largest accepted condition number.
pub const MAX_CONDITION: f64 = 1e12;
/// Negative probabilities above this are rounding noise.
pub const CLAMP_BAND: f64 = 1e-6;

/// A finite, sorted set of distinct reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PointSet {
    points: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PointSet {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        PointSet::new(v)
    }
}

impl From<PointSet> for Vec<f64> {
    fn from(s: PointSet) -> Vec<f64> {
        s.points
    }
}

impl PointSet {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("point set is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("point set contains non-finite values".into()));
        }
        points.sort_by(f64::total_cmp);
        for w in points.windows(2) {
            if w[1] - w[0] < MIN_SEPARATION {
                return Err(Error::InvalidInput(format!(
                    "points {} and {} are closer than {MIN_SEPARATION:e}",
                    w[0], w[1]
                )));
            }
        }
        Ok(PointSet { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.points.iter().position(|&p| p == x)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.index_of(x).is_some()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// The set with extra points added.
    pub fn union(&self, extra: &[f64]) -> Result<PointSet> {
        let mut v = self.points.clone();
        v.extend_from_slice(extra);
        PointSet::new(v)
    }

    /// The set translated by `shift`.
    pub fn shifted(&self, shift: f64) -> Result<PointSet> {
        PointSet::new(self.points.iter().map(|p| p + shift).collect())
    }

    /// Neighbouring points (below, above) of x; `None` on unbounded sides.
    pub fn gap(&self, x: f64) -> (Option<f64>, Option<f64>) {
        let i = self.points.partition_point(|&p| p <= x);
        let lo = if i > 0 { Some(self.points[i - 1]) } else { None };
        let hi = self.points.get(i).copied();
        (lo, hi)
    }
}

/// Hitting distribution of A from x in the q → 0 limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSolution {
    pub x: f64,
    pub set: PointSet,
    pub probs: Vec<f64>,
    pub phi0: f64,
    pub condition_number: f64,
}

/// The factorized (n+1)×(n+1) system for a point set and translation
/// kernel. Solutions are linear in the right-hand side, so the inverse is
/// kept and reused for every starting point.
#[derive(Clone)]
pub struct PointSystem {
    set: PointSet,
    kernel: Arc<dyn Kernel>,
    inverse: DMatrix<f64>,
    condition_number: f64,
    matrix_error: f64,
}

impl std::fmt::Debug for PointSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointSystem")
            .field("set", &self.set)
            .field("condition_number", &self.condition_number)
            .finish()
    }
}

/// 2-norm condition number from the singular values.
fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a well-conditioned matrix through full-pivot LU.
fn checked_inverse(m: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let cond = condition(&m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition: cond });
    }
    let inv = m
        .full_piv_lu()
        .try_inverse()
        .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    Ok((inv, cond))
}

impl PointSystem {
    /// Assembles [[K, 1], [1ᵀ, corner]] with K_jk = kernel(a_k - a_j).
    pub fn new(set: PointSet, kernel: Arc<dyn Kernel>, corner: f64) -> Result<PointSystem> {
        let n = set.len();
        let a = set.points();
        let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut matrix_error: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    let e = kernel.eval(a[k] - a[j])?;
                    m[(j, k)] = e.value;
                    matrix_error = matrix_error.max(e.error);
                }
            }
            m[(j, n)] = 1.0;
            m[(n, j)] = 1.0;
        }
        m[(n, n)] = corner;
        let (inverse, condition_number) = checked_inverse(m)?;
        Ok(PointSystem {
            set,
            kernel,
            inverse,
            condition_number,
            matrix_error,
        })
    }

    /// The q = 0 system built on h.
    pub fn limit(model: &LevyModel, set: PointSet, cfg: &QuadratureConfig) -> Result<PointSystem> {
        let kernel = Arc::new(HKernel {
            model: model.clone(),
            cfg: *cfg,
        });
        PointSystem::new(set, kernel, 0.0)
    }

    /// The q > 0 system built on h_q.
    pub fn exponential(model: &LevyModel, q: f64, set: PointSet, cfg: &QuadratureConfig) -> Result<PointSystem> {
        let r0 = resolvent::resolvent_density(model, q, 0.0, cfg)?.value;
        let kernel = Arc::new(HqKernel {
            model: model.clone(),
            q,
            cfg: *cfg,
        });
        PointSystem::new(set, kernel, 1.0 / r0)
    }

    pub fn set(&self) -> &PointSet {
        &self.set
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    pub fn kernel(&self) -> &Arc<dyn Kernel> {
        &self.kernel
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Right-hand side [k(x - a_j); 1] and its largest error.
    pub fn rhs(&self, x: f64) -> Result<(DVector<f64>, f64)> {
        let n = self.set.len();
        let mut b = DVector::<f64>::zeros(n + 1);
        let mut err: f64 = 0.0;
        for (j, &a) in self.set.points().iter().enumerate() {
            let e = self.kernel.eval(x - a)?;
            b[j] = e.value;
            err = err.max(e.error);
        }
        b[n] = 1.0;
        Ok((b, err))
    }

    /// Raw solution (weights, last unknown) with a propagated error bound.
    pub fn solve_raw(&self, x: f64) -> Result<(Vec<f64>, Estimate)> {
        let n = self.set.len();
        let (b, err) = self.rhs(x)?;
        let sol = &self.inverse * b;
        let norm = self.inverse.iter().map(|v| v.abs()).fold(0.0, f64::max) * (n + 1) as f64;
        let weights: Vec<f64> = sol.iter().take(n).cloned().collect();
        let error = norm * (err + self.matrix_error * weights.iter().map(|p| p.abs()).sum::<f64>());
        Ok((weights, Estimate { value: sol[n], error }))
    }

    /// Vector c with φ^{(γ)}(x) = Σ_j c_j k(x - a_j) + c_n + t·x, where
    /// t is the tilt γ/m².
    pub fn phi_coefficients(&self, tilt: f64) -> Vec<f64> {
        let n = self.set.len();
        let a = self.set.points();
        (0..=n)
            .map(|j| {
                let mean_point: f64 = (0..n).map(|k| a[k] * self.inverse[(k, j)]).sum();
                self.inverse[(n, j)] - tilt * mean_point
            })
            .collect()
    }
}

/// Clamps rounding-level negative probabilities to 0 and renormalizes.
pub(crate) fn clamp_probabilities(probs: &mut [f64]) -> Result<()> {
    for (i, p) in probs.iter_mut().enumerate() {
        if *p < -CLAMP_BAND {
            return Err(Error::NegativeProbability { index: i, value: *p });
        }
        if *p < 0.0 {
            if *p < -1e-10 {
                warn!("clamping hitting probability {p:e} at index {i} to 0");
            } else {
                debug!("clamping hitting probability {p:e} at index {i} to 0");
            }
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    Ok(())
}

/// P_x[e^{-qT_a}] = r_q(a - x)/r_q(0).
pub fn one_point_laplace(model: &LevyModel, q: f64, x: f64, a: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let r0 = resolvent::resolvent_density(model, q, 0.0, cfg)?.value;
    if x == a {
        return Ok(1.0);
    }
    let r = resolvent::resolvent_density(model, q, a - x, cfg)?.value;
    Ok((r / r0).clamp(0.0, 1.0))
}

/// Φ_k = P_x[e^{-qT_A}; X_{T_A} = a_k] from M Φ = b with
/// M_jk = r_q(a_j - a_k), b_j = r_q(a_j - x).
pub fn finite_set_laplace(model: &LevyModel, q: f64, x: f64, set: &PointSet, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    direct_system(model, q, set, cfg)?.solve(x)
}

/// The factorized matrix M_jk = r_q(a_j - a_k).
struct DirectSystem {
    points: Vec<f64>,
    kernel: RqKernel,
    inverse: DMatrix<f64>,
}

fn direct_system(model: &LevyModel, q: f64, set: &PointSet, cfg: &QuadratureConfig) -> Result<DirectSystem> {
    if !(q > 0.0) {
        return Err(Error::InvalidInput(format!("q must be positive, got {q}")));
    }
    let kernel = RqKernel {
        model: model.clone(),
        q,
        cfg: *cfg,
    };
    let a = set.points();
    let n = a.len();
    let r0 = kernel.eval(0.0)?.value;
    let mut m = DMatrix::<f64>::from_element(n, n, r0);
    for j in 0..n {
        for k in 0..n {
            if j != k {
                m[(j, k)] = kernel.eval(a[j] - a[k])?.value;
            }
        }
    }
    let (inverse, _) = checked_inverse(m)?;
    Ok(DirectSystem {
        points: a.to_vec(),
        kernel,
        inverse,
    })
}

impl DirectSystem {
    fn solve(&self, x: f64) -> Result<Vec<f64>> {
        let n = self.points.len();
        if let Some(i) = self.points.iter().position(|&a| a == x) {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            return Ok(e);
        }
        let mut b = DVector::<f64>::zeros(n);
        for (j, &a) in self.points.iter().enumerate() {
            b[j] = self.kernel.eval(a - x)?.value;
        }
        Ok((&self.inverse * b).iter().cloned().collect())
    }
}

/// r_q(0) P_x(T_A > e_q) = r_q(0)(1 - Σ_k Φ_k), evaluated without the
/// cancellation in 1 - ΣΦ.
pub fn normalized_survival(model: &LevyModel, q: f64, x: f64, set: &PointSet, cfg: &QuadratureConfig) -> Result<Estimate> {
    if set.contains(x) {
        return Ok(Estimate::exact(0.0));
    }
    let sys = PointSystem::exponential(model, q, set.clone(), cfg)?;
    let (_, psi) = sys.solve_raw(x)?;
    Ok(psi)
}

/// Solves the q → 0 system for the hitting distribution and φ_A^{(0)}(x).
pub fn finite_set_hitting_limit(model: &LevyModel, x: f64, set: &PointSet, cfg: &QuadratureConfig) -> Result<HittingSolution> {
    let sys = PointSystem::limit(model, set.clone(), cfg)?;
    solve_limit(&sys, x)
}

/// φ values within this distance below 0 are treated as exact zeros.
const PHI_FLOOR: f64 = 1e-8;

pub(crate) fn solve_limit(sys: &PointSystem, x: f64) -> Result<HittingSolution> {
    let set = sys.set().clone();
    let n = set.len();
    if let Some(i) = set.index_of(x) {
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        return Ok(HittingSolution {
            x,
            set,
            probs,
            phi0: 0.0,
            condition_number: sys.condition_number(),
        });
    }
    let (mut probs, phi) = sys.solve_raw(x)?;
    clamp_probabilities(&mut probs)?;
    let phi0 = if phi.value < 0.0 && phi.value >= -PHI_FLOOR { 0.0 } else { phi.value };
    Ok(HittingSolution {
        x,
        set,
        probs,
        phi0,
        condition_number: sys.condition_number(),
    })
}

/// r_q^A(x, y) = r_q(y - x) - Σ_k Φ_k(x) r_q(y - a_k).
pub fn killed_resolvent(model: &LevyModel, q: f64, x: f64, y: f64, set: &PointSet, cfg: &QuadratureConfig) -> Result<f64> {
    let sys = direct_system(model, q, set, cfg)?;
    let phi = sys.solve(x)?;
    let mut v = sys.kernel.eval(y - x)?.value;
    for (p, &a) in phi.iter().zip(set.points()) {
        v -= p * sys.kernel.eval(y - a)?.value;
    }
    Ok(v)
}

/// lim_{q→0} r_q^A(0, 0) = φ_A(0) + Σ_k P_k(0) h(a_k).
pub fn green_at_origin(model: &LevyModel, set: &PointSet, cfg: &QuadratureConfig) -> Result<f64> {
    if set.contains(0.0) {
        return Ok(0.0);
    }
    let sys = PointSystem::limit(model, set.clone(), cfg)?;
    let sol = solve_limit(&sys, 0.0)?;
    let mut g = sol.phi0;
    for (p, &a) in sol.probs.iter().zip(set.points()) {
        g += p * resolvent::h(model, a, cfg)?.value;
    }
    Ok(g)
}

/// h^B(c) = h(c) + h(-c).
pub fn h_b(model: &LevyModel, c: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(resolvent::h(model, c, cfg)?.value + resolvent::h(model, -c, cfg)?.value)
}

/// h^C(c, -d): the Green function at the origin for the set {c, -d}.
pub fn h_c(model: &LevyModel, c: f64, d: f64, cfg: &QuadratureConfig) -> Result<f64> {
    green_at_origin(model, &PointSet::new(vec![c, -d])?, cfg)
}

/// h^B(c) without `d`, h^C(c, -d) with it.
pub fn green_normalizers(model: &LevyModel, c: f64, d: Option<f64>, cfg: &QuadratureConfig) -> Result<f64> {
    if c == 0.0 {
        return Err(Error::InvalidInput("c must be nonzero".into()));
    }
    match d {
        None => h_b(model, c, cfg),
        Some(d) if d == 0.0 => Err(Error::InvalidInput("d must be nonzero".into())),
        Some(d) => h_c(model, c, d, cfg),
    }
}
