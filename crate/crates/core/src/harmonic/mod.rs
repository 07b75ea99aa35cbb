//! Harmonic functions φ for avoiding finite point sets, bounded unions of
//! intervals and lattices.

pub mod lattice;
pub mod oracle;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hitting::{finite_set_hitting_limit, PointSet, PointSystem};
use crate::levy_model::{check_lattice_condition, LevyModel};
use crate::paths::{path_rng, Absorbing, MCConfig, Step, Stepper};
use crate::resolvent::{self, check_gamma, tilt, Estimate, HKernel, HTable, Kernel, QuadratureConfig};

pub use lattice::{lattice_h_q, lattice_r_q, phi_lattice, PeriodicTable, DEFAULT_TAIL_TOL};
pub use oracle::{closed_form_oracle, OracleFamily};

/// A finite union of disjoint closed bounded intervals, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for IntervalUnion {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        IntervalUnion::new(v)
    }
}

impl From<IntervalUnion> for Vec<(f64, f64)> {
    fn from(s: IntervalUnion) -> Self {
        s.intervals
    }
}

impl IntervalUnion {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidInput("interval union is empty".into()));
        }
        for &(l, u) in &intervals {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::InvalidInput(format!("[{l}, {u}] is not a bounded interval")));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in intervals.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(Error::InvalidInput(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(IntervalUnion { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn min(&self) -> f64 {
        self.intervals[0].0
    }

    pub fn max(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].1
    }

    pub fn shifted(&self, s: f64) -> IntervalUnion {
        IntervalUnion {
            intervals: self.intervals.iter().map(|&(l, u)| (l + s, u + s)).collect(),
        }
    }

    /// Distance from x to the set.
    pub fn distance(&self, x: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(l, u)| if x < l { l - x } else if x > u { x - u } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }
}

impl Absorbing for IntervalUnion {
    fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(l, u)| l <= x && x <= u)
    }

    fn gap(&self, x: f64) -> (Option<f64>, Option<f64>) {
        let i = self.intervals.partition_point(|&(l, _)| l <= x);
        let lo = if i > 0 { Some(self.intervals[i - 1].1) } else { None };
        let hi = self.intervals.get(i).map(|iv| iv.0);
        (lo, hi)
    }
}

impl Absorbing for PointSet {
    fn contains(&self, x: f64) -> bool {
        PointSet::contains(self, x)
    }

    fn gap(&self, x: f64) -> (Option<f64>, Option<f64>) {
        PointSet::gap(self, x)
    }
}

/// The set to avoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvoidSet {
    Points(PointSet),
    IntervalUnion(IntervalUnion),
    Lattice { spacing: f64 },
}

impl AvoidSet {
    pub fn lattice(spacing: f64) -> Result<AvoidSet> {
        if spacing > 0.0 && spacing.is_finite() {
            Ok(AvoidSet::Lattice { spacing })
        } else {
            Err(Error::InvalidInput(format!("lattice spacing must be positive, got {spacing}")))
        }
    }
}

impl Absorbing for AvoidSet {
    fn contains(&self, x: f64) -> bool {
        match self {
            AvoidSet::Points(p) => PointSet::contains(p, x),
            AvoidSet::IntervalUnion(iv) => iv.contains(x),
            AvoidSet::Lattice { spacing } => x.rem_euclid(*spacing) == 0.0,
        }
    }

    fn gap(&self, x: f64) -> (Option<f64>, Option<f64>) {
        match self {
            AvoidSet::Points(p) => PointSet::gap(p, x),
            AvoidSet::IntervalUnion(iv) => iv.gap(x),
            AvoidSet::Lattice { spacing } => {
                let k = (x / spacing).floor();
                (Some(k * spacing), Some((k + 1.0) * spacing))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicKind {
    TwoPoint,
    NPoint,
    BoundedSet,
    Lattice,
}

impl fmt::Display for HarmonicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HarmonicKind::TwoPoint => "two_point",
            HarmonicKind::NPoint => "n_point",
            HarmonicKind::BoundedSet => "bounded_set",
            HarmonicKind::Lattice => "lattice",
        };
        f.write_str(s)
    }
}

#[derive(Clone)]
enum Evaluator {
    Points {
        points: Vec<f64>,
        coeffs: Vec<f64>,
        tilt: f64,
        kernel: Arc<dyn Kernel>,
    },
    Lattice {
        spacing: f64,
        tail_tol: f64,
        table: Option<Arc<PeriodicTable>>,
    },
    Bounded {
        intervals: IntervalUnion,
        mc: MCConfig,
        cfg: QuadratureConfig,
    },
}

/// An evaluated φ-family.
#[derive(Clone)]
pub struct HarmonicFn {
    set: AvoidSet,
    gamma: f64,
    kind: HarmonicKind,
    model: LevyModel,
    cfg: QuadratureConfig,
    evaluator: Evaluator,
}

impl fmt::Debug for HarmonicFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HarmonicFn")
            .field("set", &self.set)
            .field("gamma", &self.gamma)
            .field("kind", &self.kind)
            .field("model", &self.model.label())
            .finish()
    }
}

impl HarmonicFn {
    /// φ^{(γ)}_A for a finite set A (n = 1 gives h^{(γ)}(· - a)).
    pub fn points(model: &LevyModel, set: PointSet, gamma: f64, cfg: &QuadratureConfig) -> Result<HarmonicFn> {
        check_gamma(gamma)?;
        let kernel: Arc<dyn Kernel> = Arc::new(HKernel {
            model: model.clone(),
            cfg: *cfg,
        });
        Self::points_with_kernel(model, set, gamma, cfg, kernel)
    }

    fn points_with_kernel(
        model: &LevyModel,
        set: PointSet,
        gamma: f64,
        cfg: &QuadratureConfig,
        kernel: Arc<dyn Kernel>,
    ) -> Result<HarmonicFn> {
        let t = tilt(model, gamma);
        let system = PointSystem::new(set.clone(), kernel.clone(), 0.0)?;
        let kind = if set.len() == 2 { HarmonicKind::TwoPoint } else { HarmonicKind::NPoint };
        Ok(HarmonicFn {
            evaluator: Evaluator::Points {
                points: set.points().to_vec(),
                coeffs: system.phi_coefficients(t),
                tilt: t,
                kernel,
            },
            set: AvoidSet::Points(set),
            gamma,
            kind,
            model: model.clone(),
            cfg: *cfg,
        })
    }

    /// φ_{LZ} for the lattice LZ.
    pub fn lattice(model: &LevyModel, spacing: f64, tail_tol: f64) -> Result<HarmonicFn> {
        let set = AvoidSet::lattice(spacing)?;
        if !check_lattice_condition(model, spacing, 1.0)? {
            return Err(Error::TailNotConvergent {
                exponent: model.tail_exponent().unwrap_or(f64::NAN),
            });
        }
        Ok(HarmonicFn {
            set,
            gamma: 0.0,
            kind: HarmonicKind::Lattice,
            model: model.clone(),
            cfg: QuadratureConfig::default(),
            evaluator: Evaluator::Lattice {
                spacing,
                tail_tol,
                table: None,
            },
        })
    }

    /// φ_A for a bounded interval union, evaluated by Monte Carlo.
    pub fn bounded(model: &LevyModel, intervals: IntervalUnion, mc: MCConfig, cfg: &QuadratureConfig) -> Result<HarmonicFn> {
        mc.validate()?;
        if !model.has_sampler() {
            return Err(Error::NoSampler);
        }
        Ok(HarmonicFn {
            set: AvoidSet::IntervalUnion(intervals.clone()),
            gamma: 0.0,
            kind: HarmonicKind::BoundedSet,
            model: model.clone(),
            cfg: *cfg,
            evaluator: Evaluator::Bounded { intervals, mc, cfg: *cfg },
        })
    }

    pub fn set(&self) -> &AvoidSet {
        &self.set
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> HarmonicKind {
        self.kind
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// φ(x) with its error estimate (a standard error for Monte Carlo).
    pub fn eval(&self, x: f64) -> Result<Estimate> {
        if self.set.contains(x) {
            return Ok(Estimate::exact(0.0));
        }
        match &self.evaluator {
            Evaluator::Points {
                points,
                coeffs,
                tilt,
                kernel,
            } => {
                let n = points.len();
                let mut value = coeffs[n] + tilt * x;
                let mut error = 0.0;
                for (j, &a) in points.iter().enumerate() {
                    let k = kernel.eval(x - a)?;
                    value += coeffs[j] * k.value;
                    error += coeffs[j].abs() * k.error;
                }
                Ok(Estimate { value, error })
            }
            Evaluator::Lattice { spacing, tail_tol, table } => match table {
                Some(t) => Ok(Estimate {
                    value: t.eval(x),
                    error: t.max_error(),
                }),
                None => phi_lattice(&self.model, *spacing, x, *tail_tol),
            },
            Evaluator::Bounded { intervals, mc, cfg } => phi_bounded_set(&self.model, intervals, x, mc, cfg),
        }
    }

    /// φ(x) clipped at 0; the value used in path weights.
    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x)?.value.max(0.0))
    }

    /// A copy evaluated from tables of h (points) or of one period
    /// (lattice). Arguments with |x - a| beyond `half_width` fall back to
    /// quadrature.
    pub fn accelerated(&self, half_width: f64) -> Result<HarmonicFn> {
        match &self.evaluator {
            Evaluator::Points { .. } => {
                let AvoidSet::Points(set) = &self.set else { unreachable!() };
                let step = 0.01f64.min(half_width / 64.0);
                let table = HTable::build(&self.model, half_width, step, &self.cfg)?;
                Self::points_with_kernel(&self.model, set.clone(), self.gamma, &self.cfg, Arc::new(table))
            }
            Evaluator::Lattice { spacing, tail_tol, .. } => {
                let table = PeriodicTable::build(&self.model, *spacing, 256, tail_tol.max(1e-9))?;
                let mut out = self.clone();
                out.evaluator = Evaluator::Lattice {
                    spacing: *spacing,
                    tail_tol: *tail_tol,
                    table: Some(Arc::new(table)),
                };
                Ok(out)
            }
            Evaluator::Bounded { .. } => Err(Error::InvalidInput(
                "bounded-set harmonic functions are Monte Carlo estimates and cannot be tabulated".into(),
            )),
        }
    }
}

/// φ^{(γ)}_{a,b}(x) = h^{(γ)}(x - a) - P_x(T_b < T_a) h^{(γ)}(b - a).
pub fn phi_two_points(model: &LevyModel, gamma: f64, a: f64, b: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(phi_two_points_both(model, gamma, a, b, x, cfg)?.0)
}

/// Both representations of the two-point function: anchored at a and at b.
pub fn phi_two_points_both(model: &LevyModel, gamma: f64, a: f64, b: f64, x: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    if a == b {
        return Err(Error::InvalidInput("two-point set needs a != b".into()));
    }
    let set = PointSet::new(vec![a, b])?;
    if set.contains(x) {
        return Ok((0.0, 0.0));
    }
    let sol = finite_set_hitting_limit(model, x, &set, cfg)?;
    let (ia, ib) = if a < b { (0, 1) } else { (1, 0) };
    let hg = |y: f64| resolvent::h_gamma(model, gamma, y, cfg).map(|e| e.value);
    let first = hg(x - a)? - sol.probs[ib] * hg(b - a)?;
    let second = hg(x - b)? - sol.probs[ia] * hg(a - b)?;
    Ok((first, second))
}

/// φ^{(γ)}_A(x) = h^{(γ)}(x - a_j) - Σ_k P_k h^{(γ)}(a_k - a_j) anchored at a_j.
pub fn phi_via_anchor(model: &LevyModel, gamma: f64, set: &PointSet, x: f64, anchor: usize, cfg: &QuadratureConfig) -> Result<f64> {
    check_gamma(gamma)?;
    if anchor >= set.len() {
        return Err(Error::InvalidInput(format!("anchor index {anchor} out of range")));
    }
    if set.contains(x) {
        return Ok(0.0);
    }
    let sol = finite_set_hitting_limit(model, x, set, cfg)?;
    let aj = set.points()[anchor];
    let hg = |y: f64| resolvent::h_gamma(model, gamma, y, cfg).map(|e| e.value);
    let mut v = hg(x - aj)?;
    for (p, &ak) in sol.probs.iter().zip(set.points()) {
        if ak != aj {
            v -= p * hg(ak - aj)?;
        }
    }
    Ok(v)
}

/// φ^{(γ)}_A(x) anchored at the largest point.
pub fn phi_n_points(model: &LevyModel, gamma: f64, set: &PointSet, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    phi_via_anchor(model, gamma, set, x, set.len() - 1, cfg)
}

/// Fraction of paths allowed to survive the horizon.
pub const NON_ABSORBED_LIMIT: f64 = 1e-3;
/// Survival probability the automatic horizon is sized for.
const HORIZON_SURVIVAL: f64 = 1e-4;

/// Horizon at which P_x(T_A > T) is about `HORIZON_SURVIVAL`, from the
/// first-passage tail of a stable-like process at distance d.
fn absorption_horizon(model: &LevyModel, d: f64, floor: f64) -> f64 {
    let t = match model.brownian_sigma() {
        // P(T > t) ≈ d √(2/(π σ² t))
        Some(s) => 2.0 * d * d / (std::f64::consts::PI * s * s * HORIZON_SURVIVAL * HORIZON_SURVIVAL),
        None => {
            let alpha = model.tail_exponent().unwrap_or(1.5).clamp(1.05, 2.0);
            d.max(1e-3).powf(alpha) * HORIZON_SURVIVAL.powf(-alpha / (alpha - 1.0))
        }
    };
    t.max(floor)
}

/// Monte Carlo estimate of φ_A(x) = h(x) - E_x[h(X_{T_A})] in coordinates
/// where the leftmost endpoint of A is 0. Returns (value, standard error);
/// the error includes the quadrature error of h.
pub fn phi_bounded_set(model: &LevyModel, set: &IntervalUnion, x: f64, mc: &MCConfig, cfg: &QuadratureConfig) -> Result<Estimate> {
    mc.validate()?;
    if set.contains(x) {
        return Ok(Estimate::exact(0.0));
    }
    let shift = -set.min();
    let anchored = set.shifted(shift);
    let xs = x + shift;
    let stepper = Stepper::new(model, &anchored)?;
    let horizon = absorption_horizon(model, anchored.distance(xs), mc.t_max);
    let ends: Vec<Result<Step>> = (0..mc.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(mc.root_seed, i);
            stepper.run_adaptive(xs, horizon, mc.dt, &mut rng)
        })
        .collect();
    let mut hits = Vec::with_capacity(ends.len());
    for e in ends {
        if let Step::Absorbed(y) = e? {
            hits.push(y);
        }
    }
    let survivors = mc.n_paths - hits.len();
    if survivors as f64 > NON_ABSORBED_LIMIT * mc.n_paths as f64 {
        return Err(Error::NonAbsorbed {
            count: survivors,
            total: mc.n_paths,
            horizon,
        });
    }
    if survivors > 0 {
        log::warn!("{survivors} of {} paths survived the horizon {horizon:e} and were dropped", mc.n_paths);
    }
    // Brownian paths are absorbed at interval endpoints, so few distinct
    // values of h are needed.
    let mut cache: HashMap<u64, Estimate> = HashMap::new();
    let mut distinct: Vec<f64> = hits.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let evals: Vec<Estimate> = distinct
        .par_iter()
        .map(|&y| resolvent::h(model, y, cfg))
        .collect::<Result<Vec<_>>>()?;
    for (y, e) in distinct.iter().zip(evals) {
        cache.insert(y.to_bits(), e);
    }
    let n = hits.len() as f64;
    let (mut sum, mut sum2, mut qerr) = (0.0, 0.0, 0.0);
    for y in &hits {
        let e = cache[&y.to_bits()];
        sum += e.value;
        sum2 += e.value * e.value;
        qerr += e.error;
    }
    let mean = sum / n;
    let var = if hits.len() > 1 { ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let hx = resolvent::h(model, xs, cfg)?;
    Ok(Estimate {
        value: hx.value - mean,
        error: (var / n).sqrt() + hx.error + qerr / n,
    })
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

    #[test]
    fn geometry() {
        let iv = IntervalUnion::new(vec![(2.0, 3.0), (0.0, 1.0)]).unwrap();
        assert_eq!(iv.intervals(), &[(0.0, 1.0), (2.0, 3.0)]);
        assert!(iv.contains(0.5) && iv.contains(3.0) && !iv.contains(1.5));
        assert_eq!(iv.gap(1.5), (Some(1.0), Some(2.0)));
        assert_eq!(iv.gap(-4.0), (None, Some(0.0)));
        assert_eq!(iv.distance(5.0), 2.0);
        assert!(IntervalUnion::new(vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(IntervalUnion::new(vec![(1.0, 0.0)]).is_err());
        let lat = AvoidSet::lattice(0.5).unwrap();
        assert!(lat.contains(-1.5) && !lat.contains(0.2));
        assert_eq!(lat.gap(0.7), (Some(0.5), Some(1.0)));
        assert!(AvoidSet::lattice(0.0).is_err());
    }

    #[test]
    fn two_point_examples() {
        let v = |g, x| phi_two_points(&bm(), g, 0.0, 1.0, x, &cfg()).unwrap();
        assert!((v(0.0, 2.0) - 1.0).abs() < 1e-9);
        assert!(v(0.0, 0.5).abs() < 1e-9);
        assert!((v(0.5, -1.0) - 0.5).abs() < 1e-9);
        let (first, second) = phi_two_points_both(&bm(), 0.3, 0.0, 1.0, 2.7, &cfg()).unwrap();
        assert!((first - second).abs() < 1e-8);
    }

    #[test]
    fn n_point_examples() {
        let set = PointSet::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert!((phi_n_points(&bm(), 0.0, &set, 3.0, &cfg()).unwrap() - 1.0).abs() < 1e-9);
        assert!(phi_n_points(&bm(), 0.0, &set, 1.5, &cfg()).unwrap().abs() < 1e-9);
        let two = PointSet::new(vec![0.0, 1.0]).unwrap();
        let st = LevyModel::symmetric_stable(1.5).unwrap();
        let a = phi_n_points(&st, 0.0, &two, 0.4, &cfg()).unwrap();
        let b = phi_two_points(&st, 0.0, 0.0, 1.0, 0.4, &cfg()).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn harmonic_fn_matches_anchor_formula() {
        let set = PointSet::new(vec![-1.0, 0.5, 2.0]).unwrap();
        let st = LevyModel::asymmetric_stable(1.6, 0.3).unwrap();
        let f = HarmonicFn::points(&st, set.clone(), 0.0, &cfg()).unwrap();
        assert_eq!(f.kind(), HarmonicKind::NPoint);
        for x in [-3.0, 0.0, 1.2, 4.0] {
            let direct = phi_n_points(&st, 0.0, &set, x, &cfg()).unwrap();
            assert!((f.eval(x).unwrap().value - direct).abs() < 1e-9);
        }
        assert_eq!(f.eval(0.5).unwrap().value, 0.0);
        let tilted = HarmonicFn::points(&bm(), PointSet::new(vec![0.0, 1.0]).unwrap(), -1.0, &cfg()).unwrap();
        assert!(tilted.eval(3.0).unwrap().value.abs() < 1e-9);
        assert!((tilted.eval(-1.0).unwrap().value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn accelerated_points_agree() {
        let f = HarmonicFn::points(&bm(), PointSet::new(vec![0.0, 1.0]).unwrap(), 0.0, &cfg()).unwrap();
        let g = f.accelerated(6.0).unwrap();
        for x in [-2.3, 1.77, 4.9, 9.0] {
            assert!((f.eval(x).unwrap().value - g.eval(x).unwrap().value).abs() < 1e-9);
        }
    }

    #[test]
    fn bounded_set_on_the_set_is_zero() {
        let iv = IntervalUnion::new(vec![(0.0, 1.0)]).unwrap();
        let mc = MCConfig { n_paths: 10, ..Default::default() };
        assert_eq!(phi_bounded_set(&bm(), &iv, 0.5, &mc, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn bounded_set_between_intervals_is_zero() {
        let iv = IntervalUnion::new(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap();
        let mc = MCConfig { n_paths: 2000, ..Default::default() };
        let e = phi_bounded_set(&bm(), &iv, 1.5, &mc, &cfg()).unwrap();
        assert!(e.value.abs() <= 3.0 * e.error + 1e-12, "{e:?}");
    }

    #[test]
    fn bounded_set_outside_matches_endpoint_formula() {
        let iv = IntervalUnion::new(vec![(0.0, 1.0)]).unwrap();
        let mc = MCConfig { n_paths: 2000, ..Default::default() };
        let e = phi_bounded_set(&bm(), &iv, 2.0, &mc, &cfg()).unwrap();
        assert!((e.value - 1.0).abs() <= 3.0 * e.error + 1e-12, "{e:?}");
        let f = HarmonicFn::bounded(&bm(), iv, mc, &cfg()).unwrap();
        assert!(f.accelerated(3.0).is_err());
    }
}
