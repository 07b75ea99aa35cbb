//! Path skeletons with absorption on a target set.
//!
//! Brownian steps use the bridge crossing probability
//! exp(-2(b - x0)(b - x1)/(σ²Δ)) for every boundary of the current gap, so
//! absorption is detected between grid points. Jump models only see the
//! skeleton: landing in the set or crossing a boundary between steps counts
//! as absorption, which biases hitting times upward and is flagged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::{sample_increment, LevyModel, ModelKind};

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_max: f64,
    pub root_seed: u64,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig {
            n_paths: 100_000,
            dt: 1e-3,
            t_max: 50.0,
            root_seed: 0x5eed,
        }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidInput("n_paths must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("step must be positive, got {}", self.dt)));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {}", self.t_max)));
        }
        Ok(())
    }

    /// Same settings with a different seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.root_seed = seed;
        self
    }
}

/// Independent generator for path `index` under `root_seed`.
pub fn path_rng(root_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(index);
    rng
}

/// Geometry needed to absorb paths.
pub trait Absorbing: Sync {
    /// True when x lies in the set.
    fn contains(&self, x: f64) -> bool;
    /// Boundaries (below, above) of the complementary component holding x.
    fn gap(&self, x: f64) -> (Option<f64>, Option<f64>);
}

/// Result of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Alive(f64),
    Absorbed(f64),
}

/// Steps a model across a set.
pub struct Stepper<'a, S: Absorbing + ?Sized> {
    model: &'a LevyModel,
    set: &'a S,
    sigma: Option<f64>,
    alpha: f64,
}

/// Ratio of the barrier distance to the step's typical displacement in
/// distance-adaptive stepping.
pub const ADAPTIVE_RATIO: f64 = 4.0;

impl<'a, S: Absorbing + ?Sized> Stepper<'a, S> {
    pub fn new(model: &'a LevyModel, set: &'a S) -> Result<Self> {
        if !model.has_sampler() {
            return Err(Error::NoSampler);
        }
        let alpha = match model.kind() {
            ModelKind::BrownianMotion { .. } => 2.0,
            ModelKind::SymmetricStable { alpha } | ModelKind::AsymmetricStable { alpha, .. } => *alpha,
            ModelKind::UserExponent { .. } => model.tail_exponent().unwrap_or(2.0).clamp(1.0, 2.0),
        };
        Ok(Stepper {
            model,
            set,
            sigma: model.brownian_sigma(),
            alpha,
        })
    }

    /// True when absorption ignores excursions between grid points.
    pub fn biased(&self) -> bool {
        self.sigma.is_none()
    }

    /// Advances x by dt.
    pub fn step(&self, x: f64, dt: f64, rng: &mut ChaCha8Rng) -> Result<Step> {
        let (lo, hi) = self.set.gap(x);
        let y = x + sample_increment(self.model, dt, rng)?;
        if let Some(l) = lo {
            if y <= l {
                return Ok(Step::Absorbed(if self.sigma.is_some() { l } else { self.landing(l, y) }));
            }
        }
        if let Some(u) = hi {
            if y >= u {
                return Ok(Step::Absorbed(if self.sigma.is_some() { u } else { self.landing(u, y) }));
            }
        }
        if let Some(sigma) = self.sigma {
            let var = sigma * sigma * dt;
            // Check the nearer boundary first.
            let mut barriers = [lo, hi];
            if let (Some(l), Some(u)) = (lo, hi) {
                if u - x < x - l {
                    barriers.swap(0, 1);
                }
            }
            for b in barriers.into_iter().flatten() {
                let p = (-2.0 * (b - x) * (b - y) / var).exp();
                if rng.random::<f64>() < p {
                    return Ok(Step::Absorbed(b));
                }
            }
        }
        Ok(Step::Alive(y))
    }

    /// For a jump that leaves the gap past boundary b: the landing point if
    /// it lies in the set, else b.
    fn landing(&self, b: f64, y: f64) -> f64 {
        if self.set.contains(y) {
            y
        } else {
            b
        }
    }

    /// Step length with the expected displacement a fraction of the
    /// distance to the nearest boundary, never below `floor`.
    pub fn adaptive_dt(&self, x: f64, floor: f64) -> f64 {
        let (lo, hi) = self.set.gap(x);
        let d = match (lo, hi) {
            (Some(l), Some(u)) => (x - l).min(u - x),
            (Some(l), None) => x - l,
            (None, Some(u)) => u - x,
            (None, None) => f64::INFINITY,
        };
        let scaled = d / ADAPTIVE_RATIO;
        let dt = match self.sigma {
            Some(s) => (scaled / s).powi(2),
            None => scaled.powf(self.alpha),
        };
        dt.max(floor)
    }

    /// Runs from x with fixed steps until `t` (or absorption).
    pub fn run_fixed(&self, x: f64, t: f64, dt: f64, rng: &mut ChaCha8Rng) -> Result<Step> {
        let mut pos = x;
        let mut now = 0.0;
        while now < t {
            let h = dt.min(t - now);
            if h <= 1e-15 * t.max(1.0) {
                break;
            }
            match self.step(pos, h, rng)? {
                Step::Alive(y) => pos = y,
                absorbed => return Ok(absorbed),
            }
            now += h;
        }
        Ok(Step::Alive(pos))
    }

    /// Runs with distance-adaptive steps until absorption or `horizon`.
    pub fn run_adaptive(&self, x: f64, horizon: f64, floor: f64, rng: &mut ChaCha8Rng) -> Result<Step> {
        let mut pos = x;
        let mut now = 0.0;
        while now < horizon {
            let h = self.adaptive_dt(pos, floor).min(horizon - now);
            if h <= 0.0 {
                break;
            }
            match self.step(pos, h, rng)? {
                Step::Alive(y) => pos = y,
                absorbed => return Ok(absorbed),
            }
            now += h;
        }
        Ok(Step::Alive(pos))
    }
}
