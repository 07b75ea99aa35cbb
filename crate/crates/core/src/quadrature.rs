//! Adaptive Gauss–Legendre panels, power-law tail mapping and Euler-summed
//! oscillatory tails.
//!
//! Every panel is integrated twice: once with a single 15-point rule and once
//! with the same rule on each half. The halved value is kept and the
//! difference serves as the panel's error estimate. Panels with the largest
//! estimate are bisected until the global tolerance is met or the panel
//! budget runs out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const RULE_POINTS: usize = 15;
/// Relative rounding level of a panel sum.
const ROUNDING: f64 = 64.0 * f64::EPSILON;

struct Rule {
    nodes: [f64; RULE_POINTS],
    weights: [f64; RULE_POINTS],
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1], found by
/// Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (n, w) = gauss_legendre(RULE_POINTS);
        let mut rule = Rule {
            nodes: [0.0; RULE_POINTS],
            weights: [0.0; RULE_POINTS],
        };
        rule.nodes.copy_from_slice(&n);
        rule.weights.copy_from_slice(&w);
        rule
    })
}

/// Integral estimate with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

impl Integral {
    pub const ZERO: Integral = Integral {
        value: 0.0,
        error: 0.0,
        panels: 0,
    };

    pub fn add(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            error: self.error + other.error,
            panels: self.panels + other.panels,
        }
    }
}

/// Tolerances shared by the quadrature routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Tolerance {
    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Fixed 15-point rule on [a, b]; returns (integral, integral of |f|).
fn apply<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let r = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    let mut sum_abs = 0.0;
    for (z, w) in r.nodes.iter().zip(r.weights.iter()) {
        let v = f(mid + half * z);
        let v = if v.is_finite() { v } else { 0.0 };
        sum += w * v;
        sum_abs += w * v.abs();
    }
    (sum * half, sum_abs * half.abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
    mass: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, coarse: f64, abs_mass: f64) -> Panel {
        let m = 0.5 * (a + b);
        let (left, la) = apply(f, a, m);
        let (right, ra) = apply(f, m, b);
        let fine = left + right;
        let mut error = (coarse - fine).abs();
        // Differences at rounding level carry no information.
        let floor = ROUNDING * (la + ra).max(abs_mass);
        if error < floor {
            error = 0.0;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            error = 0.0;
        }
        Panel {
            a,
            b,
            left,
            right,
            error,
            mass: la + ra,
        }
    }

    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration of `f` over consecutive panels given by `breaks`
/// (sorted, at least two entries).
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: Tolerance) -> Result<Integral> {
    assert!(breaks.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::with_capacity(2 * breaks.len());
    for w in breaks.windows(2) {
        let (coarse, mass) = apply(f, w[0], w[1]);
        heap.push(Panel::new(f, w[0], w[1], coarse, mass));
    }
    loop {
        let (value, error, mass) = heap
            .iter()
            .fold((0.0, 0.0, 0.0), |(v, e, m), p| (v + p.value(), e + p.error, m + p.mass));
        let target = tol.target(value);
        // Reported errors include the rounding level of the panel sums.
        let reported = error + ROUNDING * mass;
        if error <= target {
            return Ok(Integral {
                value,
                error: reported,
                panels: heap.len(),
            });
        }
        if heap.len() >= tol.max_panels {
            return Err(Error::QuadratureDivergence {
                estimate: value,
                error,
                target,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        if worst.error == 0.0 {
            heap.push(worst);
            return Ok(Integral {
                value,
                error: reported,
                panels: heap.len(),
            });
        }
        let m = 0.5 * (worst.a + worst.b);
        heap.push(Panel::new(f, worst.a, m, worst.left, 0.0));
        heap.push(Panel::new(f, m, worst.b, worst.right, 0.0));
    }
}

/// ∫_start^∞ f for an integrand decaying like λ^{-p}, p > 1, through the
/// substitution λ = start · t^{-1/(p-1)} which maps the tail onto (0, 1] with
/// an integrand that tends to a constant as t → 0.
pub fn power_tail<F: Fn(f64) -> f64>(f: &F, start: f64, p: f64, tol: Tolerance) -> Result<Integral> {
    debug_assert!(p > 1.0 && start > 0.0);
    let k = 1.0 / (p - 1.0);
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let lambda = start * t.powf(-k);
        if !lambda.is_finite() {
            return 0.0;
        }
        let jac = start * k * t.powf(-k - 1.0);
        let v = f(lambda) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive(&g, &[0.0, 0.25, 1.0], tol)
}

/// ∫_start^∞ f for an oscillating integrand with half-period `half_period`,
/// where `start` sits on a zero of the oscillation. Consecutive half-period
/// integrals form an asymptotically alternating series whose partial sums
/// are accelerated by the Euler transform.
pub fn oscillatory_tail<F: Fn(f64) -> f64>(
    f: &F,
    start: f64,
    half_period: f64,
    tol: Tolerance,
) -> Result<Integral> {
    const DIRECT: usize = 24;
    const DEPTH: usize = 16;
    const MAX_TERMS: usize = 4096;

    let term_tol = Tolerance {
        abs: tol.abs * 1e-2,
        rel: tol.rel * 1e-2,
        max_panels: 64,
    };
    let mut terms: Vec<f64> = Vec::with_capacity(DIRECT + DEPTH + 1);
    let mut err_sum = 0.0;
    let mut panels = 0;
    let term = |k: usize| -> Result<Integral> {
        let a = start + k as f64 * half_period;
        adaptive(f, &[a, a + half_period], term_tol)
    };
    let extend = |upto: usize, terms: &mut Vec<f64>, err_sum: &mut f64, panels: &mut usize| -> Result<()> {
        while terms.len() < upto {
            let r = term(terms.len())?;
            *err_sum += r.error;
            *panels += r.panels;
            terms.push(r.value);
        }
        Ok(())
    };
    let mut n = DIRECT;
    extend(n + DEPTH + 1, &mut terms, &mut err_sum, &mut panels)?;
    loop {
        let partial: Vec<f64> = terms
            .iter()
            .scan(0.0, |s, t| {
                *s += t;
                Some(*s)
            })
            .collect();
        let euler = |start_index: usize| -> f64 {
            let mut coeff = 1.0;
            let mut acc = 0.0;
            for k in 0..=DEPTH {
                acc += coeff * partial[start_index + k];
                coeff *= (DEPTH - k) as f64 / (k + 1) as f64;
            }
            acc / 2f64.powi(DEPTH as i32)
        };
        let e1 = euler(n);
        let e0 = euler(n - 1);
        let error = (e1 - e0).abs() + err_sum;
        let target = tol.target(e1);
        if error <= target {
            return Ok(Integral {
                value: e1,
                error,
                panels,
            });
        }
        if terms.len() >= MAX_TERMS {
            return Err(Error::QuadratureDivergence {
                estimate: e1,
                error,
                target,
            });
        }
        // Push further into the asymptotic regime.
        let extra = n;
        n += extra;
        extend(n + DEPTH + 1, &mut terms, &mut err_sum, &mut panels)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerance = Tolerance {
        abs: 1e-12,
        rel: 1e-12,
        max_panels: 4096,
    };

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(15);
        // degree 28 monomial: ∫_{-1}^{1} x^28 = 2/29
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(28)).sum();
        assert!((s - 2.0 / 29.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_smooth_and_kinked_integrands() {
        let r = adaptive(&|x: f64| x.sin(), &[0.0, std::f64::consts::PI], TOL).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        let r = adaptive(&|x: f64| x.abs().sqrt(), &[-1.0, 1.0], TOL).unwrap();
        assert!((r.value - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_reports_divergence_when_budget_exhausted() {
        let tight = Tolerance {
            abs: 1e-15,
            rel: 1e-15,
            max_panels: 4,
        };
        let err = adaptive(&|x: f64| 1.0 / x.abs().sqrt(), &[-1.0, 1.0], tight).unwrap_err();
        assert!(matches!(err, Error::QuadratureDivergence { .. }));
    }

    #[test]
    fn power_tail_matches_closed_form() {
        // ∫_2^∞ λ^{-1.3} dλ = 2^{-0.3}/0.3
        let r = power_tail(&|l: f64| l.powf(-1.3), 2.0, 1.3, TOL).unwrap();
        assert!((r.value - 2f64.powf(-0.3) / 0.3).abs() < 1e-10);
        // ∫_1^∞ 1/(1+λ²) = π/4
        let r = power_tail(&|l: f64| 1.0 / (1.0 + l * l), 1.0, 2.0, TOL).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_tail_matches_sine_integral() {
        // ∫_0^∞ sin(λ)/λ = π/2, starting on the zero at π.
        let head = adaptive(&|l: f64| l.sin() / l, &[0.0, std::f64::consts::PI], TOL).unwrap();
        let tail = oscillatory_tail(
            &|l: f64| l.sin() / l,
            std::f64::consts::PI,
            std::f64::consts::PI,
            Tolerance {
                abs: 1e-11,
                rel: 1e-11,
                max_panels: 4096,
            },
        )
        .unwrap();
        assert!((head.value + tail.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
