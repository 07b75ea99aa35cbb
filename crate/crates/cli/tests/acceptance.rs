//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

use std::f64::consts::PI;
use std::time::Instant;

use levy_conditioner::{run_job, JobConfig};
use levy_conditioning::conditioned_sim::{
    estimator_cross_check, martingale_check, transience_diagnostic, verify_clock_limit, ClockFamily,
};
use levy_conditioning::harmonic::lattice::{lattice_r_q, phi_lattice, DEFAULT_TAIL_TOL};
use levy_conditioning::harmonic::{phi_bounded_set, phi_via_anchor};
use levy_conditioning::hitting::{finite_set_hitting_limit, h_b, h_c, killed_resolvent};
use levy_conditioning::paths::path_rng;
use levy_conditioning::resolvent::{h, resolvent_density};
use levy_conditioning::{HarmonicFn, IntervalUnion, LevyModel, MCConfig, PointSet, QuadratureConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn bm() -> LevyModel {
    LevyModel::brownian(1.0).unwrap()
}

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn set(p: &[f64]) -> PointSet {
    PointSet::new(p.to_vec()).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    format!("error: {err}")
}

/// Piecewise φ^{(γ)} for standard Brownian motion and a sorted set: linear
/// outside the hull, zero inside.
fn brownian_phi(gamma: f64, lo: f64, hi: f64, x: f64) -> f64 {
    if x < lo {
        (1.0 - gamma) * (lo - x)
    } else if x > hi {
        (1.0 + gamma) * (x - hi)
    } else {
        0.0
    }
}

fn c01_brownian_h() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..=80 {
        let x = -10.0 + 0.25 * i as f64;
        let v = h(&bm(), x, &cfg()).map_err(e)?.value;
        worst = worst.max((v - x.abs()).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    check(worst < 1e-6 && secs < 10.0, format!("max error {worst:.2e}, {secs:.2} s"))
}

fn c02_brownian_resolvent() -> Outcome {
    let mut worst: f64 = 0.0;
    for q in [0.1f64, 0.5, 2.0] {
        for x in [0.0f64, 1.0, 3.0] {
            let s = (2.0 * q).sqrt();
            let v = resolvent_density(&bm(), q, x, &cfg()).map_err(e)?.value;
            worst = worst.max((v - (-s * x).exp() / s).abs());
        }
    }
    check(worst < 1e-8, format!("max error {worst:.2e}"))
}

fn c03_two_point_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for gamma in [-1.0, 0.0, 1.0] {
        let phi = HarmonicFn::points(&bm(), set(&[0.0, 1.0]), gamma, &cfg()).map_err(e)?;
        for x in [-2.0, -0.5, 0.25, 0.75, 1.5, 3.0] {
            let v = phi.eval(x).map_err(e)?.value;
            worst = worst.max((v - brownian_phi(gamma, 0.0, 1.0, x)).abs());
        }
    }
    check(worst < 1e-6, format!("max error {worst:.2e}"))
}

fn c04_gamblers_ruin() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 1..20 {
        let x = i as f64 / 20.0;
        let sol = finite_set_hitting_limit(&bm(), x, &set(&[0.0, 1.0]), &cfg()).map_err(e)?;
        worst = worst.max((sol.probs[0] - (1.0 - x)).abs());
    }
    check(worst < 1e-7, format!("max error {worst:.2e} over 19 points"))
}

fn c05_n_point() -> Outcome {
    let a3 = set(&[0.0, 1.0, 2.0]);
    let a2 = set(&[0.0, 1.0]);
    let (mut anchor, mut recursion, mut oracle): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for gamma in [-1.0, 0.0, 1.0] {
        let phi2 = HarmonicFn::points(&bm(), a2.clone(), gamma, &cfg()).map_err(e)?;
        for x in [-1.0, 0.5, 1.5, 3.0] {
            let vals: Vec<f64> = (0..3)
                .map(|j| phi_via_anchor(&bm(), gamma, &a3, x, j, &cfg()))
                .collect::<Result<_, _>>()
                .map_err(e)?;
            for v in &vals {
                anchor = anchor.max((v - vals[2]).abs());
            }
            let p_last = finite_set_hitting_limit(&bm(), x, &a3, &cfg()).map_err(e)?.probs[2];
            let rec = phi2.eval(x).map_err(e)?.value - phi2.eval(2.0).map_err(e)?.value * p_last;
            recursion = recursion.max((vals[2] - rec).abs());
            oracle = oracle.max((vals[2] - brownian_phi(gamma, 0.0, 2.0, x)).abs());
        }
    }
    check(
        anchor < 1e-6 && recursion < 1e-6 && oracle < 1e-6,
        format!("anchor {anchor:.2e}, recursion {recursion:.2e}, oracle {oracle:.2e}"),
    )
}

fn c06_stable_scaling() -> Outcome {
    let mut worst: f64 = 0.0;
    for alpha in [1.2, 1.5, 1.8] {
        let m = LevyModel::symmetric_stable(alpha).map_err(e)?;
        for x in [0.5, 1.0, 2.0] {
            let r = h(&m, 2.0 * x, &cfg()).map_err(e)?.value / h(&m, x, &cfg()).map_err(e)?.value;
            worst = worst.max((r - 2f64.powf(alpha - 1.0)).abs());
        }
    }
    check(worst < 1e-3, format!("max deviation {worst:.2e}"))
}

fn c07_exponential_clock() -> Outcome {
    let t0 = Instant::now();
    let tr = verify_clock_limit(&bm(), &set(&[0.0, 1.0]), 2.0, ClockFamily::Exponential, &[1e-1, 1e-2, 1e-3, 1e-4], &cfg())
        .map_err(e)?;
    let secs = t0.elapsed().as_secs_f64();
    let gaps: Vec<f64> = tr.rows.iter().map(|r| (r.1 - tr.target).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]) && tr.rows.windows(2).all(|w| w[1].1 > w[0].1);
    let rel = gaps[3] / tr.target;
    check(
        monotone && rel < 0.01 && (tr.target - 1.0).abs() < 1e-6 && secs < 30.0,
        format!("values {:?}, target {}, relative error {rel:.2e}, {secs:.2} s", tr.rows, tr.target),
    )
}

fn c08_normalizers() -> Outcome {
    let hb = h_b(&bm(), 2.0, &cfg()).map_err(e)?;
    // Green function at 0 for the set {1, -1}.
    let hc = h_c(&bm(), 1.0, 1.0, &cfg()).map_err(e)?;
    let killed = killed_resolvent(&bm(), 1e-6, 0.0, 0.0, &set(&[-1.0, 1.0]), &cfg()).map_err(e)?;
    let oh = verify_clock_limit(&bm(), &set(&[0.0, 1.0]), 2.0, ClockFamily::OnePointHit, &[10.0, 30.0, 100.0], &cfg())
        .map_err(e)?;
    let oh_rel = (oh.final_value() - 2.0).abs() / 2.0;
    check(
        (hb - 4.0).abs() < 1e-6 && (hc - 1.0).abs() < 1e-4 && (killed - hc).abs() < 1e-4 && oh_rel < 0.02,
        format!("h^B(2) = {hb}, h^C = {hc}, killed resolvent q=1e-6: {killed}, OH at c=100: {} ({oh_rel:.2e})", oh.final_value()),
    )
}

fn c09_lattice() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_brute: f64 = 0.0;
    for i in 0..=20 {
        let x = 0.05 * i as f64;
        let v = phi_lattice(&bm(), 1.0, x, DEFAULT_TAIL_TOL).map_err(e)?.value;
        worst = worst.max((v - x * (1.0 - x)).abs());
        // Direct partial sum of Σ_{n≠0} (1 - cos(2πnx)) / (2π²n²).
        let brute: f64 = (1..=1_000_000u64)
            .rev()
            .map(|n| {
                let n = n as f64;
                2.0 * (1.0 - (2.0 * PI * n * x).cos()) / (2.0 * PI * PI * n * n)
            })
            .sum();
        worst_brute = worst_brute.max((v - brute).abs());
    }
    let q = 1e-4;
    let (big_r, _) = lattice_r_q(&bm(), 1.0, q, 0.0).map_err(e)?;
    let small_r = resolvent_density(&bm(), q, 0.0, &cfg()).map_err(e)?.value;
    let ratio = small_r / big_r;
    check(
        worst < 1e-6 && worst_brute < 1e-6 && (q * big_r - 1.0).abs() < 1e-3 && ratio < 0.01,
        format!(
            "max error {worst:.2e}, vs 10^6-term sum {worst_brute:.2e}, qR_q(0) = {}, r_q(0)/R_q(0) = {ratio:.3e}",
            q * big_r
        ),
    )
}

fn c10_killed_resolvent_zero() -> Outcome {
    let mut rng = path_rng(2024, 0);
    let stable = LevyModel::symmetric_stable(1.5).map_err(e)?;
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let model = if case % 2 == 0 { bm() } else { stable.clone() };
        let q = 10f64.powf(rng.random_range(-3.0..1.0));
        let mut pts = vec![0.0];
        for _ in 0..rng.random_range(0..3usize) {
            pts.push(rng.random_range(-3.0..3.0));
        }
        let x = rng.random_range(-4.0..4.0);
        let v = killed_resolvent(&model, q, x, 0.0, &set(&pts), &cfg()).map_err(e)?;
        worst = worst.max(v.abs());
    }
    check(worst < 1e-7, format!("max |r_q^A(x,0)| {worst:.2e} over 20 cases"))
}

fn mc() -> MCConfig {
    MCConfig::default()
}

fn phi01() -> HarmonicFn {
    HarmonicFn::points(&bm(), set(&[0.0, 1.0]), 0.0, &cfg()).unwrap()
}

fn c11_martingale() -> Outcome {
    let t0 = Instant::now();
    let recs = martingale_check(&bm(), &phi01(), 2.0, &[0.5, 1.0, 2.0], &mc()).map_err(e)?;
    let secs = t0.elapsed().as_secs_f64();
    let zs: Vec<f64> = recs.iter().map(|r| r.z.unwrap()).collect();
    check(
        zs.iter().all(|z| z.abs() < 3.0) && secs < 120.0,
        format!("z = {zs:.3?}, {secs:.1} s"),
    )
}

fn c12_estimator_cross_check() -> Outcome {
    let cmp = estimator_cross_check(&bm(), &phi01(), 2.0, 1.0, 1e-3, |y| (y > 2.0) as u8 as f64, &mc()).map_err(e)?;
    check(
        cmp.z.abs() < 3.0,
        format!(
            "weighted {:.4} ± {:.4}, rejection {:.4} ± {:.4} ({} accepted), z = {:.2}",
            cmp.weighted.value, cmp.weighted.error, cmp.rejection.estimate, cmp.rejection.stderr, cmp.rejection.accepted, cmp.z
        ),
    )
}

fn c13_bounded_set() -> Outcome {
    let iv = IntervalUnion::new(vec![(0.0, 1.0)]).map_err(e)?;
    let est = phi_bounded_set(&bm(), &iv, 2.0, &mc(), &cfg()).map_err(e)?;
    check(
        (est.value - 1.0).abs() <= 3.0 * est.error && est.error < 0.01,
        format!("estimate {} ± {:.2e}", est.value, est.error),
    )
}

fn c14_transience() -> Outcome {
    let rep = transience_diagnostic(&bm(), &phi01(), 2.0, &[0.5, 1.0, 2.0, 4.0], &mc()).map_err(e)?;
    let margins: Vec<f64> = rep.decrements.iter().map(|d| d.value / d.error).collect();
    check(
        rep.decreasing && rep.absorbed_weight_mass.iter().all(|m| *m == 0.0),
        format!(
            "E[1/φ] = {:.4?}, decrease/stderr = {margins:.1?}, median |X_t| = {:.3?}",
            rep.inverse_phi.iter().map(|e| e.value).collect::<Vec<_>>(),
            rep.weighted_medians
        ),
    )
}

fn c15_determinism() -> Outcome {
    let config = r#"{
        "model": {"kind": "brownian_motion", "sigma": 1.0},
        "job": "Simulate",
        "set": {"points": [0.0, 1.0]},
        "x": 2.0,
        "grid": {"times": [0.5, 1.0, 2.0]},
        "mc": {"n_paths": 100000, "dt": 0.001, "root_seed": 7}
    }"#;
    let cfg = JobConfig::parse(config).map_err(e)?;
    let dirs = [tempfile::tempdir().map_err(e)?, tempfile::tempdir().map_err(e)?];
    let mut outputs = Vec::new();
    for d in &dirs {
        let out = run_job(&cfg, d.path(), None).map_err(e)?;
        let mut files = Vec::new();
        for f in &out.files {
            files.push((f.file_name().unwrap().to_owned(), std::fs::read(f).map_err(e)?));
        }
        outputs.push(files);
    }
    let bytes: usize = outputs[0].iter().map(|f| f.1.len()).sum();
    check(
        outputs[0] == outputs[1] && !outputs[0].is_empty(),
        format!("{} files, {bytes} bytes compared", outputs[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("brownian h", c01_brownian_h),
        ("brownian resolvent", c02_brownian_resolvent),
        ("two-point oracle", c03_two_point_oracle),
        ("gambler's ruin", c04_gamblers_ruin),
        ("n-point consistency", c05_n_point),
        ("stable scaling", c06_stable_scaling),
        ("exponential clock", c07_exponential_clock),
        ("clock normalizers", c08_normalizers),
        ("lattice", c09_lattice),
        ("killed resolvent zero", c10_killed_resolvent_zero),
        ("martingale suite", c11_martingale),
        ("estimator cross-check", c12_estimator_cross_check),
        ("bounded-set monte carlo", c13_bounded_set),
        ("transience", c14_transience),
        ("determinism", c15_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("{:02} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let result = run();
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS {label} [{secs:.1} s]: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {label} [{secs:.1} s]: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
