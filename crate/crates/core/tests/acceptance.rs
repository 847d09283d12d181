//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs with `cargo test --test acceptance`. Campaign thread count follows
//! `CONEKIT_THREADS`.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::RngExt;

use conekit_core::campaign::{self, CampaignParams, CampaignReport};
use conekit_core::cone::{prune, prune_constants};
use conekit_core::excess::{
    nonoriented_tilt, oriented_tilt, tilt_excess_nonoriented, tilt_excess_oriented, unit_ball_volume, Cylinder,
    SampledCurrent, TangentFrame,
};
use conekit_core::random::{multiscale_cone, random_rotation};
use conekit_core::sampling;
use conekit_core::whitney::{cubes_at_generation, generation_measure, root_measure};
use conekit_core::{Error, Subspace};

const SEED: u64 = 1;
const SECOND_SEED: u64 = 2;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn run(name: &str, trials: u64, params: &CampaignParams, seed: u64) -> CampaignReport {
    let c = campaign::find(name).expect("registered campaign");
    campaign::run_campaign(c.as_ref(), params, trials, seed, campaign::threads_from_env()).expect("campaign runs")
}

fn clean(r: &CampaignReport) -> bool {
    r.passed == r.trials && r.errors == 0
}

fn max_metric(r: &CampaignReport, name: &str) -> f64 {
    r.aggregates.get(name).map_or(f64::NAN, |a| a.max)
}

fn angles() -> Verdict {
    let r = run("angles", 1000, &CampaignParams::default(), SEED);
    let err = max_metric(&r, "angle_error");
    Verdict::new(
        clean(&r) && err <= 1e-8,
        format!("{}/{} pairs, max angle error {err:.2e} (tol 1e-8)", r.passed, r.trials),
    )
}

fn hausdorff() -> Verdict {
    let params = CampaignParams {
        resolution: 1 << 14,
        ..CampaignParams::default()
    };
    let r = run("hausdorff", 1000, &params, SEED);
    let id = max_metric(&r, "identity_error");
    let gap = max_metric(&r, "sampled_gap");
    Verdict::new(
        clean(&r) && id <= 1e-9 && gap <= 1e-6,
        format!(
            "{}/{} pairs, identity error {id:.2e} (tol 1e-9), sampled gap {gap:.2e} at 2^14 samples (tol 1e-6)",
            r.passed, r.trials
        ),
    )
}

fn rotation() -> Verdict {
    let r = run("rotation", 1000, &CampaignParams::default(), SEED);
    let worst = ["orthogonality", "determinant", "mapping", "inverse", "fixed", "basis"]
        .iter()
        .map(|k| max_metric(&r, k))
        .fold(0.0, f64::max);
    Verdict::new(
        clean(&r) && worst <= 1e-9,
        format!("{}/{} pairs, worst deviation {worst:.2e} (tol 1e-9)", r.passed, r.trials),
    )
}

fn sandwich() -> Verdict {
    let r = run("sandwich", 1000, &CampaignParams::default(), SEED);
    let lo = ["ratio1", "ratio2"]
        .iter()
        .map(|k| r.aggregates[*k].min)
        .fold(f64::INFINITY, f64::min);
    let hi = max_metric(&r, "ratio1").max(max_metric(&r, "ratio2"));
    Verdict::new(
        clean(&r),
        format!(
            "{} violations in {} pairs, θ/σ ∈ [{lo:.3}, {hi:.3}] (bounds [0.25, 4])",
            r.trials - r.passed,
            r.trials
        ),
    )
}

fn pruning() -> Verdict {
    let r = run("prune", 10_000, &CampaignParams::default(), SEED);
    // inputs above the admissible scale must be refused as a precondition failure
    let mut rng = sampling::rng(SEED);
    let mut refused = 0;
    let checks = 200;
    for _ in 0..checks {
        let n = rng.random_range(2..=6);
        let g = multiscale_cone(3, 2, n, &mut rng).expect("generator").gap_matrix();
        let delta = 0.5;
        let (_, eps) = prune_constants(g.len(), delta);
        let over = 2.0 * eps * g.max_gap(&g.all());
        if let Err(e @ Error::HypothesisViolated { .. }) = prune(&g, over, delta) {
            refused += usize::from(e.is_precondition());
        }
    }
    Verdict::new(
        clean(&r) && refused == checks,
        format!(
            "{}/{} certificates hold, {refused}/{checks} over-scale inputs refused as preconditions",
            r.passed, r.trials
        ),
    )
}

fn layers() -> Verdict {
    let r = run("layers", 10_000, &CampaignParams::default(), SEED);
    Verdict::new(
        clean(&r),
        format!("{} violations in {} instances", r.trials - r.passed, r.trials),
    )
}

fn clustering() -> Verdict {
    let reports: Vec<CampaignReport> = ["clusters1", "clusters2", "clusters3"]
        .iter()
        .map(|c| run(c, 10_000, &CampaignParams::default(), SEED))
        .collect();
    let detail = reports
        .iter()
        .map(|r| format!("{} {}/{}", r.campaign, r.passed, r.trials))
        .collect::<Vec<_>>()
        .join(", ");
    Verdict::new(reports.iter().all(clean), detail)
}

/// Neumaier summation; a plain sum of 2^18 cube measures drifts by ~1e-12.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

fn whitney() -> Verdict {
    let mut ok = true;
    for m in 3..=5usize {
        let d = (m - 2) as u32;
        for ell in 0..=6u32 {
            let cubes = cubes_at_generation(ell, m).expect("valid generation");
            ok &= cubes.len() as u64 == 1u64 << (ell * d);
            // dyadic sides sum exactly; physical measures carry the 1/sqrt(m-2) factor
            let dyadic: f64 = cubes.iter().map(|c| c.normalized_side().powi(d as i32)).sum();
            ok &= dyadic == (2.0f64).powi(d as i32);
            let total = compensated_sum(cubes.iter().map(|c| c.measure()));
            ok &= (total - root_measure(m)).abs() <= 1e-12 * root_measure(m);
            ok &= generation_measure(ell, m).expect("valid generation") == root_measure(m);
        }
    }
    let structure = ok;
    // 100 dyadic points per trial, 10^5 in total across m = 3, 4, 5
    let mut points = 0;
    let mut labelled = true;
    for (m, trials) in [(3usize, 400u64), (4, 300), (5, 300)] {
        let params = CampaignParams {
            m,
            ..CampaignParams::default()
        };
        let r = run("whitney", trials, &params, SEED);
        labelled &= clean(&r);
        points += 100 * trials;
    }
    Verdict::new(
        structure && labelled,
        format!(
            "counts and measures for m ∈ {{3,4,5}}, ℓ ≤ 6: {}; partition on {points} dyadic points and label ancestry: {}",
            if structure { "exact" } else { "MISMATCH" },
            if labelled { "ok" } else { "VIOLATED" }
        ),
    )
}

fn excess_scaling() -> Verdict {
    let r = run("excess-scaling", 1000, &CampaignParams::default(), SEED);
    let drift = max_metric(&r, "drift");
    Verdict::new(
        clean(&r) && drift <= 1e-10,
        format!("{}/{} instances, max relative drift {drift:.2e} (tol 1e-10)", r.passed, r.trials),
    )
}

fn planar_opt() -> Verdict {
    let r = run("planar-opt", 100, &CampaignParams::default(), SEED);
    Verdict::new(
        clean(&r),
        format!(
            "{}/{} instances, 10^3 random planes each, worst margin {:.2e} (tol -1e-12)",
            r.passed, r.trials, r.worst_margin
        ),
    )
}

/// Frame `e_i cos φ_i + e_{m+i} sin φ_i` against `π = span(e_1..e_m)`, both
/// moved by the same random rotation.
fn tilt_algebra() -> Verdict {
    let mut rng = sampling::rng(SEED);
    let mut flip_err = 0.0f64;
    let mut closed_err = 0.0f64;
    let mut cylinder_err = 0.0f64;
    for _ in 0..1000 {
        let m = rng.random_range(1..=3usize);
        let n = rng.random_range(m..=m + 2);
        let ambient = m + n;
        let rot = random_rotation(ambient, &mut rng);
        let pi = Subspace::coordinate(ambient, &(0..m).collect::<Vec<_>>())
            .transformed(&rot)
            .expect("rotated plane");
        let phis: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 1.5).collect();
        let mut base = DMatrix::zeros(ambient, m);
        for (i, &phi) in phis.iter().enumerate() {
            base[(i, i)] = phi.cos();
            base[(m + i, i)] = phi.sin();
        }
        let tilted = TangentFrame {
            frame: &rot * base,
            sign: 1.0,
        };
        let oriented = 2.0 - 2.0 * phis.iter().map(|p| p.cos()).product::<f64>();
        let nonoriented = 2.0 * phis.iter().map(|p| p.sin().powi(2)).sum::<f64>();
        // `pi` may have been reframed by Gram-Schmidt; compare against its own orientation
        let orient = (pi.frame().transpose() * &rot.columns(0, m)).determinant().signum();
        closed_err = closed_err
            .max((oriented_tilt(&tilted, &pi, orient) - oriented).abs())
            .max((nonoriented_tilt(&tilted, &pi) - nonoriented).abs());

        // reversed orientation of π itself
        let own = TangentFrame {
            frame: pi.frame().clone(),
            sign: -1.0,
        };
        flip_err = flip_err
            .max((oriented_tilt(&own, &pi, 1.0) - 4.0).abs())
            .max(nonoriented_tilt(&own, &pi).abs());

        // a sampled current lying in π with reversed orientation
        let count = 20;
        let points: Vec<DVector<f64>> = (0..count)
            .map(|_| pi.embed(&DVector::from_fn(m, |_, _| rng.random::<f64>() - 0.5)))
            .collect();
        let weights: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
        let frames = vec![own.clone(); count];
        let t = SampledCurrent::new(ambient, m, points, weights, Some(frames)).expect("valid current");
        let c = Cylinder::new(DVector::zeros(ambient), 1.0, pi.clone()).expect("cylinder");
        let mass: f64 = t.weights().iter().sum();
        let expected = 4.0 * mass / (2.0 * unit_ball_volume(m));
        cylinder_err = cylinder_err
            .max((tilt_excess_oriented(&t, &c, &pi, 1.0).expect("frames") - expected).abs() / expected)
            .max(tilt_excess_nonoriented(&t, &c, &pi).expect("frames").abs());
    }
    Verdict::new(
        flip_err <= 1e-12 && cylinder_err <= 1e-12 && closed_err <= 1e-10,
        format!(
            "reversal error {flip_err:.2e}, cylinder reversal error {cylinder_err:.2e} (tol 1e-12), closed forms {closed_err:.2e} (tol 1e-10)"
        ),
    )
}

fn calibration() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["spine", "shift", "maximizer"] {
        let params = CampaignParams::default();
        let a = run(name, 1000, &params, SEED).constant.unwrap_or(f64::NAN);
        let b = run(name, 1000, &params, SECOND_SEED).constant.unwrap_or(f64::NAN);
        let spread = (a - b).abs() / a.min(b);
        ok &= spread < 0.10;
        parts.push(format!("{name} {a:.4}/{b:.4} ({:.1}%)", 100.0 * spread));
    }
    Verdict::new(ok, format!("{} (tol 10%)", parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("morgan-angle oracle agreement", angles),
        ("hausdorff identity", hausdorff),
        ("rotation contract", rotation),
        ("sandwich bounds", sandwich),
        ("pruning certificates", pruning),
        ("layer certificates", layers),
        ("clustering certificates", clustering),
        ("whitney suite", whitney),
        ("excess scaling identity", excess_scaling),
        ("planar-excess optimality", planar_opt),
        ("tilt-excess algebra", tilt_algebra),
        ("calibration stability", calibration),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = f();
        failed += usize::from(!v.pass);
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
