//! Campaigns on sampled currents and the Whitney decomposition.

use nalgebra::DVector;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use super::{Campaign, CampaignParams, TrialOutcome};
use crate::cone::layer_subdivide;
use crate::error::Result;
use crate::excess::{
    one_sided_excess, one_sided_excess_planes, planar_excess, synth_cone_sample, two_sided_excess, SynthParams,
};
use crate::geometry::AffinePlane;
use crate::random::{ball_point, random_cone, random_subspace};
use crate::whitney::{
    classify_cubes, cubes_at_generation, generation_measure, geometric_partial_sums, in_region, in_region_interior,
    layer_separations, locate_normalized, root_measure, CubeLabel, CurrentOracle, WhitneyGeometry,
};

const RANDOM_PLANES: usize = 1000;

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub struct ExcessScaling;

impl Campaign for ExcessScaling {
    fn name(&self) -> &'static str {
        "excess-scaling"
    }

    fn description(&self) -> &'static str {
        "one- and two-sided excess unchanged by rescaling current, cone and ball to the unit ball"
    }

    fn run_trial(&self, p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let m = rng.random_range(2..=3);
        let planes = rng.random_range(2..=3);
        let s = random_cone(m, 2, planes, planes, rng)?;
        let t = synth_cone_sample(
            &s,
            &SynthParams {
                amplitude: 0.05 * rng.random::<f64>(),
                noise: 0.01 * rng.random::<f64>(),
                density: 300,
                inner_cutoff: 0.05,
                frames: false,
                seed: rng.random(),
            },
        )?;
        let q = ball_point(s.ambient_dim(), 0.5, rng);
        let r = 0.3 + 1.2 * rng.random::<f64>();
        let res = p.resolution.max(1);
        let one = one_sided_excess(&t, &s, &q, r)?;
        let two = two_sided_excess(&t, &s, &q, r, p.spine_cutoff, res)?;
        let t1 = t.rescale(&q, r)?;
        let s1 = s.dilate(&q, r)?;
        let zero = DVector::zeros(s.ambient_dim());
        let one1 = one_sided_excess(&t1, &s1, &zero, 1.0)?;
        let two1 = two_sided_excess(&t1, &s1, &zero, 1.0, p.spine_cutoff, res)?;
        let drift = relative(one, one1).max(relative(two.value, two1.value));
        Ok(TrialOutcome::new(drift <= 1e-10, 1e-10 - drift)
            .metric("drift", drift)
            .metric("two_sided", two.value))
    }
}

pub struct PlanarOpt;

impl Campaign for PlanarOpt {
    fn name(&self) -> &'static str {
        "planar-opt"
    }

    fn description(&self) -> &'static str {
        "best-fit plane never beaten by random planes through the ball center"
    }

    fn run_trial(&self, _p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let m = rng.random_range(2..=3);
        let s = random_cone(m, 2, 2, 2, rng)?;
        let t = synth_cone_sample(
            &s,
            &SynthParams {
                amplitude: 0.05,
                noise: 0.02,
                density: 200,
                inner_cutoff: 0.0,
                frames: false,
                seed: rng.random(),
            },
        )?;
        let q = ball_point(s.ambient_dim(), 0.2, rng);
        let best = planar_excess(&t, &q, 1.0, m)?;
        let mut margin = f64::INFINITY;
        for _ in 0..RANDOM_PLANES {
            let plane = AffinePlane::new(random_subspace(s.ambient_dim(), m, rng), q.clone())?;
            let e = one_sided_excess_planes(&t, std::slice::from_ref(&plane), &q, 1.0)?;
            margin = margin.min(e - best.value);
        }
        Ok(TrialOutcome::new(margin >= -1e-12, margin).metric("planar_excess", best.value))
    }
}

pub struct Whitney;

impl Whitney {
    /// Counts, measure sums and geometric partial sums for every generation.
    fn structure(m: usize, depth: u32) -> Result<bool> {
        let d = (m - 2) as u32;
        let mut ok = true;
        for ell in 0..=depth {
            if ell * d > 20 {
                break;
            }
            ok &= cubes_at_generation(ell, m)?.len() as u64 == 1u64 << (ell * d);
            ok &= generation_measure(ell, m)? == root_measure(m);
        }
        let sums = geometric_partial_sums(m, 0.5, depth);
        ok &= sums.windows(2).all(|w| w[0] <= w[1]);
        ok &= sums.last().is_some_and(|s| *s <= 1.0 / (1.0 - 0.5f64.sqrt()));
        Ok(ok)
    }
}

impl Campaign for Whitney {
    fn name(&self) -> &'static str {
        "whitney"
    }

    fn description(&self) -> &'static str {
        "dyadic cube counts and measures, exact partition of the spine neighborhood, ancestry of cube labels"
    }

    fn run_trial(&self, p: &CampaignParams, trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let m = p.m.max(3);
        let d = m - 2;
        let mut ok = trial != 0 || Self::structure(m, p.depth)?;

        // dyadic points, faces included
        let bits = p.depth + 3;
        let scale = (2.0f64).powi(-(bits as i32));
        for _ in 0..100 {
            let y: Vec<f64> = (0..d)
                .map(|_| -1.0 + 2.0 * rng.random_range(0..=1u64 << bits) as f64 * scale)
                .collect();
            let r = rng.random_range(1..=1u64 << bits) as f64 * scale;
            let cubes = locate_normalized(&y, r, bits + 1);
            ok &= !cubes.is_empty();
            ok &= cubes.iter().all(|l| in_region(&y, r, l));
            ok &= cubes.iter().filter(|l| in_region_interior(&y, r, l)).count() <= 1;
        }

        // labels from a synthetic current
        let s = random_cone(m, p.n, 3, 3, rng)?;
        let layers = layer_subdivide(&s.gap_matrix(), 0.5)?;
        let cones = layers
            .chain
            .iter()
            .map(|c| s.sub_cone(c))
            .collect::<Result<Vec<_>>>()?;
        let seps = layer_separations(&s, &layers.chain, p.delta_bar)?;
        let t = synth_cone_sample(
            &s,
            &SynthParams {
                amplitude: p.amplitude * 10f64.powf(2.0 * rng.random::<f64>()),
                noise: p.noise,
                density: 400,
                inner_cutoff: 0.0,
                frames: false,
                seed: rng.random(),
            },
        )?;
        let geometry = WhitneyGeometry::from_cone(&s, p.rho_star)?;
        let oracle = CurrentOracle::new(&t, &cones, &geometry)?;
        let depth = p.depth.min(if d >= 3 { 4 } else { 6 });
        let c = classify_cubes(m, &seps, p.tau, depth, |l, k| oracle.excess(l, k))?;
        let violations = c.ancestry_violations().len();
        ok &= violations == 0;
        Ok(TrialOutcome::new(ok, -(violations as f64))
            .metric("outer", c.count(|l| *l == CubeLabel::Outer) as f64)
            .metric("central", c.count(|l| matches!(l, CubeLabel::Central(_))) as f64)
            .metric("inner", c.count(|l| *l == CubeLabel::Inner) as f64))
    }
}
