//! Pruning, layering and point clustering campaigns.

use nalgebra::DVector;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use super::{Campaign, CampaignParams, TrialOutcome};
use crate::clustering::{cluster_comparable, cluster_refine, cluster_split, cross_separation, PointSet};
use crate::cone::{layer_subdivide, prune, prune_constants, GapMatrix};
use crate::error::{Error, Result};
use crate::random::multiscale_cone;
use crate::CERT_SLACK;

fn random_gaps(p: &CampaignParams, rng: &mut ChaCha8Rng) -> Result<GapMatrix> {
    let m = rng.random_range(2..=3);
    let n = rng.random_range(2..=3);
    let planes = rng.random_range(2..=p.max_planes.max(2));
    Ok(multiscale_cone(m, n, planes, rng)?.gap_matrix())
}

fn random_delta(p: &CampaignParams, rng: &mut ChaCha8Rng) -> f64 {
    p.delta.unwrap_or_else(|| 1.0 - 0.95 * rng.random::<f64>())
}

pub struct Prune;

impl Campaign for Prune {
    fn name(&self) -> &'static str {
        "prune"
    }

    fn description(&self) -> &'static str {
        "pruning certificates on multiscale plane families; inputs above the admissible scale must be rejected"
    }

    fn run_trial(&self, p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let g = random_gaps(p, rng)?;
        let delta = random_delta(p, rng);
        let (_, eps) = prune_constants(g.len(), delta);
        let top = eps * g.max_gap(&g.all());
        let d = match rng.random_range(0..8) {
            0 => 0.0,
            1 => top,
            _ => top * rng.random::<f64>().powi(3),
        };
        let cert = prune(&g, d, delta)?;
        let over = top * (1.01 + rng.random::<f64>());
        let rejected = matches!(prune(&g, over, delta), Err(Error::HypothesisViolated { .. }));
        Ok(TrialOutcome::new(cert.holds() && rejected, cert.worst_margin())
            .metric("N", g.len() as f64)
            .metric("kept", cert.kept.len() as f64)
            .metric("gamma", cert.gamma))
    }
}

pub struct Layers;

impl Campaign for Layers {
    fn name(&self) -> &'static str {
        "layers"
    }

    fn description(&self) -> &'static str {
        "layer subdivision conclusions and constancy of the largest gap along the chain"
    }

    fn run_trial(&self, p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let g = random_gaps(p, rng)?;
        let delta = random_delta(p, rng);
        let cert = layer_subdivide(&g, delta)?;
        let margin = cert
            .min_gap
            .iter()
            .zip(&cert.reach)
            .map(|(m, d)| delta * m - d)
            .fold(f64::INFINITY, f64::min);
        Ok(TrialOutcome::new(cert.holds(), margin)
            .metric("N", g.len() as f64)
            .metric("kappa", cert.kappa as f64)
            .metric("eta", cert.eta))
    }
}

fn random_points(rng: &mut ChaCha8Rng) -> Result<PointSet> {
    let n = rng.random_range(1..=3);
    let count = rng.random_range(2..=8);
    let pts = (0..count)
        .map(|_| DVector::from_fn(n, |_, _| rng.random::<f64>()))
        .collect();
    PointSet::new(n, pts)
}

pub struct Clusters1;

impl Campaign for Clusters1 {
    fn name(&self) -> &'static str {
        "clusters1"
    }

    fn description(&self) -> &'static str {
        "comparable sub-configurations: diameter/separation ratio, proximity and removal order"
    }

    fn run_trial(&self, _p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let pts = random_points(rng)?;
        let delta_bar = 0.5 - 0.45 * rng.random::<f64>();
        let c = cluster_comparable(&pts, delta_bar)?;
        let margin = (1.0 - c.achieved_ratio / c.ratio_bound).min(delta_bar - c.achieved_delta);
        Ok(TrialOutcome::new(c.holds(), margin)
            .metric("achieved_ratio", c.achieved_ratio)
            .metric("selected", c.selected.len() as f64))
    }
}

pub struct Clusters2;

impl Campaign for Clusters2 {
    fn name(&self) -> &'static str {
        "clusters2"
    }

    fn description(&self) -> &'static str {
        "refinement at a given scale: reach bound and dominance of the surviving separation"
    }

    fn run_trial(&self, _p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let pts = random_points(rng)?;
        let delta = 0.5 - 0.45 * rng.random::<f64>();
        let eps = 10f64.powf(-3.0 * rng.random::<f64>());
        let c = cluster_refine(&pts, delta, eps)?;
        Ok(TrialOutcome::new(c.holds(), (c.reach_bound - c.max_dist) / c.reach_bound)
            .metric("selected", c.selected.len() as f64))
    }
}

pub struct Clusters3;

impl Campaign for Clusters3 {
    fn name(&self) -> &'static str {
        "clusters3"
    }

    fn description(&self) -> &'static str {
        "two-cluster split with cross separation at least diameter/2^(N-2), checked against all bipartitions for N ≤ 6"
    }

    fn run_trial(&self, _p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let pts = random_points(rng)?;
        let c = cluster_split(&pts)?;
        let mut ok = c.holds;
        let n = pts.len();
        if n <= 6 {
            // the point n-1 is always on the second side to avoid mirrored masks
            let best = (1u32..1 << (n - 1))
                .map(|mask| {
                    let (a, b): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| i < n - 1 && mask >> i & 1 == 1);
                    cross_separation(&pts, &a, &b)
                })
                .fold(0.0, f64::max);
            ok &= best >= c.bound * (1.0 - CERT_SLACK);
            ok &= c.separation <= best * (1.0 + CERT_SLACK);
        }
        Ok(TrialOutcome::new(ok, (c.separation - c.bound) / c.diameter)
            .metric("separation_over_diameter", c.separation / c.diameter))
    }
}
