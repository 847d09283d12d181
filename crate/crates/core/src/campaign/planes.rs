//! Campaigns on pairs of planes: angles, canonical rotations, unit-ball
//! distances and the small-slope sandwich.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use super::{within, Campaign, CampaignParams, TrialOutcome};
use crate::error::Result;
use crate::geometry::{
    canonical_rotation, half_difference_singular_values, morgan_angles, svd, symmetric_eigen, unit_ball_hausdorff,
    Subspace, ZERO_ANGLE_TOL,
};
use crate::random::{gaussian_matrix, gaussian_vector, random_rotation, random_subspace, random_subspace_of};
use crate::sampling;

/// Two `k`-planes of `R^ambient`, `ambient ≤ 8`; half of the time they share
/// a random subspace of positive dimension.
fn random_pair(rng: &mut ChaCha8Rng) -> Result<(Subspace, Subspace)> {
    let ambient = rng.random_range(2..=8);
    let k = rng.random_range(1..ambient);
    if k >= 2 && rng.random::<bool>() {
        let j = rng.random_range(1..k);
        let shared = random_subspace(ambient, j, rng);
        let comp = shared.orthogonal_complement();
        let mut make = || {
            let rest = random_subspace_of(&comp, k - j, rng);
            let cols: Vec<DVector<f64>> = (0..j)
                .map(|i| shared.basis_vector(i))
                .chain((0..k - j).map(|i| rest.basis_vector(i)))
                .collect();
            Subspace::span(ambient, &cols)
        };
        Ok((make()?, make()?))
    } else {
        Ok((random_subspace(ambient, k, rng), random_subspace(ambient, k, rng)))
    }
}

/// Eigenvalues of `v ↦ dist²(v, β)` on `α`, ascending.
fn distance_form_eigenvalues(a: &Subspace, b: &Subspace) -> Vec<f64> {
    let c = a.frame().transpose() * b.frame();
    let form = DMatrix::identity(a.dim(), a.dim()) - &c * c.transpose();
    let mut ev: Vec<f64> = symmetric_eigen(&form).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// All angles of the pair from the eigenvectors of the distance form, each
/// read off as `atan2(dist(v, β), |p_β v|)` so small angles keep full
/// precision. Ascending, zeros included.
fn distance_form_angles(a: &Subspace, b: &Subspace) -> Vec<f64> {
    let c = a.frame().transpose() * b.frame();
    let form = DMatrix::identity(a.dim(), a.dim()) - &c * c.transpose();
    let eig = symmetric_eigen(&form);
    let mut out: Vec<f64> = eig
        .eigenvectors
        .column_iter()
        .map(|u| {
            let v = a.embed(&u.into_owned());
            b.dist(&v).atan2(b.coordinates(&v).norm())
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Extreme angles of `α` against `β` from a dense direction grid on the unit
/// sphere of `α`, polished by pattern search: `(smallest, largest)` of
/// `atan2(dist(v, β), |p_β v|)`. The smallest is the smallest Morgan angle only
/// when `α ∩ β = 0`.
fn rayleigh_grid_extremes(a: &Subspace, b: &Subspace) -> (f64, f64) {
    let dirs = sampling::sphere_points(a.dim(), 2048);
    let angle = |u: &DVector<f64>| {
        let v = a.embed(u);
        b.dist(&v).atan2(b.coordinates(&v).norm())
    };
    let largest = sampling::maximize_on_sphere(&dirs, angle);
    let smallest = -sampling::maximize_on_sphere(&dirs, |u| -angle(u));
    (smallest, largest)
}

/// Principal vectors of `α` against `β` together with their sines.
fn principal_vectors(a: &Subspace, b: &Subspace) -> Vec<(DVector<f64>, f64)> {
    let c = a.frame().transpose() * b.frame();
    let u = svd(&c).u;
    (0..u.ncols().min(a.dim()))
        .map(|i| {
            let v = a.embed(&u.column(i).into_owned());
            let s = b.dist(&v);
            (v, s)
        })
        .collect()
}

pub struct Angles;

impl Campaign for Angles {
    fn name(&self) -> &'static str {
        "angles"
    }

    fn description(&self) -> &'static str {
        "Morgan angles: symmetry, agreement with the distance-form eigenvalues and a Rayleigh-grid search, growth along V⊥ ∩ α"
    }

    fn run_trial(&self, _p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let (a, b) = random_pair(rng)?;
        let ab = morgan_angles(&a, &b)?;
        let ba = morgan_angles(&b, &a)?;
        let mut err: f64 = if ab.len() == ba.len() {
            ab.angles.iter().zip(&ba.angles).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        let oracle = distance_form_angles(&a, &b);
        let padded: Vec<f64> = std::iter::repeat_n(0.0, oracle.len().saturating_sub(ab.len()))
            .chain(ab.angles.iter().copied())
            .collect();
        err = err.max(if oracle.len() == padded.len() {
            oracle.iter().zip(&padded).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        });
        if let (Some(lo), Some(hi)) = (ab.smallest(), ab.largest()) {
            let (grid_lo, grid_hi) = rayleigh_grid_extremes(&a, &b);
            err = err.max((grid_hi - hi).abs());
            if ab.len() == a.dim() {
                err = err.max((grid_lo - lo).abs());
            }
        }
        let (ok, margin) = within(err, 1e-8);
        // |v| sin θ₁ ≤ dist(v, β) on the part of α orthogonal to α ∩ β
        let mut growth = f64::INFINITY;
        if let Some(t1) = ab.smallest() {
            let moving: Vec<DVector<f64>> = principal_vectors(&a, &b)
                .into_iter()
                .filter(|(_, s)| *s > ZERO_ANGLE_TOL)
                .map(|(v, _)| v)
                .collect();
            for _ in 0..8 {
                let g = gaussian_vector(moving.len(), rng);
                let v = moving.iter().zip(g.iter()).fold(DVector::zeros(a.ambient_dim()), |acc, (u, c)| acc + u * *c);
                growth = growth.min(b.dist(&v) - v.norm() * t1.sin() + 1e-12 * v.norm());
            }
        }
        Ok(TrialOutcome::new(ok && growth >= 0.0, margin)
            .metric("angle_error", err)
            .metric("count", ab.len() as f64))
    }
}

pub struct Rotation;

impl Campaign for Rotation {
    fn name(&self) -> &'static str {
        "rotation"
    }

    fn description(&self) -> &'static str {
        "canonical rotation: orthogonality, orientation, α ↦ β, inverse, fixed intersection, basis independence"
    }

    fn run_trial(&self, _p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let (a, b) = loop {
            let (a, b) = random_pair(rng)?;
            if morgan_angles(&a, &b)?.largest().unwrap_or(0.0) < std::f64::consts::FRAC_PI_2 - 1e-3 {
                break (a, b);
            }
        };
        let n = a.ambient_dim();
        let id = DMatrix::<f64>::identity(n, n);
        let r = canonical_rotation(&a, &b)?;
        let orth = (&r * r.transpose() - &id).amax();
        let det = (r.determinant() - 1.0).abs();
        let maps = unit_ball_hausdorff(&a.transformed(&r)?, &b)?;
        let inverse = (&r * canonical_rotation(&b, &a)? - &id).amax();
        let fixed = principal_vectors(&a, &b)
            .iter()
            .filter(|(_, s)| *s < 1e-12)
            .map(|(v, _)| (&r * v - v).norm())
            .fold(0.0, f64::max);
        let k = a.dim();
        let a2 = a.reframed(&random_rotation(k, rng))?;
        let b2 = b.reframed(&random_rotation(k, rng))?;
        let basis = (canonical_rotation(&a2, &b2)? - &r).amax();
        let err = orth.max(det).max(maps).max(inverse).max(fixed).max(basis);
        let (ok, margin) = within(err, 1e-9);
        Ok(TrialOutcome::new(ok, margin)
            .metric("orthogonality", orth)
            .metric("determinant", det)
            .metric("mapping", maps)
            .metric("inverse", inverse)
            .metric("fixed", fixed)
            .metric("basis", basis))
    }
}

pub struct Hausdorff;

impl Campaign for Hausdorff {
    fn name(&self) -> &'static str {
        "hausdorff"
    }

    fn description(&self) -> &'static str {
        "unit-ball Hausdorff distance vs the largest distance-form eigenvalue and a sampled two-sided sup"
    }

    fn run_trial(&self, p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let (a, b) = random_pair(rng)?;
        let h = unit_ball_hausdorff(&a, &b)?;
        let top = distance_form_eigenvalues(&a, &b).last().copied().unwrap_or(0.0);
        let identity = (h - top.clamp(0.0, 1.0).sqrt()).abs();
        let dirs = sampling::sphere_points(a.dim(), p.resolution.max(1));
        let one = sampling::maximize_on_sphere(&dirs, |u| b.dist(&a.embed(u)));
        let two = sampling::maximize_on_sphere(&dirs, |u| a.dist(&b.embed(u)));
        let sampled = one.max(two);
        let ok = identity <= 1e-9 && (sampled - h).abs() <= 1e-6 && sampled <= h + 1e-12;
        Ok(TrialOutcome::new(ok, (1e-6 - (sampled - h).abs()).min(1e-9 - identity))
            .metric("identity_error", identity)
            .metric("sampled_gap", h - sampled))
    }
}

pub struct Sandwich;

impl Campaign for Sandwich {
    fn name(&self) -> &'static str {
        "sandwich"
    }

    fn description(&self) -> &'static str {
        "σ_i/4 ≤ θ_i ≤ 4σ_i for graphs of small maps whose difference has rank 2"
    }

    fn run_trial(&self, _p: &CampaignParams, _trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let m = rng.random_range(2..=4);
        let n = rng.random_range(2..=4);
        let l0 = {
            let g = gaussian_matrix(n, m, rng);
            let norm = svd(&g).singular_values.max();
            g * (0.005 * rng.random::<f64>() / norm)
        };
        let u = random_subspace(n, 2, rng);
        let v = random_subspace(m, 2, rng);
        let mut b = DMatrix::zeros(n, m);
        for i in 0..2 {
            let s = 1e-4 + (2.5e-3 - 1e-4) * rng.random::<f64>();
            b += u.basis_vector(i) * v.basis_vector(i).transpose() * s;
        }
        let l1 = &l0 + &b;
        let l2 = &l0 - &b;
        let (s1, s2) = half_difference_singular_values(&l1, &l2)?;
        let theta = morgan_angles(&Subspace::graph(&l1), &Subspace::graph(&l2))?;
        if theta.len() != 2 {
            return Ok(TrialOutcome::new(false, f64::NEG_INFINITY).metric("angles", theta.len() as f64));
        }
        let r1 = theta.angles[0] / s1;
        let r2 = theta.angles[1] / s2;
        let margin = [r1 - 0.25, 4.0 - r1, r2 - 0.25, 4.0 - r2]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        Ok(TrialOutcome::new(margin >= 0.0, margin)
            .metric("ratio1", r1)
            .metric("ratio2", r2))
    }
}


