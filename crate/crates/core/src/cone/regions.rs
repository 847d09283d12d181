//! Quantities attached to cones whose constants are only known to exist:
//! separated regions on a plane, spine alignment, and lower bounds for the
//! distance to a shifted cone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{trace_hausdorff, PlaneCone};
use crate::error::{Error, Result};
use crate::geometry::{unit_ball_hausdorff, Subspace, ZERO_ANGLE_TOL};
use crate::sampling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedRegion {
    /// Point of `α ∩ ∂B_{1/2}`.
    pub xi: Vec<f64>,
    pub c: f64,
    /// `min_i dist(α ∩ B₁, β_i ∩ B₁)`.
    pub min_gap: f64,
    /// Top eigenvectors of `v ↦ dist²(v, β_i)` on `α`, in ambient coordinates.
    pub directions: Vec<Vec<f64>>,
}

/// Unit eigenvector of the largest eigenvalue of `v ↦ dist²(v, β)` on `α`.
fn top_direction(alpha: &Subspace, beta: &Subspace) -> DVector<f64> {
    let c = alpha.frame().transpose() * beta.frame();
    let form = DMatrix::identity(alpha.dim(), alpha.dim()) - &c * c.transpose();
    let eig = crate::geometry::symmetric_eigen(&form);
    let top = eig.eigenvalues.imax();
    alpha.embed(&eig.eigenvectors.column(top).into_owned())
}

/// Searches `α ∩ ∂B_{1/2}` (over `resolution` well-spread directions) for the
/// point `ξ` maximizing `min_i |ξ · e_i|`, where `e_i` are the top eigenvectors
/// of the squared-distance forms. With `c = min_i |ξ · e_i| / 2` every `ζ` in
/// `B_c(ξ) ∩ α` then satisfies `min_i dist(ζ, β_i) ≥ c min_i h(α, β_i)`.
pub fn separated_region(alpha: &Subspace, betas: &[Subspace], resolution: usize) -> Result<SeparatedRegion> {
    if betas.is_empty() {
        return Err(Error::param("need at least one comparison plane"));
    }
    let mut min_gap = f64::INFINITY;
    let mut dirs = Vec::with_capacity(betas.len());
    for (i, b) in betas.iter().enumerate() {
        let h = unit_ball_hausdorff(alpha, b)?;
        if h <= ZERO_ANGLE_TOL {
            return Err(Error::param(format!("plane {i} coincides with α")));
        }
        min_gap = min_gap.min(h);
        dirs.push(top_direction(alpha, b));
    }
    let coords: Vec<DVector<f64>> = dirs.iter().map(|e| alpha.coordinates(e)).collect();
    let score = |u: &DVector<f64>| coords.iter().map(|e| e.dot(u).abs()).fold(f64::INFINITY, f64::min);
    let candidates = sampling::sphere_points(alpha.dim(), resolution.max(1));
    let best = candidates
        .iter()
        .max_by(|a, b| score(a).total_cmp(&score(b)))
        .expect("at least one candidate")
        .clone();
    let xi = alpha.embed(&best) * 0.5;
    let c = score(&best) * 0.25;
    Ok(SeparatedRegion {
        xi: xi.iter().copied().collect(),
        c,
        min_gap,
        directions: dirs.iter().map(|e| e.iter().copied().collect()).collect(),
    })
}

/// Smallest value of `min_i dist(ζ, β_i) - c · min_gap` over `samples` points
/// `ζ` filling `B_c(ξ) ∩ α`; nonnegative when the region is certified.
pub fn separated_region_margin(
    alpha: &Subspace,
    betas: &[Subspace],
    region: &SeparatedRegion,
    samples: usize,
) -> f64 {
    let xi = DVector::from_column_slice(&region.xi);
    sampling::ball_points(alpha.dim(), samples)
        .iter()
        .map(|u| {
            let z = &xi + alpha.embed(u) * region.c;
            let d = betas.iter().map(|b| b.dist(&z)).fold(f64::INFINITY, f64::min);
            d - region.c * region.min_gap
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineGap {
    /// `dist(V(S) ∩ B₁, V(S′) ∩ B₁)`.
    pub lhs: f64,
    /// `dist(S ∩ B₁, S′ ∩ B₁) / min_i dist(S ∩ B₁, α_i ∩ B₁)`.
    pub rhs_core: f64,
    pub trace_distance: f64,
    pub min_trace_to_plane: f64,
}

impl SpineGap {
    /// `lhs / rhs_core`, or 0 when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs_core
        }
    }
}

/// Both sides of the spine alignment estimate for an `M`-balanced cone `s`
/// and an arbitrary cone `t` of the same kind.
pub fn spine_gap_ratio(s: &PlaneCone, t: &PlaneCone, big_m: f64, resolution: usize) -> Result<SpineGap> {
    if s.len() < 2 || t.len() < 2 {
        return Err(Error::SinglePlane);
    }
    let bal = s.is_balanced(big_m);
    if !bal.balanced {
        return Err(Error::InvalidCone(format!(
            "cone is not {big_m}-balanced (worst ratio {})",
            bal.worst_ratio
        )));
    }
    let lhs = if s.m() == 2 {
        0.0
    } else {
        unit_ball_hausdorff(s.spine(), t.spine())?
    };
    let trace_distance = trace_hausdorff(s, t, resolution)?;
    let min_trace_to_plane = s.min_trace_to_plane();
    Ok(SpineGap {
        lhs,
        rhs_core: trace_distance / min_trace_to_plane,
        trace_distance,
        min_trace_to_plane,
    })
}

/// A region `{|p_V(x)| < spine_radius, inner < |p_{V⊥}(x)| < outer, |x| < 1}`,
/// invariant under rotations fixing the spine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftProfile {
    pub spine_radius: f64,
    pub inner: f64,
    pub outer: f64,
}

impl Default for ShiftProfile {
    fn default() -> Self {
        Self {
            spine_radius: 0.5,
            inner: 0.25,
            outer: 0.75,
        }
    }
}

impl ShiftProfile {
    fn validate(&self) -> Result<()> {
        let ok = self.spine_radius > 0.0
            && self.inner >= 0.0
            && self.inner < self.outer
            && self.outer <= 1.0
            && self.inner * self.inner < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::param("profile needs 0 ≤ inner < outer ≤ 1 and a positive spine radius"))
        }
    }

    /// Coordinates `(v, w) ∈ R^{m-2} × R²` of deterministic points filling the
    /// profile, together with the measure of one plane's slice.
    fn slice_samples(&self, m: usize, count: usize) -> (Vec<(DVector<f64>, DVector<f64>)>, f64) {
        let k = m - 2;
        let mut pts = Vec::with_capacity(count);
        let mut tried = 0u64;
        let area = std::f64::consts::PI * (self.outer.powi(2) - self.inner.powi(2));
        let box_vol = (2.0 * self.spine_radius).powi(k as i32);
        while pts.len() < count && tried < 64 * count as u64 + 64 {
            tried += 1;
            let u = sampling::halton(tried, m);
            let t = 2.0 * std::f64::consts::PI * u[0];
            let r = (self.inner.powi(2) + u[1] * (self.outer.powi(2) - self.inner.powi(2))).sqrt();
            let w = DVector::from_vec(vec![r * t.cos(), r * t.sin()]);
            let v = DVector::from_iterator(k, u[2..].iter().map(|x| (2.0 * x - 1.0) * self.spine_radius));
            if v.norm() < self.spine_radius && v.norm_squared() + r * r < 1.0 {
                pts.push((v, w));
            }
        }
        let measure = area * box_vol * pts.len() as f64 / tried as f64;
        (pts, measure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    /// `|p⊥_{α₁}(q)| + μ(S) |p_{V⊥∩α₁}(q)|`.
    pub lhs: f64,
    /// For each plane, the `fraction`-quantile of `lhs / dist(z, q + S)` over
    /// its slice of the profile: the least `C̄` for which that plane carries a
    /// set of relative measure `fraction` where the bound holds.
    pub plane_constants: Vec<f64>,
    /// `min_j plane_constants[j]`.
    pub calibrated: f64,
    pub best_plane: usize,
    /// For each candidate `C̄`, the largest relative measure of a plane slice
    /// on which `lhs ≤ C̄ dist(z, q + S)`.
    pub candidate_fractions: Vec<(f64, f64)>,
    /// Measure estimate of one plane's slice of the profile.
    pub slice_measure: f64,
    pub maximizer: MaximizerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizerReport {
    pub lhs: f64,
    /// `max_i |p⊥_{α_i}(q)|`.
    pub max_perp: f64,
    pub argmax: usize,
    /// `lhs / (M · max_perp)`, the constant `C₀` needed for this instance.
    pub needed_constant: f64,
    /// `max_i |p⊥_{α_i}(q)| ≥ |p⊥_{α₁}(q)|`.
    pub ordering_ok: bool,
}

fn shift_lhs(s: &PlaneCone, q: &DVector<f64>) -> Result<f64> {
    let a1 = s.plane(0);
    let perp = a1.dist(q);
    let mu = s.mu()?;
    let inplane = a1.relative_complement(s.spine())?;
    Ok(perp + mu * inplane.parallel(q).norm())
}

/// Both sides of the dominant-projection estimate at `q`.
pub fn maximizer_bound(s: &PlaneCone, q: &DVector<f64>, big_m: f64) -> Result<MaximizerReport> {
    let lhs = shift_lhs(s, q)?;
    let perps: Vec<f64> = s.planes().iter().map(|a| a.dist(q)).collect();
    let (argmax, max_perp) = perps
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc });
    let needed_constant = if lhs == 0.0 { 0.0 } else { lhs / (big_m * max_perp) };
    Ok(MaximizerReport {
        lhs,
        max_perp,
        argmax,
        needed_constant,
        ordering_ok: max_perp >= perps[0],
    })
}

/// Lower bounds for `dist(z, q + S)` over the profile `U` on each plane.
pub fn shift_lower_bound(
    s: &PlaneCone,
    q: &DVector<f64>,
    profile: &ShiftProfile,
    big_m: f64,
    fraction: f64,
    candidates: &[f64],
    samples: usize,
) -> Result<ShiftReport> {
    if q.len() != s.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: s.ambient_dim(),
            got: q.len(),
        });
    }
    if q.norm() > 0.5 {
        return Err(Error::param("q must lie in the closed ball of radius 1/2"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param("fraction must lie in (0, 1]"));
    }
    if !s.is_linear() {
        return Err(Error::InvalidCone("cone must have its vertex at 0".into()));
    }
    profile.validate()?;
    let maximizer = maximizer_bound(s, q, big_m)?;
    let lhs = maximizer.lhs;
    let (coords, slice_measure) = profile.slice_samples(s.m(), samples);
    let shifted = s.clone().with_origin(q.clone())?;
    let mut plane_constants = Vec::with_capacity(s.len());
    let mut ratios_per_plane = Vec::with_capacity(s.len());
    for a in s.planes() {
        let w = a.relative_complement(s.spine())?;
        let mut ratios: Vec<f64> = coords
            .iter()
            .map(|(v, u)| {
                let z = s.spine().embed(v) + w.embed(u);
                let d = shifted.dist(&z);
                if lhs == 0.0 {
                    0.0
                } else if d == 0.0 {
                    f64::INFINITY
                } else {
                    lhs / d
                }
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        let k = ((fraction * ratios.len() as f64).ceil() as usize).clamp(1, ratios.len());
        plane_constants.push(ratios[k - 1]);
        ratios_per_plane.push(ratios);
    }
    let (best_plane, calibrated) = plane_constants
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc });
    let candidate_fractions = candidates
        .iter()
        .map(|&cbar| {
            let best = ratios_per_plane
                .iter()
                .map(|r| r.partition_point(|&x| x <= cbar) as f64 / r.len() as f64)
                .fold(0.0, f64::max);
            (cbar, best)
        })
        .collect();
    Ok(ShiftReport {
        lhs,
        plane_constants,
        calibrated,
        best_plane,
        candidate_fractions,
        slice_measure,
        maximizer,
    })
}
