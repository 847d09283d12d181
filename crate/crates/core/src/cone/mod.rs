//! Cones made of `N` m-planes through a common (m-2)-dimensional spine.

mod prune;
mod regions;

pub use prune::{
    certify_layers, layer_eta, layer_subdivide, prune, prune_constants, prune_within, Check, GapMatrix,
    LayerCertificate, PruneCertificate,
};
pub use regions::{
    maximizer_bound, separated_region, separated_region_margin, shift_lower_bound, spine_gap_ratio, MaximizerReport,
    SeparatedRegion, ShiftProfile, ShiftReport, SpineGap,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{morgan_angles, unit_ball_hausdorff, Subspace, FRAME_TOL, ZERO_ANGLE_TOL};
use crate::sampling;

/// Default number of sphere samples per plane when comparing cone traces.
pub const DEFAULT_TRACE_RESOLUTION: usize = 1 << 12;

/// A union of `N ≤ Q` distinct m-planes whose pairwise intersections are all
/// the same (m-2)-plane. The planes are linear subspaces translated by a common
/// `origin`, so dilations `x ↦ (x - q)/r` keep the type closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConeJson", into = "ConeJson")]
pub struct PlaneCone {
    m: usize,
    capacity: usize,
    spine: Subspace,
    planes: Vec<Subspace>,
    origin: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct ConeJson {
    m: usize,
    ambient: usize,
    #[serde(rename = "Q")]
    q: usize,
    spine: Subspace,
    planes: Vec<Subspace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Vec<f64>>,
}

impl TryFrom<ConeJson> for PlaneCone {
    type Error = Error;
    fn try_from(j: ConeJson) -> Result<Self> {
        if j.spine.ambient_dim() != j.ambient {
            return Err(Error::DimensionMismatch {
                expected: j.ambient,
                got: j.spine.ambient_dim(),
            });
        }
        let cone = PlaneCone::new(j.m, j.q, j.spine, j.planes)?;
        match j.origin {
            Some(o) => cone.with_origin(DVector::from_vec(o)),
            None => Ok(cone),
        }
    }
}

impl From<PlaneCone> for ConeJson {
    fn from(c: PlaneCone) -> Self {
        let origin = (c.origin.amax() > 0.0).then(|| c.origin.iter().copied().collect());
        ConeJson {
            m: c.m,
            ambient: c.ambient_dim(),
            q: c.capacity,
            spine: c.spine,
            planes: c.planes,
            origin,
        }
    }
}

/// Outcome of a balancedness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    pub balanced: bool,
    /// Largest `θ₂/θ₁` over pairs (1 for a single plane).
    pub worst_ratio: f64,
    pub worst_pair: Option<(usize, usize)>,
}

impl PlaneCone {
    pub fn new(m: usize, capacity: usize, spine: Subspace, planes: Vec<Subspace>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidCone("m must be at least 2".into()));
        }
        if planes.is_empty() || planes.len() > capacity {
            return Err(Error::InvalidCone(format!(
                "need 1 ≤ N ≤ Q, got N = {} and Q = {capacity}",
                planes.len()
            )));
        }
        if spine.dim() != m - 2 {
            return Err(Error::InvalidCone(format!(
                "spine has dimension {}, expected {}",
                spine.dim(),
                m - 2
            )));
        }
        let ambient = spine.ambient_dim();
        for (i, p) in planes.iter().enumerate() {
            if p.ambient_dim() != ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    got: p.ambient_dim(),
                });
            }
            if p.dim() != m {
                return Err(Error::InvalidCone(format!(
                    "plane {i} has dimension {}, expected {m}",
                    p.dim()
                )));
            }
            if !spine.is_subspace_of(p, FRAME_TOL) {
                return Err(Error::InvalidCone(format!("plane {i} does not contain the spine")));
            }
        }
        for i in 0..planes.len() {
            for j in i + 1..planes.len() {
                let spec = morgan_angles(&planes[i], &planes[j])?;
                if spec.largest().map_or(0.0, f64::sin) <= ZERO_ANGLE_TOL {
                    return Err(Error::InvalidCone(format!("planes {i} and {j} coincide")));
                }
                if spec.len() != 2 {
                    return Err(Error::InvalidCone(format!(
                        "planes {i} and {j} meet in a subspace larger than the spine"
                    )));
                }
            }
        }
        Ok(Self {
            m,
            capacity,
            spine,
            planes,
            origin: DVector::zeros(ambient),
        })
    }

    /// The same cone translated so that its vertex sits at `origin`.
    pub fn with_origin(mut self, origin: DVector<f64>) -> Result<Self> {
        if origin.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: origin.len(),
            });
        }
        self.origin = origin;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ambient_dim(&self) -> usize {
        self.spine.ambient_dim()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn spine(&self) -> &Subspace {
        &self.spine
    }

    pub fn planes(&self) -> &[Subspace] {
        &self.planes
    }

    pub fn plane(&self, i: usize) -> &Subspace {
        &self.planes[i]
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }

    pub fn is_linear(&self) -> bool {
        self.origin.amax() == 0.0
    }

    /// `dist(p, S)`.
    pub fn dist(&self, p: &DVector<f64>) -> f64 {
        let x = p - &self.origin;
        self.planes
            .iter()
            .map(|a| a.dist(&x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the translated spine.
    pub fn dist_to_spine(&self, p: &DVector<f64>) -> f64 {
        self.spine.dist(&(p - &self.origin))
    }

    /// Image under `x ↦ (x - q)/r`.
    pub fn dilate(&self, q: &DVector<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::param("dilation radius must be positive"));
        }
        let origin = (&self.origin - q) / r;
        self.clone().with_origin(origin)
    }

    /// Image of a linear cone under an ambient orthogonal map.
    pub fn rotated(&self, rot: &DMatrix<f64>) -> Result<Self> {
        let spine = self.spine.transformed(rot)?;
        let planes = self
            .planes
            .iter()
            .map(|p| p.transformed(rot))
            .collect::<Result<Vec<_>>>()?;
        let origin = rot * &self.origin;
        PlaneCone::new(self.m, self.capacity, spine, planes)?.with_origin(origin)
    }

    /// The cone formed by the planes with the given indices.
    pub fn sub_cone(&self, indices: &[usize]) -> Result<Self> {
        let planes = indices.iter().map(|&i| self.planes[i].clone()).collect();
        PlaneCone::new(self.m, self.capacity, self.spine.clone(), planes)?
            .with_origin(self.origin.clone())
    }

    /// Pairwise unit-ball Hausdorff distances between the planes.
    pub fn gap_matrix(&self) -> GapMatrix {
        let n = self.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let h = unit_ball_hausdorff(&self.planes[i], &self.planes[j])
                    .expect("planes of a cone share dimensions");
                g[(i, j)] = h;
                g[(j, i)] = h;
            }
        }
        GapMatrix::from_matrix_unchecked(g)
    }

    /// `σ(S)`: the smallest pairwise unit-ball distance.
    pub fn sigma(&self) -> Result<f64> {
        Ok(self.sigma_mu()?.0)
    }

    /// `μ(S)`: the largest pairwise unit-ball distance.
    pub fn mu(&self) -> Result<f64> {
        Ok(self.sigma_mu()?.1)
    }

    pub fn sigma_mu(&self) -> Result<(f64, f64)> {
        if self.len() < 2 {
            return Err(Error::SinglePlane);
        }
        let g = self.gap_matrix();
        Ok((g.min_gap(&g.all()), g.max_gap(&g.all())))
    }

    /// Checks `θ₂ ≤ M θ₁` on every pair of planes.
    pub fn is_balanced(&self, big_m: f64) -> Balance {
        let mut worst_ratio = 1.0;
        let mut worst_pair = None;
        let mut balanced = true;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let spec = morgan_angles(&self.planes[i], &self.planes[j])
                    .expect("planes of a cone share dimensions");
                let (t1, t2) = (spec.angles[0], spec.angles[1]);
                balanced &= t2 <= big_m * t1 + 1e-12;
                let ratio = t2 / t1;
                if worst_pair.is_none() || ratio > worst_ratio {
                    worst_ratio = ratio;
                    worst_pair = Some((i, j));
                }
            }
        }
        Balance {
            balanced,
            worst_ratio,
            worst_pair,
        }
    }

    /// `min_i dist(S ∩ B₁, α_i ∩ B₁)`, which equals `min_i max_j h(α_i, α_j)`
    /// because every point of the unit ball projects into the unit ball.
    pub fn min_trace_to_plane(&self) -> f64 {
        let g = self.gap_matrix();
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| g.get(i, j)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `sup { dist(x, T ∩ B₁) : x ∈ S ∩ B₁ }` for linear cones, maximized over a
/// low-discrepancy sample of each plane's unit sphere and then polished by a
/// local search. The distance is 1-homogeneous in `x`, so the sup over the
/// ball is attained on the sphere.
fn one_sided_trace(s: &PlaneCone, t: &PlaneCone, resolution: usize) -> f64 {
    let dirs = sampling::sphere_points(s.m, resolution);
    let mut best = 0.0f64;
    for a in s.planes() {
        let f = |c: &DVector<f64>| {
            let x = a.embed(c);
            t.planes().iter().map(|b| b.dist(&x)).fold(f64::INFINITY, f64::min)
        };
        best = best.max(sampling::maximize_on_sphere(&dirs, f));
    }
    best
}

/// Two-sided Hausdorff distance between the traces `S ∩ B₁` and `T ∩ B₁` of two
/// linear cones. Exact when both consist of a single plane.
pub fn trace_hausdorff(s: &PlaneCone, t: &PlaneCone, resolution: usize) -> Result<f64> {
    if s.ambient_dim() != t.ambient_dim() || s.m() != t.m() {
        return Err(Error::DimensionMismatch {
            expected: s.ambient_dim(),
            got: t.ambient_dim(),
        });
    }
    if !s.is_linear() || !t.is_linear() {
        return Err(Error::InvalidCone("trace distance needs cones with vertex 0".into()));
    }
    if s.len() == 1 && t.len() == 1 {
        return unit_ball_hausdorff(s.plane(0), t.plane(0));
    }
    Ok(one_sided_trace(s, t, resolution).max(one_sided_trace(t, s, resolution)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::isoclinic_plane;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};

    fn isoclinic_cone(ts: &[f64]) -> PlaneCone {
        let planes = ts.iter().map(|&t| isoclinic_plane(t)).collect();
        PlaneCone::new(2, 4, Subspace::zero(4), planes).unwrap()
    }

    #[test]
    fn three_isoclinic_planes() {
        let c = isoclinic_cone(&[0.0, FRAC_PI_6, FRAC_PI_3]);
        let (s, m) = c.sigma_mu().unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert!((m - FRAC_PI_3.sin()).abs() < 1e-12);
        let b = c.is_balanced(1.0);
        assert!(b.balanced && (b.worst_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_planes_have_equal_sigma_and_mu() {
        let c = isoclinic_cone(&[0.0, 0.3]);
        let (s, m) = c.sigma_mu().unwrap();
        assert_eq!(s, m);
    }

    #[test]
    fn single_plane_cone() {
        let c = isoclinic_cone(&[0.0]);
        assert_eq!(c.sigma(), Err(Error::SinglePlane));
        let b = c.is_balanced(1.0);
        assert!(b.balanced && b.worst_ratio == 1.0);
    }

    #[test]
    fn dilation_keeps_sigma_mu_and_moves_vertex() {
        let c = isoclinic_cone(&[0.0, 0.2, 0.7]);
        let q = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.05]);
        let d = c.dilate(&q, 0.25).unwrap();
        assert_eq!(c.sigma_mu().unwrap(), d.sigma_mu().unwrap());
        let p = DVector::from_vec(vec![0.4, 0.1, -0.3, 0.2]);
        let image = (&p - &q) / 0.25;
        assert!((d.dist(&image) - c.dist(&p) / 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_coincident_and_overlapping_planes() {
        let a = isoclinic_plane(0.2);
        let r = PlaneCone::new(2, 4, Subspace::zero(4), vec![a.clone(), a]);
        assert!(matches!(r, Err(Error::InvalidCone(_))));
        // two coordinate 2-planes in R^4 sharing a line
        let p = Subspace::coordinate(4, &[0, 1]);
        let q = Subspace::coordinate(4, &[0, 2]);
        let r = PlaneCone::new(2, 4, Subspace::zero(4), vec![p, q]);
        assert!(matches!(r, Err(Error::InvalidCone(_))));
    }

    #[test]
    fn trace_distance_of_single_planes_is_exact() {
        let a = isoclinic_cone(&[0.0]);
        let b = isoclinic_cone(&[0.4]);
        let d = trace_hausdorff(&a, &b, 16).unwrap();
        assert!((d - 0.4f64.sin()).abs() < 1e-12);
        let ab = isoclinic_cone(&[0.0, 0.4]);
        assert!(trace_hausdorff(&ab, &ab, 64).unwrap() < 1e-14);
        let d = trace_hausdorff(&ab, &a, 256).unwrap();
        assert!((d - 0.4f64.sin()).abs() < 1e-9);
        assert!((ab.min_trace_to_plane() - 0.4f64.sin()).abs() < 1e-12);
    }
}
