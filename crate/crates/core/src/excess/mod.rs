//! Weighted point clouds standing in for the mass of a surface, and the L²
//! height and tilt excess functionals measured on them.

mod io;
mod synth;

pub use io::{read_current, write_current, BodyFormat};
pub use synth::{synth_cone_sample, SynthParams};

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone::PlaneCone;
use crate::error::{Error, Result};
use crate::geometry::{orthonormalize, AffinePlane, Subspace, FRAME_TOL};
use crate::sampling;

/// Default relative radius of the spine tube removed in the reverse excess.
pub const DEFAULT_SPINE_CUTOFF: f64 = 1.0 / 16.0;
/// Default number of quadrature points per plane in the reverse excess.
pub const DEFAULT_RESOLUTION: usize = 1 << 12;

/// Volume of the unit ball of `R^m`.
pub fn unit_ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / m as f64 * unit_ball_volume(m - 2),
    }
}

/// An oriented tangent m-frame attached to a sample: orthonormal columns and an
/// orientation sign (±1) relative to the column order.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub frame: DMatrix<f64>,
    pub sign: f64,
}

/// A weighted point cloud in `R^ambient` representing an m-dimensional mass
/// distribution, optionally with oriented tangent planes at every point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurrent {
    ambient: usize,
    m: usize,
    points: Vec<DVector<f64>>,
    weights: Vec<f64>,
    frames: Option<Vec<TangentFrame>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub radius: f64,
}

impl SampledCurrent {
    pub fn new(
        ambient: usize,
        m: usize,
        points: Vec<DVector<f64>>,
        weights: Vec<f64>,
        frames: Option<Vec<TangentFrame>>,
    ) -> Result<Self> {
        if m == 0 || m > ambient {
            return Err(Error::InvalidCurrent(format!("dimension {m} invalid in R^{ambient}")));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidCurrent("points and weights differ in length".into()));
        }
        for p in &points {
            if p.len() != ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidCurrent("non-finite coordinate".into()));
            }
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidCurrent("weights must be finite and nonnegative".into()));
        }
        if let Some(fr) = &frames {
            if fr.len() != points.len() {
                return Err(Error::InvalidCurrent("frames must be given for all points or none".into()));
            }
            for f in fr {
                if f.frame.shape() != (ambient, m) {
                    return Err(Error::InvalidCurrent("frame has the wrong shape".into()));
                }
                let dev = (f.frame.transpose() * &f.frame - DMatrix::identity(m, m)).amax();
                if dev > FRAME_TOL {
                    return Err(Error::InvalidCurrent(format!("frame not orthonormal ({dev:e})")));
                }
                if f.sign != 1.0 && f.sign != -1.0 {
                    return Err(Error::InvalidCurrent("orientation sign must be ±1".into()));
                }
            }
        }
        Ok(Self {
            ambient,
            m,
            points,
            weights,
            frames,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn frames(&self) -> Option<&[TangentFrame]> {
        self.frames.as_deref()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Indices of samples strictly inside `B_r(q)`.
    pub fn in_ball(&self, q: &DVector<f64>, r: f64) -> impl Iterator<Item = usize> + '_ {
        let q = q.clone();
        (0..self.len()).filter(move |&i| (&self.points[i] - &q).norm() < r)
    }

    pub fn mass_in_ball(&self, q: &DVector<f64>, r: f64) -> f64 {
        self.in_ball(q, r).map(|i| self.weights[i]).sum()
    }

    /// Push-forward under `x ↦ (x - q)/r`: weights scale by `r^{-m}`, frames
    /// are unchanged.
    pub fn rescale(&self, q: &DVector<f64>, r: f64) -> Result<Self> {
        check_radius(r)?;
        check_point(self.ambient, q)?;
        let scale = r.powi(-(self.m as i32));
        Ok(Self {
            ambient: self.ambient,
            m: self.m,
            points: self.points.iter().map(|p| (p - q) / r).collect(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
            frames: self.frames.clone(),
        })
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::param("radius must be positive"))
    }
}

fn check_point(ambient: usize, q: &DVector<f64>) -> Result<()> {
    if q.len() != ambient {
        return Err(Error::DimensionMismatch {
            expected: ambient,
            got: q.len(),
        });
    }
    Ok(())
}

/// `min_i dist(p, P_i)` over a list of affine planes.
pub fn dist_to_planes(p: &DVector<f64>, planes: &[AffinePlane]) -> Result<f64> {
    if planes.is_empty() {
        return Err(Error::InvalidCone("empty plane list".into()));
    }
    let mut best = f64::INFINITY;
    for a in planes {
        check_point(a.base().ambient_dim(), p)?;
        best = best.min(a.dist(p));
    }
    Ok(best)
}

pub fn dist_to_cone(p: &DVector<f64>, s: &PlaneCone) -> Result<f64> {
    check_point(s.ambient_dim(), p)?;
    Ok(s.dist(p))
}

/// `r^{-(m+2)} Σ_{|p_i - q| < r} w_i dist²(p_i, S)`.
pub fn one_sided_excess(t: &SampledCurrent, s: &PlaneCone, q: &DVector<f64>, r: f64) -> Result<f64> {
    check_radius(r)?;
    check_point(s.ambient_dim(), q)?;
    check_point(t.ambient, q)?;
    let sum: f64 = t
        .in_ball(q, r)
        .map(|i| t.weights[i] * s.dist(&t.points[i]).powi(2))
        .sum();
    Ok(sum / r.powi(s.m() as i32 + 2))
}

/// One-sided excess against an arbitrary union of affine planes.
pub fn one_sided_excess_planes(
    t: &SampledCurrent,
    planes: &[AffinePlane],
    q: &DVector<f64>,
    r: f64,
) -> Result<f64> {
    check_radius(r)?;
    check_point(t.ambient, q)?;
    let mut sum = 0.0;
    for i in t.in_ball(q, r) {
        sum += t.weights[i] * dist_to_planes(&t.points[i], planes)?.powi(2);
    }
    Ok(sum / r.powi(t.m as i32 + 2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseExcess {
    pub value: f64,
    /// Largest distance from a quadrature point to its nearest sample.
    pub max_nearest: f64,
    /// Quadrature estimate of `H^m(B_r(q) ∩ S \ B_{ar}(V))`.
    pub region_measure: f64,
    /// `max_nearest² · region_measure / r^{m+2}`, an upper bound for `value`.
    pub mesh_bound: f64,
    pub quadrature_points: usize,
}

/// `r^{-(m+2)} ∫_{B_r(q) ∩ S \ B_{ar}(V)} dist²(x, spt T) dH^m`, with the
/// integral replaced by a fixed low-discrepancy quadrature of each plane's
/// disk and `dist(x, spt T)` by the distance to the nearest sample of positive
/// weight.
pub fn reverse_excess(
    s: &PlaneCone,
    t: &SampledCurrent,
    q: &DVector<f64>,
    r: f64,
    a: f64,
    resolution: usize,
) -> Result<ReverseExcess> {
    check_radius(r)?;
    check_point(s.ambient_dim(), q)?;
    check_point(t.ambient, q)?;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::param("spine cutoff a must lie in (0, 1)"));
    }
    if resolution == 0 {
        return Err(Error::param("resolution must be positive"));
    }
    let mut tree = KdTree::with_capacity(t.ambient, t.len());
    for (i, p) in t.points.iter().enumerate() {
        if t.weights[i] > 0.0 {
            tree.add(p.as_slice().to_vec(), i)
                .map_err(|e| Error::InvalidCurrent(format!("{e:?}")))?;
        }
    }
    if tree.size() == 0 {
        return Err(Error::InvalidCurrent("current has no sample of positive weight".into()));
    }
    let m = s.m();
    let unit = sampling::ball_points(m, resolution);
    let omega = unit_ball_volume(m);
    let mut sum = 0.0;
    let mut measure = 0.0;
    let mut max_nearest = 0.0f64;
    let mut used = 0;
    for alpha in s.planes() {
        let rel = q - s.origin();
        let h = alpha.dist(&rel);
        if h >= r {
            continue;
        }
        let rho = (r * r - h * h).sqrt();
        let center = s.origin() + alpha.parallel(&rel);
        let w = omega * rho.powi(m as i32) / resolution as f64;
        for u in &unit {
            let x = &center + alpha.embed(&(u * rho));
            if s.dist_to_spine(&x) < a * r {
                continue;
            }
            let nearest = tree
                .nearest(x.as_slice(), 1, &squared_euclidean)
                .map_err(|e| Error::InvalidCurrent(format!("{e:?}")))?;
            let d2 = nearest[0].0;
            sum += w * d2;
            measure += w;
            max_nearest = max_nearest.max(d2.sqrt());
            used += 1;
        }
    }
    let norm = r.powi(m as i32 + 2);
    Ok(ReverseExcess {
        value: sum / norm,
        max_nearest,
        region_measure: measure,
        mesh_bound: max_nearest * max_nearest * measure / norm,
        quadrature_points: used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedExcess {
    pub one_sided: f64,
    pub reverse: ReverseExcess,
    pub value: f64,
}

pub fn two_sided_excess(
    t: &SampledCurrent,
    s: &PlaneCone,
    q: &DVector<f64>,
    r: f64,
    a: f64,
    resolution: usize,
) -> Result<TwoSidedExcess> {
    let one_sided = one_sided_excess(t, s, q, r)?;
    let reverse = reverse_excess(s, t, q, r, a, resolution)?;
    Ok(TwoSidedExcess {
        one_sided,
        value: one_sided + reverse.value,
        reverse,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarExcess {
    pub value: f64,
    pub plane: AffinePlane,
    /// Eigenvalues of the weighted second-moment matrix, descending.
    pub spectrum: Vec<f64>,
}

/// Best-fitting m-plane through `q` for the in-ball mass (weighted principal
/// components of `p_i - q`) and its one-sided excess.
pub fn planar_excess(t: &SampledCurrent, q: &DVector<f64>, r: f64, m: usize) -> Result<PlanarExcess> {
    check_radius(r)?;
    check_point(t.ambient, q)?;
    if m == 0 || m > t.ambient {
        return Err(Error::param("plane dimension out of range"));
    }
    let idx: Vec<usize> = t.in_ball(q, r).filter(|&i| t.weights[i] > 0.0).collect();
    if idx.len() < m {
        return Err(Error::RankDeficient {
            needed: m,
            got: idx.len(),
        });
    }
    let n = t.ambient;
    let mut moment = DMatrix::zeros(n, n);
    for &i in &idx {
        let d = &t.points[i] - q;
        moment.ger(t.weights[i], &d, &d, 1.0);
    }
    let eig = crate::geometry::symmetric_eigen(&moment);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let cols: Vec<DVector<f64>> = order[..m]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();
    let basis = orthonormalize(n, &cols)?;
    if basis.len() < m {
        return Err(Error::RankDeficient {
            needed: m,
            got: basis.len(),
        });
    }
    let mut frame = DMatrix::zeros(n, m);
    for (j, c) in basis.iter().enumerate() {
        frame.set_column(j, c);
    }
    let base = Subspace::from_orthonormal(frame)?;
    let plane = AffinePlane::new(base, q.clone())?;
    let value = one_sided_excess_planes(t, std::slice::from_ref(&plane), q, r)?;
    Ok(PlanarExcess {
        value,
        plane,
        spectrum: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
    })
}

/// `|S⃗ - π⃗|²` for unit simple m-vectors given by oriented frames.
pub fn oriented_tilt(a: &TangentFrame, pi: &Subspace, pi_sign: f64) -> f64 {
    let g = a.frame.transpose() * pi.frame();
    (2.0 - 2.0 * a.sign * pi_sign * g.determinant()).max(0.0)
}

/// `|p_S - p_π|²` (Frobenius) for the underlying unoriented planes.
pub fn nonoriented_tilt(a: &TangentFrame, pi: &Subspace) -> f64 {
    let g = a.frame.transpose() * pi.frame();
    (2.0 * pi.dim() as f64 - 2.0 * g.norm_squared()).max(0.0)
}

/// Cylinder `{x : |p_π(x - center)| < r}` over an m-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub center: DVector<f64>,
    pub radius: f64,
    pub axis: Subspace,
}

impl Cylinder {
    pub fn new(center: DVector<f64>, radius: f64, axis: Subspace) -> Result<Self> {
        check_radius(radius)?;
        check_point(axis.ambient_dim(), &center)?;
        Ok(Self {
            center,
            radius,
            axis,
        })
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.axis.parallel(&(x - &self.center)).norm() < self.radius
    }
}

fn tilt_sum<F: Fn(&TangentFrame) -> f64>(t: &SampledCurrent, c: &Cylinder, f: F) -> Result<f64> {
    let frames = t.frames.as_ref().ok_or(Error::MissingFrames)?;
    check_point(t.ambient, &c.center)?;
    let m = c.axis.dim();
    if m != t.m {
        return Err(Error::UnequalDims(t.m, m));
    }
    let mut sum = 0.0;
    for (i, p) in t.points.iter().enumerate() {
        if c.contains(p) {
            sum += t.weights[i] * f(&frames[i]);
        }
    }
    Ok(sum / (2.0 * unit_ball_volume(m) * c.radius.powi(m as i32)))
}

/// `(2 ω_m r^m)^{-1} Σ_{x_i ∈ C} w_i |T⃗(x_i) - π⃗|²`, with `π` oriented by its
/// frame order times `pi_sign`.
pub fn tilt_excess_oriented(t: &SampledCurrent, c: &Cylinder, pi: &Subspace, pi_sign: f64) -> Result<f64> {
    if pi.dim() != t.m {
        return Err(Error::UnequalDims(t.m, pi.dim()));
    }
    tilt_sum(t, c, |f| oriented_tilt(f, pi, pi_sign))
}

/// `(2 ω_m r^m)^{-1} Σ_{x_i ∈ C} w_i |p_{T(x_i)} - p_π|²`.
pub fn tilt_excess_nonoriented(t: &SampledCurrent, c: &Cylinder, pi: &Subspace) -> Result<f64> {
    if pi.dim() != t.m {
        return Err(Error::UnequalDims(t.m, pi.dim()));
    }
    tilt_sum(t, c, |f| nonoriented_tilt(f, pi))
}

/// Pointwise constant with `|p_S - p_π|² ≤ C |S⃗ - π⃗|²` for m-planes.
pub fn tilt_comparison_constant(m: usize) -> f64 {
    2.0 * m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn axes_cone() -> PlaneCone {
        // two lines in R² meeting at 0 (m = 2 would need R⁴; use m = 2 planes in R⁴)
        let a = Subspace::coordinate(4, &[0, 1]);
        let b = Subspace::coordinate(4, &[2, 3]);
        PlaneCone::new(2, 2, Subspace::zero(4), vec![a, b]).unwrap()
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn distance_to_axes() {
        let x = AffinePlane::linear(Subspace::coordinate(2, &[0]));
        let y = AffinePlane::linear(Subspace::coordinate(2, &[1]));
        assert_eq!(dist_to_planes(&v(&[3.0, 4.0]), &[x, y]).unwrap(), 3.0);
        assert!(dist_to_planes(&v(&[3.0, 4.0]), &[]).is_err());
    }

    #[test]
    fn one_sided_single_sample() {
        let cone = axes_cone();
        let p = v(&[0.1, 0.0, 0.0, 0.0]) + v(&[0.0, 0.0, 0.0, 0.0]);
        let t = SampledCurrent::new(4, 2, vec![v(&[0.2, 0.1, 0.3, 0.0])], vec![2.0], None).unwrap();
        let d = cone.dist(&t.points()[0]);
        let e = one_sided_excess(&t, &cone, &p.map(|_| 0.0), 0.5).unwrap();
        assert!((e - 2.0 * d * d / 0.5f64.powi(4)).abs() < 1e-12);
        // boundary is excluded
        let e = one_sided_excess(&t, &cone, &DVector::zeros(4), t.points()[0].norm()).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn rescale_identity() {
        let t = SampledCurrent::new(4, 2, vec![v(&[0.2, 0.1, 0.3, 0.0])], vec![2.0], None).unwrap();
        let q = DVector::zeros(4);
        assert_eq!(t.rescale(&q, 1.0).unwrap(), t);
        let q = v(&[0.1, 0.0, 0.2, 0.0]);
        let s = t.rescale(&q, 0.5).unwrap();
        assert!((s.mass_in_ball(&DVector::zeros(4), 1.0) - 4.0 * t.mass_in_ball(&q, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn planar_on_two_axes() {
        // m = 1 lines in R², equal mass on both axes
        let mut pts = Vec::new();
        for &s in &[0.2, 0.4, -0.3, -0.5] {
            pts.push(v(&[s, 0.0]));
            pts.push(v(&[0.0, s]));
        }
        let w = vec![0.5; pts.len()];
        let t = SampledCurrent::new(2, 1, pts, w, None).unwrap();
        let r = 1.0;
        let pe = planar_excess(&t, &DVector::zeros(2), r, 1).unwrap();
        let second: f64 = [0.2f64, 0.4, -0.3, -0.5].iter().map(|s| 0.5 * s * s).sum();
        assert!((pe.value - second / r.powi(3)).abs() < 1e-14);
        let dir = pe.plane.base().basis_vector(0);
        assert!(dir[0].abs() == 1.0 || dir[1].abs() == 1.0);
    }

    #[test]
    fn planar_needs_enough_samples() {
        let t = SampledCurrent::new(3, 2, vec![v(&[0.1, 0.0, 0.0])], vec![1.0], None).unwrap();
        assert!(matches!(
            planar_excess(&t, &DVector::zeros(3), 1.0, 2),
            Err(Error::RankDeficient { .. })
        ));
    }

    fn frame_of(cols: &[DVector<f64>], sign: f64) -> TangentFrame {
        let mut f = DMatrix::zeros(cols[0].len(), cols.len());
        for (j, c) in cols.iter().enumerate() {
            f.set_column(j, c);
        }
        TangentFrame { frame: f, sign }
    }

    #[test]
    fn tilt_orientation_dichotomy_and_rotation() {
        let pi = Subspace::coordinate(3, &[0, 1]);
        let same = frame_of(&[v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])], 1.0);
        let flipped = TangentFrame { sign: -1.0, ..same.clone() };
        assert_eq!(oriented_tilt(&same, &pi, 1.0), 0.0);
        assert_eq!(oriented_tilt(&flipped, &pi, 1.0), 4.0);
        assert_eq!(nonoriented_tilt(&flipped, &pi), 0.0);
        let phi: f64 = 0.7;
        let rot = frame_of(&[v(&[1.0, 0.0, 0.0]), v(&[0.0, phi.cos(), phi.sin()])], 1.0);
        assert!((oriented_tilt(&rot, &pi, 1.0) - (2.0 - 2.0 * phi.cos())).abs() < 1e-14);
        assert!((nonoriented_tilt(&rot, &pi) - 2.0 * phi.sin().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn tilt_requires_frames() {
        let t = SampledCurrent::new(3, 2, vec![v(&[0.1, 0.0, 0.0])], vec![1.0], None).unwrap();
        let pi = Subspace::coordinate(3, &[0, 1]);
        let c = Cylinder::new(DVector::zeros(3), 1.0, pi.clone()).unwrap();
        assert_eq!(tilt_excess_oriented(&t, &c, &pi, 1.0), Err(Error::MissingFrames));
    }

    #[test]
    fn reverse_excess_of_missing_plane() {
        // samples on the first plane only; the second plane is at distance 1
        // in the unit ball, so the quadrature sees dist² ≈ |x|² there
        let cone = axes_cone();
        let mut pts = Vec::new();
        for u in sampling::ball_points(2, 4000) {
            pts.push(v(&[u[0], u[1], 0.0, 0.0]));
        }
        let t = SampledCurrent::new(4, 2, pts, vec![PI / 4000.0; 4000], None).unwrap();
        let rev = reverse_excess(&cone, &t, &DVector::zeros(4), 1.0, 1.0 / 16.0, 4096).unwrap();
        // ∫_{1/16<|x|<1} |x|² dx over a disk = 2π (1 - 16^{-4}) / 4
        let expected = PI / 2.0 * (1.0 - 16f64.powi(-4));
        assert!((rev.value - expected).abs() < 0.02 * expected, "{}", rev.value);
        assert!(rev.value <= rev.mesh_bound + 1e-12);
    }
}
