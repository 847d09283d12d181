//! Three clustering procedures on finite point sets with certified separation:
//! extracting a subset whose diameter and separation are comparable, coarsening
//! a set until a given scale is dominated by its separation, and splitting a
//! set into two well-separated halves.
//!
//! Indices are 0-based. Ties are always resolved towards the lowest index (or
//! the lexicographically first pair).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::approx_le;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointSetJson", into = "PointSetJson")]
pub struct PointSet {
    ambient: usize,
    points: Vec<DVector<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PointSetJson {
    ambient: usize,
    points: Vec<Vec<f64>>,
}

impl TryFrom<PointSetJson> for PointSet {
    type Error = Error;
    fn try_from(j: PointSetJson) -> Result<Self> {
        let pts = j.points.into_iter().map(DVector::from_vec).collect();
        PointSet::new(j.ambient, pts)
    }
}

impl From<PointSet> for PointSetJson {
    fn from(p: PointSet) -> Self {
        PointSetJson {
            ambient: p.ambient,
            points: p.points.iter().map(|v| v.iter().copied().collect()).collect(),
        }
    }
}

impl PointSet {
    pub fn new(ambient: usize, points: Vec<DVector<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidPointSet("empty point set".into()));
        }
        for p in &points {
            if p.len() != ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidPointSet("non-finite coordinate".into()));
            }
        }
        let set = Self { ambient, points };
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                if set.dist(i, j) == 0.0 {
                    return Err(Error::InvalidPointSet(format!(
                        "points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(set)
    }

    /// Points on the real line.
    pub fn on_line(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.iter().map(|&x| DVector::from_element(1, x)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        (&self.points[i] - &self.points[j]).norm()
    }

    /// Distance from point `p` to the subset `set`.
    pub fn dist_to(&self, p: usize, set: &[usize]) -> f64 {
        set.iter().map(|&q| self.dist(p, q)).fold(f64::INFINITY, f64::min)
    }

    /// Minimum pairwise distance within `set` (∞ for fewer than two points).
    pub fn separation(&self, set: &[usize]) -> f64 {
        extreme_pair(self, set, false).map_or(f64::INFINITY, |(_, _, d)| d)
    }

    pub fn diameter(&self, set: &[usize]) -> f64 {
        extreme_pair(self, set, true).map_or(0.0, |(_, _, d)| d)
    }

    fn all(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Lexicographically first pair realizing the min (or max) distance in `set`.
/// Near-ties within the certificate slack count as ties.
fn extreme_pair(p: &PointSet, set: &[usize], max: bool) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            let d = p.dist(i, j);
            let better = match best {
                None => true,
                Some((_, _, b)) => {
                    if max {
                        !approx_le(d, b)
                    } else {
                        !approx_le(b, d)
                    }
                }
            };
            if better {
                best = Some((i.min(j), i.max(j), d));
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparableCertificate {
    pub selected: Vec<usize>,
    pub removed: Vec<usize>,
    pub lambda: f64,
    pub ratio_bound: f64,
    pub achieved_ratio: f64,
    /// `max_p dist(p, P′) / sep(P′)`, to be compared with δ̄.
    pub achieved_delta: f64,
    pub ratio_ok: bool,
    pub proximity_ok: bool,
    pub order_ok: bool,
}

impl ComparableCertificate {
    pub fn holds(&self) -> bool {
        self.ratio_ok && self.proximity_ok && self.order_ok
    }
}

/// Repeatedly discards a point of the closest pair that is not in the farthest
/// pair, stopping at the first `J` with `M_J ≤ λ^{N-2-J} m_J`, `λ = 1 + 1/δ̄`.
pub fn cluster_comparable(p: &PointSet, delta_bar: f64) -> Result<ComparableCertificate> {
    let n = p.len();
    if n < 2 {
        return Err(Error::InvalidPointSet("need at least two points".into()));
    }
    if !(delta_bar > 0.0 && delta_bar <= 0.5) {
        return Err(Error::param("δ̄ must lie in (0, 1/2]"));
    }
    let lambda = 1.0 + 1.0 / delta_bar;
    let mut current = p.all();
    let mut removed = Vec::new();
    for j in 0..=n - 2 {
        let (l1, l2, small) = extreme_pair(p, &current, false).expect("two points remain");
        let (j1, j2, big) = extreme_pair(p, &current, true).expect("two points remain");
        if big <= lambda.powi((n - 2 - j) as i32) * small {
            break;
        }
        let victim = [l1, l2]
            .into_iter()
            .find(|x| *x != j1 && *x != j2)
            .expect("closest and farthest pairs differ when not yet comparable");
        current.retain(|&x| x != victim);
        removed.push(victim);
    }
    Ok(certify_comparable(p, delta_bar, current, removed))
}

/// Re-evaluates all three conclusions for a given selection and removal order.
pub fn certify_comparable(
    p: &PointSet,
    delta_bar: f64,
    selected: Vec<usize>,
    removed: Vec<usize>,
) -> ComparableCertificate {
    let n = p.len();
    let lambda = 1.0 + 1.0 / delta_bar;
    let ratio_bound = lambda.powi(n as i32 - 2);
    let sep = p.separation(&selected);
    let achieved_ratio = p.diameter(&selected) / sep;
    let worst = (0..n).map(|i| p.dist_to(i, &selected)).fold(0.0, f64::max);
    let mut rest = p.all();
    let mut order_ok = true;
    for &r in &removed {
        let m_prev = p.separation(&rest);
        rest.retain(|&x| x != r);
        let d = p.dist_to(r, &rest);
        order_ok &= approx_le(d, m_prev) && approx_le(m_prev, d);
    }
    order_ok &= rest == selected;
    ComparableCertificate {
        ratio_ok: selected.len() >= 2 && approx_le(achieved_ratio, ratio_bound),
        proximity_ok: approx_le(worst, delta_bar * sep),
        order_ok,
        selected,
        removed,
        lambda,
        ratio_bound,
        achieved_ratio,
        achieved_delta: worst / sep,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineCertificate {
    pub selected: Vec<usize>,
    pub removed: Vec<usize>,
    /// `δ⁻¹(1+δ⁻¹)^{N-2} ε`.
    pub reach_bound: f64,
    pub max_dist: f64,
    pub reach_ok: bool,
    pub singleton: bool,
    pub dominance_ok: bool,
}

impl RefineCertificate {
    pub fn holds(&self) -> bool {
        self.reach_ok && (self.singleton || self.dominance_ok)
    }
}

/// Discards points of the closest pair until either one point is left or the
/// current threshold `t_J` (`t_0 = ε`, `t_J = δ⁻¹(1+δ⁻¹)^{J-1} ε`) is dominated
/// by `δ` times the separation.
pub fn cluster_refine(p: &PointSet, delta: f64, eps: f64) -> Result<RefineCertificate> {
    let n = p.len();
    if n < 2 {
        return Err(Error::InvalidPointSet("need at least two points".into()));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::param("δ must lie in (0, 1/2]"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("ε must be positive"));
    }
    let mut current = p.all();
    let mut removed = Vec::new();
    let mut threshold = eps;
    loop {
        if current.len() == 1 {
            break;
        }
        let (a, _, sep) = extreme_pair(p, &current, false).expect("two points remain");
        if threshold <= delta * sep {
            break;
        }
        current.retain(|&x| x != a);
        removed.push(a);
        threshold = if removed.len() == 1 {
            eps / delta
        } else {
            threshold * (1.0 + 1.0 / delta)
        };
    }
    Ok(certify_refine(p, delta, eps, current, removed))
}

pub fn certify_refine(
    p: &PointSet,
    delta: f64,
    eps: f64,
    selected: Vec<usize>,
    removed: Vec<usize>,
) -> RefineCertificate {
    let n = p.len();
    let reach_bound = eps / delta * (1.0 + 1.0 / delta).powi(n as i32 - 2);
    let max_dist = (0..n).map(|i| p.dist_to(i, &selected)).fold(0.0, f64::max);
    let singleton = selected.len() == 1;
    let dominance_ok = !singleton && approx_le(eps.max(max_dist), delta * p.separation(&selected));
    RefineCertificate {
        reach_ok: approx_le(max_dist, reach_bound),
        singleton,
        dominance_ok,
        selected,
        removed,
        reach_bound,
        max_dist,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCertificate {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub diameter: f64,
    pub separation: f64,
    /// `diameter / 2^{N-2}`.
    pub bound: f64,
    pub holds: bool,
}

/// Recursive two-way split: set aside a point off the farthest pair, split the
/// rest, and attach the point to the side of its nearest neighbor.
pub fn cluster_split(p: &PointSet) -> Result<SplitCertificate> {
    if p.len() < 2 {
        return Err(Error::InvalidPointSet("need at least two points".into()));
    }
    let (first, second) = split_rec(p, p.all());
    Ok(certify_split(p, first, second))
}

fn split_rec(p: &PointSet, set: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    if set.len() == 2 {
        return (vec![set[0]], vec![set[1]]);
    }
    let (a, b, _) = extreme_pair(p, &set, true).expect("at least three points");
    let lone = *set.iter().find(|&&x| x != a && x != b).expect("a third point exists");
    let rest: Vec<usize> = set.iter().copied().filter(|&x| x != lone).collect();
    let (mut s1, mut s2) = split_rec(p, rest);
    if p.dist_to(lone, &s1) <= p.dist_to(lone, &s2) {
        s1.push(lone);
        s1.sort_unstable();
    } else {
        s2.push(lone);
        s2.sort_unstable();
    }
    (s1, s2)
}

pub fn certify_split(p: &PointSet, first: Vec<usize>, second: Vec<usize>) -> SplitCertificate {
    let n = p.len();
    let diameter = p.diameter(&p.all());
    let separation = cross_separation(p, &first, &second);
    let bound = diameter / 2f64.powi(n as i32 - 2);
    let mut all: Vec<usize> = first.iter().chain(&second).copied().collect();
    all.sort_unstable();
    let partition = !first.is_empty() && !second.is_empty() && all == p.all();
    SplitCertificate {
        holds: partition && approx_le(bound, separation),
        first,
        second,
        diameter,
        separation,
        bound,
    }
}

pub fn cross_separation(p: &PointSet, a: &[usize], b: &[usize]) -> f64 {
    a.iter().map(|&i| p.dist_to(i, b)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparable_examples() {
        let two = PointSet::on_line(&[0.0, 1.0]).unwrap();
        let c = cluster_comparable(&two, 0.3).unwrap();
        assert_eq!(c.selected, vec![0, 1]);
        assert_eq!(c.achieved_ratio, 1.0);

        let three = PointSet::on_line(&[0.0, 1e-4, 1.0]).unwrap();
        let c = cluster_comparable(&three, 0.5).unwrap();
        assert_eq!(c.selected, vec![0, 2]);
        assert_eq!(c.removed, vec![1]);
        assert!(c.holds());

        let s = 3f64.sqrt() / 2.0;
        let tri = PointSet::new(
            2,
            vec![
                DVector::from_vec(vec![0.0, 0.0]),
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.5, s]),
            ],
        )
        .unwrap();
        let c = cluster_comparable(&tri, 0.5).unwrap();
        assert_eq!(c.selected, vec![0, 1, 2]);
        assert!(c.removed.is_empty());
    }

    #[test]
    fn refine_examples() {
        let p = PointSet::on_line(&[0.0, 1.0]).unwrap();
        assert_eq!(cluster_refine(&p, 0.5, 0.1).unwrap().selected, vec![0, 1]);

        let p = PointSet::on_line(&[0.0, 0.01]).unwrap();
        let c = cluster_refine(&p, 0.5, 0.1).unwrap();
        assert!(c.singleton && c.holds());
        assert!(c.max_dist <= 0.2);

        let p = PointSet::on_line(&[0.0, 0.01, 1.0]).unwrap();
        assert_eq!(cluster_refine(&p, 0.5, 0.004).unwrap().selected, vec![0, 1, 2]);
    }

    #[test]
    fn split_examples() {
        let p = PointSet::on_line(&[0.0, 1.0]).unwrap();
        let c = cluster_split(&p).unwrap();
        assert_eq!((c.first, c.second, c.separation), (vec![0], vec![1], 1.0));

        let p = PointSet::on_line(&[0.0, 0.1, 1.0]).unwrap();
        let c = cluster_split(&p).unwrap();
        assert_eq!((c.first.clone(), c.second.clone()), (vec![0, 1], vec![2]));
        assert!((c.separation - 0.9).abs() < 1e-15 && c.holds);

        let p = PointSet::on_line(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let c = cluster_split(&p).unwrap();
        assert!(c.holds && c.separation >= 0.75);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PointSet::on_line(&[0.0, 0.0]).is_err());
        let p = PointSet::on_line(&[0.0]).unwrap();
        assert!(cluster_split(&p).is_err());
        let p = PointSet::on_line(&[0.0, 1.0]).unwrap();
        assert!(cluster_comparable(&p, 0.7).is_err());
        assert!(cluster_refine(&p, 0.5, 0.0).is_err());
    }
}
