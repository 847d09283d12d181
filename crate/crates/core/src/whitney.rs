//! Dyadic Whitney decomposition of the neighborhood
//! `R = {p : p_V(p) ∈ L₀, 0 < |p_{V⊥}(p)| ≤ 1}` of a spine `V`, and the
//! outer/central/inner classification of its cubes against an excess oracle.
//!
//! Cubes are addressed by integers. In normalized spine coordinates
//! `y = √(m-2)·p_V(p)` the cube `(ℓ, i)` is `Π_j [-1 + i_j 2^{1-ℓ}, -1 + (i_j+1) 2^{1-ℓ}]`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cone::PlaneCone;
use crate::error::{Error, Result};
use crate::excess::SampledCurrent;
use crate::geometry::Subspace;

pub const DEFAULT_RHO_STAR: f64 = 1.0 / 8.0;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WhitneyCube {
    pub ell: u32,
    pub index: Vec<u64>,
}

impl WhitneyCube {
    pub fn new(ell: u32, index: Vec<u64>) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::param("cube needs at least one spine coordinate"));
        }
        if ell > 60 {
            return Err(Error::param("generation too deep"));
        }
        if index.iter().any(|&i| i >> ell != 0) {
            return Err(Error::param(format!("index out of range for generation {ell}")));
        }
        Ok(Self { ell, index })
    }

    pub fn root(spine_dim: usize) -> Self {
        Self {
            ell: 0,
            index: vec![0; spine_dim],
        }
    }

    pub fn spine_dim(&self) -> usize {
        self.index.len()
    }

    pub fn parent(&self) -> Option<Self> {
        (self.ell > 0).then(|| Self {
            ell: self.ell - 1,
            index: self.index.iter().map(|i| i >> 1).collect(),
        })
    }

    pub fn children(&self) -> Vec<Self> {
        let d = self.spine_dim();
        (0..1u64 << d)
            .map(|mask| Self {
                ell: self.ell + 1,
                index: (0..d).map(|j| 2 * self.index[j] + ((mask >> j) & 1)).collect(),
            })
            .collect()
    }

    /// `true` if `self` contains `other` (including equality).
    pub fn is_ancestor_of(&self, other: &Self) -> bool {
        if other.ell < self.ell || other.spine_dim() != self.spine_dim() {
            return false;
        }
        let shift = other.ell - self.ell;
        other.index.iter().zip(&self.index).all(|(o, s)| o >> shift == *s)
    }

    /// Closed cubes share at least one point.
    pub fn touches(&self, other: &Self) -> bool {
        let top = self.ell.max(other.ell);
        let (a, b) = (top - self.ell, top - other.ell);
        self.index.iter().zip(&other.index).all(|(&i, &k)| {
            let (lo1, hi1) = (i << a, (i + 1) << a);
            let (lo2, hi2) = (k << b, (k + 1) << b);
            lo1 <= hi2 && lo2 <= hi1
        })
    }

    /// Normalized side length `2^{1-ℓ}`.
    pub fn normalized_side(&self) -> f64 {
        (2.0f64).powi(1 - self.ell as i32)
    }

    /// Side length `2^{1-ℓ}/√(m-2)` in spine coordinates.
    pub fn side(&self) -> f64 {
        self.normalized_side() / (self.spine_dim() as f64).sqrt()
    }

    /// Center in spine coordinates.
    pub fn center_coords(&self) -> DVector<f64> {
        let h = self.normalized_side();
        let s = (self.spine_dim() as f64).sqrt();
        DVector::from_iterator(
            self.spine_dim(),
            self.index.iter().map(|&i| (-1.0 + (i as f64 + 0.5) * h) / s),
        )
    }

    /// `H^{m-2}(L)`.
    pub fn measure(&self) -> f64 {
        self.side().powi(self.spine_dim() as i32)
    }

    /// Membership of normalized coordinates in the closed cube scaled by `λ`
    /// about its center.
    fn contains_normalized(&self, y: &[f64], lambda: f64) -> bool {
        let scale = (2.0f64).powi(self.ell as i32 - 1);
        y.iter().zip(&self.index).all(|(&yj, &i)| {
            // position in units of the side length, cube occupies [i, i+1]
            let t = (yj + 1.0) * scale;
            let c = i as f64 + 0.5;
            (t - c).abs() <= 0.5 * lambda
        })
    }
}

/// All `2^{ℓ(m-2)}` cubes of generation `ℓ`, in lexicographic index order.
pub fn cubes_at_generation(ell: u32, m: usize) -> Result<Vec<WhitneyCube>> {
    if m < 3 {
        return Err(Error::param("the Whitney decomposition needs m ≥ 3"));
    }
    let d = m - 2;
    let per = 1u64 << ell;
    let total = per
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 26)
        .ok_or_else(|| Error::param("too many cubes"))?;
    Ok((0..total)
        .map(|mut k| {
            let mut index = vec![0; d];
            for j in (0..d).rev() {
                index[j] = k % per;
                k /= per;
            }
            WhitneyCube { ell, index }
        })
        .collect())
}

/// Cubes `L'` with `R(L) ∩ R(L') ≠ ∅`, i.e. touching closed cubes with
/// generations differing by at most one; includes `L` itself.
pub fn neighbors(l: &WhitneyCube) -> Vec<WhitneyCube> {
    let mut out = Vec::new();
    let lo = l.ell.saturating_sub(1);
    for ell in lo..=l.ell + 1 {
        // index ranges of generation-ell cubes touching l
        let ranges: Vec<(u64, u64)> = l
            .index
            .iter()
            .map(|&i| {
                let max = (1u64 << ell) - 1;
                if ell >= l.ell {
                    let f = 1u64 << (ell - l.ell);
                    ((i * f).saturating_sub(1), ((i + 1) * f).min(max))
                } else {
                    ((i >> 1).saturating_sub(1), ((i >> 1) + 1).min(max))
                }
            })
            .collect();
        let mut idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            let cand = WhitneyCube {
                ell,
                index: idx.clone(),
            };
            if cand.touches(l) {
                out.push(cand);
            }
            for j in (0..idx.len()).rev() {
                if idx[j] < ranges[j].1 {
                    idx[j] += 1;
                    continue 'outer;
                }
                idx[j] = ranges[j].0;
            }
            break;
        }
    }
    out.sort();
    out
}

/// `𝒩(L)` restricted to a supplied family of cubes.
pub fn neighbors_within<'a, I>(l: &WhitneyCube, family: I) -> Vec<WhitneyCube>
where
    I: IntoIterator<Item = &'a WhitneyCube>,
{
    family
        .into_iter()
        .filter(|c| c.ell.abs_diff(l.ell) <= 1 && c.touches(l))
        .cloned()
        .collect()
}

/// The spine with its origin, plus the tube constant `ρ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitneyGeometry {
    spine: Subspace,
    origin: DVector<f64>,
    rho_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub region: bool,
    pub enlarged: bool,
}

impl WhitneyGeometry {
    pub fn new(spine: Subspace, origin: DVector<f64>, rho_star: f64) -> Result<Self> {
        if spine.dim() == 0 {
            return Err(Error::param("the spine must have dimension m - 2 ≥ 1"));
        }
        if origin.len() != spine.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: spine.ambient_dim(),
                got: origin.len(),
            });
        }
        if !(rho_star > 0.0 && rho_star < 4.0) {
            return Err(Error::param("ρ* must lie in (0, 4)"));
        }
        Ok(Self {
            spine,
            origin,
            rho_star,
        })
    }

    pub fn from_cone(s: &PlaneCone, rho_star: f64) -> Result<Self> {
        Self::new(s.spine().clone(), s.origin().clone(), rho_star)
    }

    pub fn spine(&self) -> &Subspace {
        &self.spine
    }

    pub fn rho_star(&self) -> f64 {
        self.rho_star
    }

    pub fn spine_dim(&self) -> usize {
        self.spine.dim()
    }

    /// Normalized spine coordinates and distance to `V`.
    pub fn split(&self, p: &DVector<f64>) -> (Vec<f64>, f64) {
        let rel = p - &self.origin;
        let s = (self.spine.dim() as f64).sqrt();
        let y = self.spine.coordinates(&rel).iter().map(|c| c * s).collect();
        (y, self.spine.dist(&rel))
    }

    pub fn center(&self, l: &WhitneyCube) -> DVector<f64> {
        &self.origin + self.spine.embed(&l.center_coords())
    }

    /// Membership in `R(L)` and in `λR(L)`.
    pub fn membership(&self, p: &DVector<f64>, l: &WhitneyCube, lambda: f64) -> Result<Membership> {
        if !(1.0..=1.5).contains(&lambda) {
            return Err(Error::param("λ must lie in [1, 3/2]"));
        }
        let (y, r) = self.split(p);
        let h = (2.0f64).powi(-(l.ell as i32));
        let region = l.contains_normalized(&y, 1.0) && 0.5 * h <= r && r <= h;
        let enlarged = l.contains_normalized(&y, lambda) && 0.5 * h / lambda <= r && r <= lambda * h;
        Ok(Membership { region, enlarged })
    }

    /// Cubes of generation at most `max_ell` whose closed region `R(L)`
    /// contains `p`.
    pub fn locate(&self, p: &DVector<f64>, max_ell: u32) -> Vec<WhitneyCube> {
        let (y, r) = self.split(p);
        locate_normalized(&y, r, max_ell)
    }

    /// `p ∈ B^h(L) = B_{2^{2-ℓ}}(y_L) \ B_{ρ* 2^{-ℓ}}(V)` (open ball, open tube).
    pub fn in_ball_h(&self, p: &DVector<f64>, l: &WhitneyCube) -> bool {
        let h = (2.0f64).powi(-(l.ell as i32));
        (p - self.center(l)).norm() < 4.0 * h && self.spine.dist(&(p - &self.origin)) >= self.rho_star * h
    }

    /// `B^h(L) ∩ B^h(L') ≠ ∅`. Taking `|p_{V⊥}|` as small as allowed, this is
    /// the intersection of two open balls of `V`.
    pub fn ball_h_overlap(&self, a: &WhitneyCube, b: &WhitneyCube) -> bool {
        let (ha, hb) = ((2.0f64).powi(-(a.ell as i32)), (2.0f64).powi(-(b.ell as i32)));
        let tube = self.rho_star * ha.max(hb);
        let (ra, rb) = (4.0 * ha, 4.0 * hb);
        if ra <= tube || rb <= tube {
            return false;
        }
        let sa = (ra * ra - tube * tube).sqrt();
        let sb = (rb * rb - tube * tube).sqrt();
        (a.center_coords() - b.center_coords()).norm() < sa + sb
    }

    /// Largest generation gap for which `B^h` sets can meet.
    pub fn max_overlap_gap(&self) -> u32 {
        let mut k = 0;
        while 4.0 * (2.0f64).powi(-(k as i32 + 1)) > self.rho_star {
            k += 1;
        }
        k
    }

    /// Cubes `L'` (any generation) with `B^h(L) ∩ B^h(L') ≠ ∅`.
    pub fn ball_h_overlaps(&self, l: &WhitneyCube) -> Vec<WhitneyCube> {
        let gap = self.max_overlap_gap();
        let d = l.spine_dim() as f64;
        let mut out = Vec::new();
        let c = l.center_coords();
        for ell in l.ell.saturating_sub(gap)..=l.ell + gap {
            let per = 1u64 << ell;
            let reach = 4.0 * ((2.0f64).powi(-(l.ell as i32)) + (2.0f64).powi(-(ell as i32)));
            let ranges: Vec<(u64, u64)> = c
                .iter()
                .map(|&x| {
                    let lo = ((x - reach) * d.sqrt() + 1.0) / 2.0 * per as f64 - 1.0;
                    let hi = ((x + reach) * d.sqrt() + 1.0) / 2.0 * per as f64 + 1.0;
                    (lo.max(0.0).floor() as u64, (hi.min(per as f64 - 1.0)).max(0.0).ceil() as u64)
                })
                .collect();
            let mut idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                let cand = WhitneyCube {
                    ell,
                    index: idx.clone(),
                };
                if self.ball_h_overlap(l, &cand) {
                    out.push(cand);
                }
                for j in (0..idx.len()).rev() {
                    if idx[j] < ranges[j].1 {
                        idx[j] += 1;
                        continue 'outer;
                    }
                    idx[j] = ranges[j].0;
                }
                break;
            }
        }
        out
    }

    /// Ratios of `diam L`, `diam R(L)`, `diam B^h(L)`, `dist(R(L), V)` and the
    /// extreme distances of `B^h(L)` to `V`, all divided by `2^{-ℓ}`.
    pub fn scale_ratios(&self, m: usize) -> Vec<f64> {
        let _ = m;
        let cube = 2.0;
        let region = (cube * cube + 4.0f64).sqrt();
        let ball = 8.0;
        vec![cube, region, ball, 0.5, 1.0, self.rho_star, 4.0]
    }

    /// Smallest `C` with every ratio of [`Self::scale_ratios`] in `[1/C, C]`.
    pub fn comparability_constant(&self, m: usize) -> f64 {
        self.scale_ratios(m)
            .iter()
            .map(|r| r.max(1.0 / r))
            .fold(1.0, f64::max)
    }
}

/// Cubes of generation at most `max_ell` whose closed region contains the
/// point with normalized spine coordinates `y` at distance `r` from `V`.
/// With dyadic `y` and `r` every comparison is exact.
pub fn locate_normalized(y: &[f64], r: f64, max_ell: u32) -> Vec<WhitneyCube> {
    let mut out = Vec::new();
    if !(r > 0.0 && r <= 1.0) || y.iter().any(|v| !(v.abs() <= 1.0)) {
        return out;
    }
    for ell in 0..=max_ell {
        let h = (2.0f64).powi(-(ell as i32));
        if !(0.5 * h <= r && r <= h) {
            continue;
        }
        let scale = (2.0f64).powi(ell as i32 - 1);
        let max = (1u64 << ell) - 1;
        // a coordinate on a shared face belongs to two cubes
        let opts: Vec<Vec<u64>> = y
            .iter()
            .map(|&v| {
                let t = (v + 1.0) * scale;
                let f = t.floor();
                let k = (f as u64).min(max);
                if t == f && k == f as u64 && k > 0 {
                    vec![k - 1, k]
                } else {
                    vec![k]
                }
            })
            .collect();
        let mut pick = vec![0usize; opts.len()];
        'outer: loop {
            out.push(WhitneyCube {
                ell,
                index: pick.iter().zip(&opts).map(|(&k, o)| o[k]).collect(),
            });
            for j in (0..pick.len()).rev() {
                if pick[j] + 1 < opts[j].len() {
                    pick[j] += 1;
                    continue 'outer;
                }
                pick[j] = 0;
            }
            break;
        }
    }
    out.sort();
    out
}

/// Whether `(y, r)` lies in the interior of `R(L)`.
pub fn in_region_interior(y: &[f64], r: f64, l: &WhitneyCube) -> bool {
    let h = (2.0f64).powi(-(l.ell as i32));
    let scale = (2.0f64).powi(l.ell as i32 - 1);
    0.5 * h < r
        && r < h
        && y.iter().zip(&l.index).all(|(&v, &i)| {
            let t = (v + 1.0) * scale;
            (i as f64) < t && t < (i + 1) as f64
        })
}

/// Whether `(y, r)` lies in the closed region `R(L)`.
pub fn in_region(y: &[f64], r: f64, l: &WhitneyCube) -> bool {
    let h = (2.0f64).powi(-(l.ell as i32));
    0.5 * h <= r && r <= h && l.contains_normalized(y, 1.0)
}

/// `Σ_{L ∈ 𝒢_ℓ} H^{m-2}(L)` accumulated in normalized units (exact for
/// dyadic sides) and converted once.
pub fn generation_measure(ell: u32, m: usize) -> Result<f64> {
    let cubes = cubes_at_generation(ell, m)?;
    let d = (m - 2) as i32;
    let normalized: f64 = cubes.iter().map(|c| c.normalized_side().powi(d)).sum();
    Ok(normalized / ((m - 2) as f64).powf(d as f64 / 2.0))
}

pub fn root_measure(m: usize) -> f64 {
    let d = (m - 2) as i32;
    (2.0f64).powi(d) / ((m - 2) as f64).powf(d as f64 / 2.0)
}

/// Partial sums `Σ_{ℓ(L) ≤ ℓ} 2^{-(m-2+κ)ℓ(L)}` for `ℓ = 0..=max_ell`.
pub fn geometric_partial_sums(m: usize, kappa: f64, max_ell: u32) -> Vec<f64> {
    let d = (m - 2) as f64;
    let mut acc = 0.0;
    (0..=max_ell)
        .map(|ell| {
            acc += (2.0f64).powf(d * ell as f64) * (2.0f64).powf(-(d + kappa) * ell as f64);
            acc
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CubeLabel {
    Outer,
    Central(usize),
    Inner,
    DescendantOfInner,
    Unresolved,
}

impl CubeLabel {
    pub fn name(&self) -> &'static str {
        match self {
            CubeLabel::Outer => "outer",
            CubeLabel::Central(_) => "central",
            CubeLabel::Inner => "inner",
            CubeLabel::DescendantOfInner => "descendant-of-inner",
            CubeLabel::Unresolved => "unresolved",
        }
    }

    fn good(&self) -> bool {
        matches!(self, CubeLabel::Outer | CubeLabel::Central(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeRecord {
    pub label: CubeLabel,
    /// Smallest `k` with `E(L,k) ≤ τ² s(k)²`, when evaluated.
    pub k_l: Option<usize>,
    /// `E(L,k)` for every layer, empty when the oracle was not consulted.
    pub excess: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub max_depth: u32,
    pub records: BTreeMap<WhitneyCube, CubeRecord>,
}

#[derive(Serialize)]
struct DumpLine<'a> {
    ell: u32,
    index: &'a [u64],
    label: &'static str,
    #[serde(rename = "kL")]
    k_l: Option<usize>,
    #[serde(rename = "E")]
    e: &'a [f64],
}

impl Classification {
    pub fn label(&self, l: &WhitneyCube) -> CubeLabel {
        if let Some(r) = self.records.get(l) {
            return r.label;
        }
        let mut a = l.clone();
        while let Some(p) = a.parent() {
            if let Some(r) = self.records.get(&p) {
                return match r.label {
                    CubeLabel::Inner | CubeLabel::DescendantOfInner => CubeLabel::DescendantOfInner,
                    _ => CubeLabel::Unresolved,
                };
            }
            a = p;
        }
        CubeLabel::Unresolved
    }

    pub fn count(&self, pred: impl Fn(&CubeLabel) -> bool) -> usize {
        self.records.values().filter(|r| pred(&r.label)).count()
    }

    /// Ancestry rules: parents of outer cubes are outer, parents of central
    /// cubes are outer or central, parents of inner cubes are outer or central,
    /// parents of descendants are inner or descendants.
    pub fn ancestry_violations(&self) -> Vec<WhitneyCube> {
        self.records
            .iter()
            .filter(|(l, r)| {
                let Some(p) = l.parent() else {
                    return r.label == CubeLabel::DescendantOfInner;
                };
                let pl = self.label(&p);
                match r.label {
                    CubeLabel::Outer => pl != CubeLabel::Outer,
                    CubeLabel::Central(_) | CubeLabel::Inner => !pl.good(),
                    CubeLabel::DescendantOfInner => {
                        !matches!(pl, CubeLabel::Inner | CubeLabel::DescendantOfInner)
                    }
                    CubeLabel::Unresolved => true,
                }
            })
            .map(|(l, _)| l.clone())
            .collect()
    }

    /// One JSON object per cube, in cube order.
    pub fn dump_lines(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|(l, r)| {
                serde_json::to_string(&DumpLine {
                    ell: l.ell,
                    index: &l.index,
                    label: r.label.name(),
                    k_l: r.k_l,
                    e: &r.excess,
                })
                .expect("plain data serializes")
            })
            .collect()
    }
}

/// Labels every cube of generation `≤ max_depth`. Cubes whose parent is
/// neither outer nor central are descendants of inner cubes and are not
/// evaluated. A root failing both tests is labeled inner.
pub fn classify_cubes<F>(
    m: usize,
    separations: &[f64],
    tau: f64,
    max_depth: u32,
    mut oracle: F,
) -> Result<Classification>
where
    F: FnMut(&WhitneyCube, usize) -> Result<f64>,
{
    if m < 3 {
        return Err(Error::param("the Whitney decomposition needs m ≥ 3"));
    }
    if separations.is_empty() || separations.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::param("layer separations must be positive"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("τ must be positive"));
    }
    let mut records = BTreeMap::new();
    let mut stack = vec![(WhitneyCube::root(m - 2), CubeLabel::Outer)];
    while let Some((l, parent)) = stack.pop() {
        let record = if parent.good() {
            let excess = (0..separations.len())
                .map(|k| oracle(&l, k))
                .collect::<Result<Vec<f64>>>()?;
            let pass = |k: usize| excess[k] <= tau * tau * separations[k] * separations[k];
            let k_l = (0..separations.len()).find(|&k| pass(k));
            let label = match (parent, k_l) {
                (CubeLabel::Outer, Some(0)) => CubeLabel::Outer,
                (_, Some(k)) => CubeLabel::Central(k),
                (_, None) => CubeLabel::Inner,
            };
            CubeRecord { label, k_l, excess }
        } else {
            CubeRecord {
                label: CubeLabel::DescendantOfInner,
                k_l: None,
                excess: Vec::new(),
            }
        };
        if l.ell < max_depth {
            for c in l.children().into_iter().rev() {
                stack.push((c, record.label));
            }
        }
        records.insert(l, record);
    }
    Ok(Classification { max_depth, records })
}

/// `s(k)`: smallest pairwise gap inside each layer, `δ̄` for singletons.
pub fn layer_separations(s: &PlaneCone, layers: &[Vec<usize>], delta_bar: f64) -> Result<Vec<f64>> {
    let g = s.gap_matrix();
    layers
        .iter()
        .map(|layer| {
            if layer.is_empty() || layer.iter().any(|&i| i >= s.len()) {
                return Err(Error::param("layer indices out of range"));
            }
            Ok(if layer.len() == 1 {
                delta_bar
            } else {
                g.min_gap(layer)
            })
        })
        .collect()
}

/// `E(L,k) = 2^{(m+2)ℓ} Σ_{p_i ∈ B^h(L)} w_i dist²(p_i, S_k)`, with the
/// spine coordinates, spine distances and layer distances of every sample
/// computed once.
pub struct CurrentOracle {
    rho_star: f64,
    m: usize,
    coords: Vec<DVector<f64>>,
    radii: Vec<f64>,
    weights: Vec<f64>,
    dist2: Vec<Vec<f64>>,
    layers: usize,
}

impl CurrentOracle {
    pub fn new(t: &SampledCurrent, layers: &[PlaneCone], geometry: &WhitneyGeometry) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::param("no layers given"))?;
        let m = first.m();
        if t.ambient_dim() != geometry.spine().ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: geometry.spine().ambient_dim(),
                got: t.ambient_dim(),
            });
        }
        if m != geometry.spine_dim() + 2 || layers.iter().any(|s| s.m() != m) {
            return Err(Error::param("spine dimension must be m - 2 for every layer"));
        }
        let mut oracle = Self {
            rho_star: geometry.rho_star(),
            m,
            coords: Vec::new(),
            radii: Vec::new(),
            weights: Vec::new(),
            dist2: Vec::new(),
            layers: layers.len(),
        };
        let root = WhitneyCube::root(m - 2).center_coords();
        for (i, p) in t.points().iter().enumerate() {
            let w = t.weights()[i];
            let rel = p - &geometry.origin;
            let v = geometry.spine.coordinates(&rel);
            let r = geometry.spine.dist(&rel);
            // every B(L) lies inside B_6(y_{L₀})
            if w == 0.0 || (&v - &root).norm_squared() + r * r >= 36.0 {
                continue;
            }
            oracle.coords.push(v);
            oracle.radii.push(r);
            oracle.weights.push(w);
            oracle.dist2.push(layers.iter().map(|s| s.dist(p).powi(2)).collect());
        }
        Ok(oracle)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn excess(&self, l: &WhitneyCube, k: usize) -> Result<f64> {
        if k >= self.layers {
            return Err(Error::param("layer index out of range"));
        }
        if l.spine_dim() + 2 != self.m {
            return Err(Error::param("cube dimension does not match the current"));
        }
        let h = (2.0f64).powi(-(l.ell as i32));
        let (outer2, tube) = (16.0 * h * h, self.rho_star * h);
        let c = l.center_coords();
        let mut sum = 0.0;
        for (i, v) in self.coords.iter().enumerate() {
            let r = self.radii[i];
            if r >= tube && (v - &c).norm_squared() + r * r < outer2 {
                sum += self.weights[i] * self.dist2[i][k];
            }
        }
        Ok(sum * (2.0f64).powi((self.m as i32 + 2) * l.ell as i32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(ell: u32, index: &[u64]) -> WhitneyCube {
        WhitneyCube::new(ell, index.to_vec()).unwrap()
    }

    #[test]
    fn generation_sizes() {
        assert_eq!(cubes_at_generation(0, 3).unwrap().len(), 1);
        assert_eq!(cubes_at_generation(2, 3).unwrap().len(), 4);
        assert_eq!(cubes_at_generation(3, 4).unwrap().len(), 64);
        assert!(cubes_at_generation(1, 2).is_err());
    }

    #[test]
    fn measures_sum_to_root() {
        for m in 3..=5 {
            for ell in 0..=4 {
                assert_eq!(generation_measure(ell, m).unwrap(), root_measure(m));
            }
        }
    }

    #[test]
    fn leftmost_neighbors() {
        let l = cube(1, &[0]);
        let n = neighbors(&l);
        let expected = vec![cube(0, &[0]), cube(1, &[0]), cube(1, &[1]), cube(2, &[0]), cube(2, &[1]), cube(2, &[2])];
        assert_eq!(n, expected);
    }

    #[test]
    fn neighbors_match_brute_force() {
        for m in [3, 4] {
            let all: Vec<WhitneyCube> = (0..=3).flat_map(|e| cubes_at_generation(e, m).unwrap()).collect();
            for l in all.iter().filter(|c| c.ell <= 2) {
                let fast = neighbors(l);
                let mut slow = neighbors_within(l, &all);
                slow.sort();
                assert_eq!(fast, slow, "{l:?}");
            }
        }
    }

    fn geometry() -> WhitneyGeometry {
        WhitneyGeometry::new(Subspace::coordinate(4, &[0]), DVector::zeros(4), DEFAULT_RHO_STAR).unwrap()
    }

    #[test]
    fn region_boundaries() {
        let g = geometry();
        let l = cube(1, &[0]);
        // |p_{V⊥}| = 2^{-1} exactly, spine coordinate inside [-1, 0]
        let p = DVector::from_column_slice(&[-0.5, 0.5, 0.0, 0.0]);
        assert!(g.membership(&p, &l, 1.0).unwrap().region);
        let q = DVector::from_column_slice(&[0.5, 0.5, 0.0, 0.0]);
        assert!(!g.membership(&q, &l, 1.0).unwrap().region);
        let v = DVector::from_column_slice(&[-0.5, 0.0, 0.0, 0.0]);
        assert!(!g.membership(&v, &l, 1.5).unwrap().enlarged);
        assert!(g.locate(&v, 10).is_empty());
    }

    #[test]
    fn overlap_bounded() {
        let g = geometry();
        let counts: Vec<usize> = cubes_at_generation(5, 3)
            .unwrap()
            .iter()
            .map(|l| g.ball_h_overlaps(l).len())
            .collect();
        assert!(counts.iter().all(|&c| c > 0 && c < 200));
    }

    #[test]
    fn classify_trivial_oracles() {
        let c = classify_cubes(3, &[0.1], 0.1, 3, |_, _| Ok(0.0)).unwrap();
        assert_eq!(c.count(|l| *l == CubeLabel::Outer), 15);
        let c = classify_cubes(3, &[0.1, 0.05], 0.1, 3, |l, k| Ok(if l.ell == 0 && k == 0 { 0.0 } else { 1e9 }))
            .unwrap();
        assert_eq!(c.label(&cube(0, &[0])), CubeLabel::Outer);
        assert_eq!(c.label(&cube(1, &[1])), CubeLabel::Inner);
        assert_eq!(c.label(&cube(3, &[5])), CubeLabel::DescendantOfInner);
        assert_eq!(c.label(&cube(7, &[5])), CubeLabel::DescendantOfInner);
        assert!(c.ancestry_violations().is_empty());
    }
}
