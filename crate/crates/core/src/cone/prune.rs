//! Pruning and layering of plane families, driven purely by their matrix of
//! pairwise gaps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::approx_le;
use crate::error::{Error, Result};

/// Symmetric matrix of pairwise distances between the members of a family,
/// with zero diagonal, positive off-diagonal entries and the triangle
/// inequality. Serialized as a dense array of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GapMatrix {
    g: DMatrix<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for GapMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut g = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGapMatrix(format!("row {i} has {} entries", row.len())));
            }
            for (j, x) in row.iter().enumerate() {
                g[(i, j)] = *x;
            }
        }
        GapMatrix::new(g)
    }
}

impl From<GapMatrix> for Vec<Vec<f64>> {
    fn from(g: GapMatrix) -> Self {
        (0..g.len())
            .map(|i| (0..g.len()).map(|j| g.get(i, j)).collect())
            .collect()
    }
}

impl GapMatrix {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n {
            return Err(Error::InvalidGapMatrix("matrix is not square".into()));
        }
        for i in 0..n {
            if g[(i, i)] != 0.0 {
                return Err(Error::InvalidGapMatrix(format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..n {
                let x = g[(i, j)];
                if !x.is_finite() {
                    return Err(Error::InvalidGapMatrix("non-finite entry".into()));
                }
                if x != g[(j, i)] {
                    return Err(Error::InvalidGapMatrix(format!("entries ({i},{j}) not symmetric")));
                }
                if i != j && x <= 0.0 {
                    return Err(Error::InvalidGapMatrix(format!("entry ({i},{j}) is not positive")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if g[(i, k)] > g[(i, j)] + g[(j, k)] + 1e-12 {
                        return Err(Error::InvalidGapMatrix(format!(
                            "triangle inequality fails for ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(Self { g })
    }

    pub(crate) fn from_matrix_unchecked(g: DMatrix<f64>) -> Self {
        Self { g }
    }

    pub fn len(&self) -> usize {
        self.g.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g[(i, j)]
    }

    pub fn all(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    fn pairs<'a>(&'a self, set: &'a [usize]) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        set.iter().enumerate().flat_map(move |(a, &i)| {
            set[a + 1..].iter().map(move |&j| (i.min(j), i.max(j), self.get(i, j)))
        })
    }

    /// Lexicographically first pair of `set` with the smallest gap.
    pub fn min_pair(&self, set: &[usize]) -> Option<(usize, usize)> {
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, j, d) in self.pairs(&sorted) {
            if best.is_none_or(|(_, _, b)| d < b) {
                best = Some((i, j, d));
            }
        }
        best.map(|(i, j, _)| (i, j))
    }

    /// Lexicographically first pair of `set` with the largest gap, skipping
    /// `avoid`.
    pub fn max_pair(&self, set: &[usize], avoid: Option<(usize, usize)>) -> Option<(usize, usize)> {
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        let top = self.max_gap(&sorted);
        let found = self
            .pairs(&sorted)
            .find(|&(i, j, d)| d == top && Some((i, j)) != avoid)
            .map(|(i, j, _)| (i, j));
        found
    }

    pub fn min_gap(&self, set: &[usize]) -> f64 {
        self.pairs(set).map(|p| p.2).fold(f64::INFINITY, f64::min)
    }

    pub fn max_gap(&self, set: &[usize]) -> f64 {
        self.pairs(set).map(|p| p.2).fold(0.0, f64::max)
    }

    /// `max_{j ∈ family} min_{i ∈ chosen} g_ij`.
    pub fn reach(&self, family: &[usize], chosen: &[usize]) -> f64 {
        family
            .iter()
            .map(|&j| chosen.iter().map(|&i| self.get(i, j)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

/// The two sides of a certified inequality `lhs ≤ rhs` (or `lhs = rhs`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

impl Check {
    pub fn le(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            ok: approx_le(lhs, rhs),
        }
    }

    pub fn eq(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            ok: approx_le(lhs, rhs) && approx_le(rhs, lhs),
        }
    }

    /// `rhs - lhs`, positive when the inequality holds with room to spare.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneCertificate {
    /// Surviving indices (0-based, ascending).
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub gamma: f64,
    pub eps: f64,
    /// `max_j min_{i∈I} g_ij ≤ Γ D`.
    pub reach: Check,
    /// `D + max_j min_{i∈I} g_ij ≤ δ min_{I} g`.
    pub dominance: Check,
    /// `max_I g = max g`.
    pub diameter: Check,
}

impl PruneCertificate {
    pub fn holds(&self) -> bool {
        self.kept.len() >= 2 && self.reach.ok && self.dominance.ok && self.diameter.ok
    }

    pub fn worst_margin(&self) -> f64 {
        self.reach.margin().min(self.dominance.margin())
    }
}

/// `Γ = δ^{2-N}(N-1)!` and `ε = δ/(1+Γ)`.
pub fn prune_constants(n: usize, delta: f64) -> (f64, f64) {
    let fact: f64 = (1..n).map(|k| k as f64).product();
    let gamma = delta.powi(2 - n as i32) * fact;
    (gamma, delta / (1.0 + gamma))
}

/// Discards members of the family until the gaps among the survivors dominate
/// the scale `d` (see [`PruneCertificate`]).
pub fn prune(g: &GapMatrix, d: f64, delta: f64) -> Result<PruneCertificate> {
    prune_within(g, &g.all(), d, delta)
}

/// [`prune`] applied to the sub-family `family` of `g`.
pub fn prune_within(g: &GapMatrix, family: &[usize], d: f64, delta: f64) -> Result<PruneCertificate> {
    let n = family.len();
    if n < 2 {
        return Err(Error::InvalidGapMatrix("need at least two members".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("δ must lie in (0, 1]"));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::param("D must be nonnegative"));
    }
    let (gamma, eps) = prune_constants(n, delta);
    let big = g.max_gap(family);
    if d > eps * big {
        return Err(Error::HypothesisViolated { d, bound: eps * big });
    }
    let mut kept: Vec<usize> = family.to_vec();
    kept.sort_unstable();
    let mut removed = Vec::new();
    while kept.len() >= 3 && d + g.reach(family, &kept) > delta * g.min_gap(&kept) {
        let small = g.min_pair(&kept).expect("three members");
        let far = g.max_pair(&kept, Some(small)).expect("three members");
        let victim = [small.0, small.1]
            .into_iter()
            .find(|&x| x != far.0 && x != far.1)
            .expect("distinct pairs share at most one index");
        kept.retain(|&x| x != victim);
        removed.push(victim);
    }
    let reach = g.reach(family, &kept);
    Ok(PruneCertificate {
        reach: Check::le(reach, gamma * d),
        dominance: Check::le(d + reach, delta * g.min_gap(&kept)),
        diameter: Check::eq(g.max_gap(&kept), big),
        kept,
        removed,
        gamma,
        eps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCertificate {
    /// `I(0) ⊋ I(1) ⊋ … ⊋ I(κ)`, 0-based.
    pub chain: Vec<Vec<usize>>,
    pub min_gap: Vec<f64>,
    pub reach: Vec<f64>,
    pub max_gap: Vec<f64>,
    pub eta: f64,
    pub kappa: usize,
    /// `M(κ) = M(0)`.
    pub diameter_kept: bool,
    /// `M(s) = M(0)` for every `s`.
    pub diameter_constant: bool,
    /// `η M(κ) ≤ m(κ)`.
    pub final_comparable: bool,
    /// `d(s) ≤ δ m(s)` and `η d(s) ≤ m(s-1)` for `s ≥ 1`.
    pub reach_ok: bool,
    /// `m(s-1) ≤ δ m(s)` for `s ≥ 1`.
    pub growth_ok: bool,
    /// Strict inclusions and at least two members per layer.
    pub chain_ok: bool,
}

impl LayerCertificate {
    pub fn holds(&self) -> bool {
        self.diameter_kept
            && self.diameter_constant
            && self.final_comparable
            && self.reach_ok
            && self.growth_ok
            && self.chain_ok
    }
}

/// The layer parameter: the largest `η` with `η ≤ ε` and `N η ≤ Γ⁻¹`, where
/// `(Γ, ε)` are the pruning constants at `δ/N`.
pub fn layer_eta(n: usize, delta: f64) -> f64 {
    let (gamma, eps) = prune_constants(n, delta / n as f64);
    eps.min(1.0 / (n as f64 * gamma))
}

/// Nested sub-families with geometrically separated gap scales, obtained by
/// pruning at `D = m(s-1)` and `δ/N` while `η M(s-1) > m(s-1)`.
pub fn layer_subdivide(g: &GapMatrix, delta: f64) -> Result<LayerCertificate> {
    let n = g.len();
    if n < 2 {
        return Err(Error::InvalidGapMatrix("need at least two members".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("δ must lie in (0, 1]"));
    }
    let eta = layer_eta(n, delta);
    let mut chain = vec![g.all()];
    loop {
        let last = chain.last().expect("chain is nonempty");
        let (lo, hi) = (g.min_gap(last), g.max_gap(last));
        if eta * hi <= lo {
            break;
        }
        let cert = prune_within(g, last, lo, delta / n as f64)?;
        chain.push(cert.kept);
    }
    Ok(certify_layers(g, delta, eta, chain))
}

pub fn certify_layers(g: &GapMatrix, delta: f64, eta: f64, chain: Vec<Vec<usize>>) -> LayerCertificate {
    let full = &chain[0];
    let min_gap: Vec<f64> = chain.iter().map(|s| g.min_gap(s)).collect();
    let max_gap: Vec<f64> = chain.iter().map(|s| g.max_gap(s)).collect();
    let reach: Vec<f64> = chain.iter().map(|s| g.reach(full, s)).collect();
    let kappa = chain.len() - 1;
    let mut chain_ok = chain.iter().all(|s| s.len() >= 2) && *full == g.all();
    let mut reach_ok = true;
    let mut growth_ok = true;
    for s in 1..=kappa {
        chain_ok &= chain[s].len() < chain[s - 1].len()
            && chain[s].iter().all(|x| chain[s - 1].contains(x));
        reach_ok &= approx_le(reach[s], delta * min_gap[s]) && approx_le(eta * reach[s], min_gap[s - 1]);
        growth_ok &= approx_le(min_gap[s - 1], delta * min_gap[s]);
    }
    let same = |a: f64, b: f64| approx_le(a, b) && approx_le(b, a);
    LayerCertificate {
        diameter_kept: same(max_gap[kappa], max_gap[0]),
        diameter_constant: max_gap.iter().all(|&m| same(m, max_gap[0])),
        final_comparable: approx_le(eta * max_gap[kappa], min_gap[kappa]),
        reach_ok,
        growth_ok,
        chain_ok,
        chain,
        min_gap,
        reach,
        max_gap,
        eta,
        kappa,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> GapMatrix {
        GapMatrix::try_from(vec![
            vec![0.0, 0.01, 0.5],
            vec![0.01, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn constants() {
        let (gamma, eps) = prune_constants(3, 0.5);
        assert_eq!(gamma, 4.0);
        assert!((eps - 0.1).abs() < 1e-15);
    }

    #[test]
    fn prune_traced_example() {
        let c = prune(&three(), 0.02, 0.5).unwrap();
        assert_eq!(c.kept, vec![0, 2]);
        assert_eq!(c.removed, vec![1]);
        assert!(c.holds());
        assert!((c.reach.lhs - 0.01).abs() < 1e-15 && (c.reach.rhs - 0.08).abs() < 1e-15);
        assert!((c.dominance.lhs - 0.03).abs() < 1e-15 && (c.dominance.rhs - 0.25).abs() < 1e-15);
    }

    #[test]
    fn prune_two_members_keeps_both() {
        let g = GapMatrix::try_from(vec![vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let c = prune(&g, 0.0, 1.0).unwrap();
        assert_eq!(c.kept, vec![0, 1]);
    }

    #[test]
    fn prune_rejects_large_scale() {
        assert!(matches!(
            prune(&three(), 0.06, 0.5),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn prune_keeps_everything_when_already_separated() {
        let g = GapMatrix::try_from(vec![
            vec![0.0, 0.4, 0.5],
            vec![0.4, 0.0, 0.45],
            vec![0.5, 0.45, 0.0],
        ])
        .unwrap();
        let c = prune(&g, 0.001, 0.5).unwrap();
        assert_eq!(c.kept, vec![0, 1, 2]);
    }

    #[test]
    fn layer_examples() {
        let g = GapMatrix::try_from(vec![vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let c = layer_subdivide(&g, 0.5).unwrap();
        assert_eq!(c.kappa, 0);

        let c = layer_subdivide(&three(), 1.0).unwrap();
        assert_eq!(c.kappa, 1);
        assert_eq!(c.chain[1], vec![0, 2]);
        assert!((c.reach[1] - 0.01).abs() < 1e-15);
        assert!((c.min_gap[1] - 0.5).abs() < 1e-15);
        assert!(c.holds());

        let eq = GapMatrix::try_from(vec![
            vec![0.0, 0.2, 0.2],
            vec![0.2, 0.0, 0.2],
            vec![0.2, 0.2, 0.0],
        ])
        .unwrap();
        assert_eq!(layer_subdivide(&eq, 0.5).unwrap().kappa, 0);
    }

    #[test]
    fn invalid_matrices() {
        assert!(GapMatrix::try_from(vec![vec![0.0, 0.1], vec![0.2, 0.0]]).is_err());
        assert!(GapMatrix::try_from(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
        let bad = vec![
            vec![0.0, 0.1, 1.0],
            vec![0.1, 0.0, 0.1],
            vec![1.0, 0.1, 0.0],
        ];
        assert!(GapMatrix::try_from(bad).is_err());
    }
}
