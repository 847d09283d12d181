//! Linear and affine subspaces stored as orthonormal frames, with principal
//! ("Morgan") angles, unit-ball Hausdorff distances and canonical rotations.
//!
//! All angle computations go through singular values of frame products. The
//! cosines come from `Aᵀ B` and the sines from `(I - B Bᵀ) A`; small angles are
//! recovered from the sines and large ones from the cosines, so neither end of
//! `[0, π/2]` loses precision.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Gram-matrix tolerance for accepting a frame as orthonormal.
pub const FRAME_TOL: f64 = 1e-10;
/// Relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-10;
/// A Morgan angle counts as positive once its sine exceeds this.
pub const ZERO_ANGLE_TOL: f64 = 1e-10;
/// `canonical_rotation` refuses pairs whose largest angle is this close to π/2.
pub const ORTHOGONAL_GUARD: f64 = 1e-8;

/// A linear subspace of `R^ambient`, represented by an orthonormal frame
/// (one column per basis vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameJson", into = "FrameJson")]
pub struct Subspace {
    frame: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FrameJson {
    ambient: usize,
    frame: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<Vec<f64>>,
}

impl Subspace {
    /// Wraps an `ambient × dim` matrix whose columns must already be orthonormal.
    pub fn from_orthonormal(frame: DMatrix<f64>) -> Result<Self> {
        let gram = frame.transpose() * &frame;
        let dev = (gram - DMatrix::identity(frame.ncols(), frame.ncols())).amax();
        if dev > FRAME_TOL || !dev.is_finite() {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Self { frame })
    }

    /// Orthonormalizes `vectors` with modified Gram–Schmidt (two passes) and
    /// fails if they are not linearly independent.
    pub fn span(ambient: usize, vectors: &[DVector<f64>]) -> Result<Self> {
        let basis = orthonormalize(ambient, vectors)?;
        if basis.len() != vectors.len() {
            return Err(Error::RankDeficient {
                needed: vectors.len(),
                got: basis.len(),
            });
        }
        Ok(Self::from_columns(ambient, &basis))
    }

    /// Orthonormal basis of the span of `vectors`, dropping dependent ones.
    pub fn span_lossy(ambient: usize, vectors: &[DVector<f64>]) -> Result<Self> {
        let basis = orthonormalize(ambient, vectors)?;
        Ok(Self::from_columns(ambient, &basis))
    }

    /// `span(e_i : i ∈ axes)`.
    pub fn coordinate(ambient: usize, axes: &[usize]) -> Self {
        let mut frame = DMatrix::zeros(ambient, axes.len());
        for (c, &i) in axes.iter().enumerate() {
            frame[(i, c)] = 1.0;
        }
        Self { frame }
    }

    pub fn zero(ambient: usize) -> Self {
        Self {
            frame: DMatrix::zeros(ambient, 0),
        }
    }

    /// The graph `{(x, L x)}` of a linear map `L: R^m → R^n`, given as an
    /// `n × m` matrix, inside `R^(m+n)`.
    pub fn graph(map: &DMatrix<f64>) -> Self {
        let (n, m) = map.shape();
        let mut cols = Vec::with_capacity(m);
        for j in 0..m {
            let mut v = DVector::zeros(m + n);
            v[j] = 1.0;
            for i in 0..n {
                v[m + i] = map[(i, j)];
            }
            cols.push(v);
        }
        let basis = orthonormalize(m + n, &cols).expect("graph columns are independent");
        Self::from_columns(m + n, &basis)
    }

    fn from_columns(ambient: usize, cols: &[DVector<f64>]) -> Self {
        let mut frame = DMatrix::zeros(ambient, cols.len());
        for (j, c) in cols.iter().enumerate() {
            frame.set_column(j, c);
        }
        Self { frame }
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn basis_vector(&self, i: usize) -> DVector<f64> {
        self.frame.column(i).into_owned()
    }

    fn check_vector(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Splits `v` into its components along and across the subspace.
    pub fn project(&self, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_vector(v)?;
        let par = self.parallel(v);
        let perp = v - &par;
        Ok((par, perp))
    }

    /// Orthogonal projection onto the subspace. Panics on dimension mismatch.
    pub fn parallel(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.frame * (self.frame.transpose() * v)
    }

    /// Component of `v` orthogonal to the subspace.
    pub fn perpendicular(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.parallel(v)
    }

    /// Coordinates of the projection of `v` in the frame basis.
    pub fn coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        self.frame.transpose() * v
    }

    /// Ambient point with the given frame coordinates.
    pub fn embed(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.frame * coords
    }

    pub fn dist(&self, v: &DVector<f64>) -> f64 {
        self.perpendicular(v).norm()
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.dist(v) <= tol
    }

    pub fn is_subspace_of(&self, other: &Subspace, tol: f64) -> bool {
        (0..self.dim()).all(|i| other.contains(&self.basis_vector(i), tol))
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.frame * self.frame.transpose()
    }

    /// Orthonormal basis of the orthogonal complement, built greedily from the
    /// coordinate axes with the largest residuals.
    pub fn orthogonal_complement(&self) -> Subspace {
        let n = self.ambient_dim();
        let mut basis: Vec<DVector<f64>> = (0..self.dim()).map(|i| self.basis_vector(i)).collect();
        let mut comp = Vec::new();
        while basis.len() < n {
            let mut best: Option<(f64, DVector<f64>)> = None;
            for axis in 0..n {
                let mut e = DVector::zeros(n);
                e[axis] = 1.0;
                let r = residual(&e, &basis);
                let nr = r.norm();
                if best.as_ref().map_or(true, |(b, _)| nr > *b) {
                    best = Some((nr, r));
                }
            }
            let (nr, r) = best.expect("ambient dimension is positive");
            let mut u = r / nr;
            u = residual(&u, &basis);
            u /= u.norm();
            basis.push(u.clone());
            comp.push(u);
        }
        Self::from_columns(n, &comp)
    }

    /// Image of the subspace under an ambient linear map (assumed injective on it).
    pub fn transformed(&self, map: &DMatrix<f64>) -> Result<Subspace> {
        let cols: Vec<DVector<f64>> = (0..self.dim())
            .map(|i| map * self.basis_vector(i))
            .collect();
        Subspace::span(self.ambient_dim(), &cols)
    }

    /// The same subspace with its frame mixed by an orthogonal `dim × dim` matrix.
    pub fn reframed(&self, mixing: &DMatrix<f64>) -> Result<Subspace> {
        Subspace::from_orthonormal(&self.frame * mixing)
    }

    /// `self ∩ other^⊥` computed as the span of the projections of the frame of
    /// `self` onto `other^⊥`, valid when `other ⊂ self`.
    pub fn relative_complement(&self, other: &Subspace) -> Result<Subspace> {
        let cols: Vec<DVector<f64>> = (0..self.dim())
            .map(|i| other.perpendicular(&self.basis_vector(i)))
            .collect();
        Subspace::span_lossy(self.ambient_dim(), &cols)
    }
}

impl TryFrom<FrameJson> for Subspace {
    type Error = Error;
    fn try_from(j: FrameJson) -> Result<Self> {
        if let Some(off) = &j.offset {
            if off.iter().any(|x| *x != 0.0) {
                return Err(Error::Parse(
                    "a linear subspace cannot carry a nonzero offset".into(),
                ));
            }
        }
        frame_from_rows(j.ambient, &j.frame)
    }
}

impl From<Subspace> for FrameJson {
    fn from(s: Subspace) -> Self {
        FrameJson {
            ambient: s.ambient_dim(),
            frame: frame_rows(&s),
            offset: None,
        }
    }
}

fn frame_from_rows(ambient: usize, rows: &[Vec<f64>]) -> Result<Subspace> {
    let mut frame = DMatrix::zeros(ambient, rows.len());
    for (j, v) in rows.iter().enumerate() {
        if v.len() != ambient {
            return Err(Error::DimensionMismatch {
                expected: ambient,
                got: v.len(),
            });
        }
        for (i, x) in v.iter().enumerate() {
            frame[(i, j)] = *x;
        }
    }
    Subspace::from_orthonormal(frame)
}

fn frame_rows(s: &Subspace) -> Vec<Vec<f64>> {
    (0..s.dim())
        .map(|j| s.frame.column(j).iter().copied().collect())
        .collect()
}

fn residual(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut r = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&r);
            r.axpy(-c, b, 1.0);
        }
    }
    r
}

/// Modified Gram–Schmidt with re-orthogonalization. Vectors whose residual
/// falls below `RANK_TOL` times the largest input norm are dropped.
pub fn orthonormalize(ambient: usize, vectors: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != ambient {
            return Err(Error::DimensionMismatch {
                expected: ambient,
                got: v.len(),
            });
        }
        let r = residual(v, &basis);
        let nr = r.norm();
        if nr > RANK_TOL * scale && nr > 0.0 {
            basis.push(r / nr);
        }
    }
    Ok(basis)
}

/// An affine plane `offset + base`, with the offset normalized to be
/// orthogonal to `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameJson", into = "FrameJson")]
pub struct AffinePlane {
    base: Subspace,
    offset: DVector<f64>,
}

impl AffinePlane {
    pub fn new(base: Subspace, point: DVector<f64>) -> Result<Self> {
        base.check_vector(&point)?;
        let offset = base.perpendicular(&point);
        Ok(Self { base, offset })
    }

    pub fn linear(base: Subspace) -> Self {
        let offset = DVector::zeros(base.ambient_dim());
        Self { base, offset }
    }

    pub fn base(&self) -> &Subspace {
        &self.base
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn dist(&self, p: &DVector<f64>) -> f64 {
        self.base.dist(&(p - &self.offset))
    }
}

impl TryFrom<FrameJson> for AffinePlane {
    type Error = Error;
    fn try_from(j: FrameJson) -> Result<Self> {
        let ambient = j.ambient;
        let base = frame_from_rows(ambient, &j.frame)?;
        let point = match j.offset {
            Some(o) => {
                if o.len() != ambient {
                    return Err(Error::DimensionMismatch {
                        expected: ambient,
                        got: o.len(),
                    });
                }
                DVector::from_vec(o)
            }
            None => DVector::zeros(ambient),
        };
        AffinePlane::new(base, point)
    }
}

impl From<AffinePlane> for FrameJson {
    fn from(p: AffinePlane) -> Self {
        FrameJson {
            ambient: p.base.ambient_dim(),
            frame: frame_rows(&p.base),
            offset: Some(p.offset.iter().copied().collect()),
        }
    }
}

/// The positive Morgan angles of a pair of equidimensional subspaces, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSpectrum {
    pub angles: Vec<f64>,
}

impl AngleSpectrum {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn smallest(&self) -> Option<f64> {
        self.angles.first().copied()
    }

    pub fn largest(&self) -> Option<f64> {
        self.angles.last().copied()
    }
}

fn check_pair(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            got: b.ambient_dim(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::UnequalDims(a.dim(), b.dim()));
    }
    Ok(())
}

/// Thin singular value decomposition `m = U diag(σ) Vᵀ`, `σ` descending.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD. nalgebra's bidiagonal SVD returns wrong factors on some
/// matrices with clustered singular values, so this goes through faer.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Svd {
            u: DMatrix::zeros(m.nrows(), 0),
            singular_values: DVector::zeros(0),
            v_t: DMatrix::zeros(0, m.ncols()),
        };
    }
    match to_faer(m).thin_svd() {
        Ok(f) => Svd {
            u: from_faer(f.U()),
            singular_values: DVector::from_fn(k, |i, _| f.S()[i]),
            v_t: from_faer(f.V()).transpose(),
        },
        Err(_) => {
            let f = nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, 0).expect("unbounded iterations");
            Svd {
                u: f.u.expect("u requested"),
                singular_values: f.singular_values,
                v_t: f.v_t.expect("v_t requested"),
            }
        }
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
pub struct SymmetricEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

pub fn symmetric_eigen(m: &DMatrix<f64>) -> SymmetricEigen {
    let n = m.nrows();
    if n == 0 {
        return SymmetricEigen {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        };
    }
    match to_faer(m).self_adjoint_eigen(faer::Side::Lower) {
        Ok(f) => SymmetricEigen {
            eigenvalues: DVector::from_fn(n, |i, _| f.S()[i]),
            eigenvectors: from_faer(f.U()),
        },
        Err(_) => {
            let f = nalgebra::SymmetricEigen::new(m.clone());
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| f.eigenvalues[a].total_cmp(&f.eigenvalues[b]));
            SymmetricEigen {
                eigenvalues: DVector::from_fn(n, |i, _| f.eigenvalues[order[i]]),
                eigenvectors: DMatrix::from_fn(n, n, |i, j| f.eigenvectors[(i, order[j])]),
            }
        }
    }
}

fn sorted_singular_values(m: DMatrix<f64>, descending: bool) -> Vec<f64> {
    let mut s: Vec<f64> = svd(&m).singular_values.iter().copied().collect();
    s.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if descending {
        s.reverse();
    }
    s
}

/// All `dim` principal angles of the pair, ascending, zeros included.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    check_pair(a, b)?;
    if a.dim() == 0 {
        return Ok(Vec::new());
    }
    let cos = sorted_singular_values(a.frame.transpose() * &b.frame, true);
    let perp = &a.frame - &b.frame * (b.frame.transpose() * &a.frame);
    let sin = sorted_singular_values(perp, false);
    Ok(cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let (c, s) = (c.clamp(-1.0, 1.0), s.clamp(0.0, 1.0));
            if s * s <= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect())
}

/// Morgan angles: `arcsin √λ` over the positive eigenvalues `λ` of the form
/// `v ↦ dist²(v, β)` on `α`, ascending and with multiplicity.
pub fn morgan_angles(a: &Subspace, b: &Subspace) -> Result<AngleSpectrum> {
    let all = principal_angles(a, b)?;
    let angles = all
        .into_iter()
        .filter(|t| t.sin() > ZERO_ANGLE_TOL)
        .collect();
    Ok(AngleSpectrum { angles })
}

/// Hausdorff distance between `α ∩ B_1` and `β ∩ B_1`, which equals the sine
/// of the largest Morgan angle.
pub fn unit_ball_hausdorff(a: &Subspace, b: &Subspace) -> Result<f64> {
    let spec = morgan_angles(a, b)?;
    Ok(spec.largest().map_or(0.0, f64::sin))
}

/// The canonical element of `SO(ambient)` carrying `α` onto `β`.
///
/// On `α` it sends each eigenvector `v_i` of `dist²(·, β)` to the normalized
/// projection `p_β(v_i)`; on `α^⊥` it does the same with `β^⊥`. Written in
/// terms of the SVD `αᵀβ = U Σ Wᵀ` this is `β W Uᵀ αᵀ`, and the product
/// `W Uᵀ` does not depend on how repeated singular values are resolved.
pub fn canonical_rotation(a: &Subspace, b: &Subspace) -> Result<DMatrix<f64>> {
    check_pair(a, b)?;
    if let Some(t) = morgan_angles(a, b)?.largest() {
        if t >= FRAC_PI_2 - ORTHOGONAL_GUARD {
            return Err(Error::DegeneratePair(t));
        }
    }
    let a_perp = a.orthogonal_complement();
    let b_perp = b.orthogonal_complement();
    let mut r = polar_block(a, b);
    r += polar_block(&a_perp, &b_perp);
    Ok(r)
}

/// `Σ_i w_i v_iᵀ` for the eigenvector pairing of `a` with `b`.
fn polar_block(a: &Subspace, b: &Subspace) -> DMatrix<f64> {
    let n = a.ambient_dim();
    if a.dim() == 0 {
        return DMatrix::zeros(n, n);
    }
    let c = a.frame.transpose() * &b.frame;
    let f = svd(&c);
    let u = f.u;
    let w = f.v_t.transpose();
    &b.frame * w * u.transpose() * a.frame.transpose()
}

/// The two nonzero singular values (ascending) of `B = (L1 - L2) / 2`.
pub fn half_difference_singular_values(l1: &DMatrix<f64>, l2: &DMatrix<f64>) -> Result<(f64, f64)> {
    if l1.shape() != l2.shape() {
        return Err(Error::DimensionMismatch {
            expected: l1.nrows() * l1.ncols(),
            got: l2.nrows() * l2.ncols(),
        });
    }
    let b = (l1 - l2) * 0.5;
    let s = sorted_singular_values(b, true);
    let top = s.first().copied().unwrap_or(0.0);
    let tol = RANK_TOL * top.max(f64::MIN_POSITIVE);
    let rank = s.iter().filter(|&&x| x > tol).count();
    if rank != 2 {
        return Err(Error::RankMismatch(rank));
    }
    Ok((s[1], s[0]))
}

/// `σ_max(B) / σ_min(B)` for a linear map of the plane.
pub fn quasiconformality_ratio(b: &DMatrix<f64>) -> Result<f64> {
    if b.shape() != (2, 2) {
        return Err(Error::param("quasiconformality ratio needs a 2x2 map"));
    }
    if b.amax() == 0.0 {
        return Err(Error::ZeroMap);
    }
    let s = sorted_singular_values(b.clone(), true);
    if s[1] < 1e-14 {
        return Err(Error::DegenerateMap(s[1]));
    }
    Ok(s[0] / s[1])
}
