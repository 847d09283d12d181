//! Random subspaces, rotations and cones for tests and campaigns.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

use crate::cone::PlaneCone;
use crate::error::{Error, Result};
use crate::geometry::Subspace;

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Uniformly distributed point of the ball of radius `r` in `R^n`.
pub fn ball_point<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> DVector<f64> {
    let g = gaussian_vector(n, rng);
    let u: f64 = rng.random();
    g.normalize() * (r * u.powf(1.0 / n as f64))
}

/// Haar-distributed `dim`-dimensional subspace of `R^ambient`.
pub fn random_subspace<R: Rng + ?Sized>(ambient: usize, dim: usize, rng: &mut R) -> Subspace {
    loop {
        let cols: Vec<DVector<f64>> = (0..dim).map(|_| gaussian_vector(ambient, rng)).collect();
        if let Ok(s) = Subspace::span(ambient, &cols) {
            return s;
        }
    }
}

/// Random `dim`-dimensional subspace of the given subspace `within`.
pub fn random_subspace_of<R: Rng + ?Sized>(within: &Subspace, dim: usize, rng: &mut R) -> Subspace {
    let inner = random_subspace(within.dim(), dim, rng);
    Subspace::from_orthonormal(within.frame() * inner.frame()).expect("isometric embedding")
}

/// Haar-distributed element of `SO(n)`.
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    if q.determinant() < 0.0 {
        let mut col = q.column_mut(0);
        col *= -1.0;
    }
    q
}

/// `exp(K)` for a random skew-symmetric `K` with Frobenius norm `angle`.
pub fn small_rotation<R: Rng + ?Sized>(n: usize, angle: f64, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, rng);
    rotation_from_generator(&(&g - g.transpose()), angle)
}

/// `exp(K)` for the skew part `K` of `g` scaled to Frobenius norm `angle`,
/// so no vector is turned by more than `angle`.
pub fn rotation_from_generator(g: &DMatrix<f64>, angle: f64) -> DMatrix<f64> {
    let k = (g - g.transpose()) * 0.5;
    let norm = k.norm();
    if norm == 0.0 {
        return DMatrix::identity(g.nrows(), g.ncols());
    }
    let k = k * (angle / norm);
    if angle > 0.1 {
        return k.exp();
    }
    // the series converges to machine precision within a few terms
    let n = g.nrows();
    let mut out = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for i in 1..30 {
        term = &term * &k / i as f64;
        out += &term;
        if term.amax() < f64::EPSILON * 1e-3 {
            break;
        }
    }
    out
}

/// The plane `span{(cos t, 0, sin t, 0), (0, cos t, 0, sin t)}` of `R⁴`. Two
/// such planes at parameters `s`, `t` meet at the double Morgan angle `|s - t|`.
pub fn isoclinic_plane(t: f64) -> Subspace {
    let (c, s) = (t.cos(), t.sin());
    let frame = DMatrix::from_row_slice(4, 2, &[c, 0.0, 0.0, c, s, 0.0, 0.0, s]);
    Subspace::from_orthonormal(frame).expect("orthonormal by construction")
}

/// A generic cone: random (m-2)-spine and `n_planes` planes, each the spine
/// plus a random 2-plane of its orthogonal complement.
pub fn random_cone<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    n_planes: usize,
    capacity: usize,
    rng: &mut R,
) -> Result<PlaneCone> {
    if m < 2 || n < 1 {
        return Err(Error::param("need m ≥ 2 and n ≥ 1"));
    }
    let ambient = m + n;
    for _ in 0..100 {
        let spine = random_subspace(ambient, m - 2, rng);
        let comp = spine.orthogonal_complement();
        let planes: Vec<Subspace> = (0..n_planes)
            .map(|_| {
                let w = random_subspace_of(&comp, 2, rng);
                let cols: Vec<DVector<f64>> = (0..m - 2)
                    .map(|i| spine.basis_vector(i))
                    .chain((0..2).map(|i| w.basis_vector(i)))
                    .collect();
                Subspace::span(ambient, &cols).expect("spine and complement are independent")
            })
            .collect();
        if let Ok(c) = PlaneCone::new(m, capacity, spine, planes) {
            return Ok(c);
        }
    }
    Err(Error::InvalidCone("failed to generate a generic cone".into()))
}

/// A random `M`-balanced cone, drawn by rejection from [`random_cone`].
pub fn random_balanced_cone<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    n_planes: usize,
    big_m: f64,
    rng: &mut R,
) -> Result<PlaneCone> {
    for _ in 0..100_000 {
        let c = random_cone(m, n, n_planes, n_planes, rng)?;
        if c.is_balanced(big_m).balanced {
            return Ok(c);
        }
    }
    Err(Error::InvalidCone(format!(
        "no {big_m}-balanced cone with {n_planes} planes found"
    )))
}

/// Two planes through a common spine with prescribed Morgan angles `(t1, t2)`,
/// rotated into a random position in `R^{m+n}` (`n ≥ 2`).
pub fn plane_pair_with_angles<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    t1: f64,
    t2: f64,
    rng: &mut R,
) -> Result<PlaneCone> {
    if m < 2 || n < 2 {
        return Err(Error::param("need m ≥ 2 and n ≥ 2"));
    }
    let ambient = m + n;
    let e = |i: usize| {
        let mut v = DVector::zeros(ambient);
        v[i] = 1.0;
        v
    };
    let spine_cols: Vec<DVector<f64>> = (0..m - 2).map(e).collect();
    let mut a_cols = spine_cols.clone();
    a_cols.push(e(m - 2));
    a_cols.push(e(m - 1));
    let mut b_cols = spine_cols.clone();
    b_cols.push(e(m - 2) * t1.cos() + e(m) * t1.sin());
    b_cols.push(e(m - 1) * t2.cos() + e(m + 1) * t2.sin());
    let spine = Subspace::span(ambient, &spine_cols)?;
    let a = Subspace::span(ambient, &a_cols)?;
    let b = Subspace::span(ambient, &b_cols)?;
    let cone = PlaneCone::new(m, 2, spine, vec![a, b])?;
    cone.rotated(&random_rotation(ambient, rng))
}

/// Rotation by `exp(K)` inside `V^⊥` (random skew `K` of norm `angle`), the
/// identity on `V`.
pub fn rotation_fixing<R: Rng + ?Sized>(spine: &Subspace, angle: f64, rng: &mut R) -> DMatrix<f64> {
    let comp = spine.orthogonal_complement();
    let k = comp.dim();
    let inner = if k < 2 {
        DMatrix::identity(k, k)
    } else {
        small_rotation(k, angle, rng)
    };
    spine.projector() + comp.frame() * inner * comp.frame().transpose()
}

/// A cone whose pairwise gaps span several scales: each new plane is a
/// spine-fixing rotation of an earlier one by an angle `10^{-u}`,
/// `u ∈ [0, 3)`, or a fresh random plane.
pub fn multiscale_cone<R: Rng + ?Sized>(m: usize, n: usize, n_planes: usize, rng: &mut R) -> Result<PlaneCone> {
    for _ in 0..100 {
        let base = random_cone(m, n, 1, n_planes, rng)?;
        let spine = base.spine().clone();
        let mut planes = vec![base.plane(0).clone()];
        while planes.len() < n_planes {
            let fresh = rng.random::<f64>() < 0.25;
            if fresh {
                let c = random_cone(m, n, 1, 1, rng)?;
                let rot = subspace_map(c.spine(), &spine);
                planes.push(c.plane(0).transformed(&rot)?);
            } else {
                let parent = planes[rng.random_range(0..planes.len())].clone();
                let angle = 10f64.powf(-3.0 * rng.random::<f64>());
                planes.push(parent.transformed(&rotation_fixing(&spine, angle, rng))?);
            }
        }
        if let Ok(c) = PlaneCone::new(m, n_planes, spine, planes) {
            return Ok(c);
        }
    }
    Err(Error::InvalidCone("failed to generate a multiscale cone".into()))
}

/// An orthogonal map carrying the subspace `from` onto `to` (equal dimensions).
fn subspace_map(from: &Subspace, to: &Subspace) -> DMatrix<f64> {
    let n = from.ambient_dim();
    let extend = |s: &Subspace| {
        let mut f = DMatrix::zeros(n, n);
        f.columns_mut(0, s.dim()).copy_from(s.frame());
        let c = s.orthogonal_complement();
        f.columns_mut(s.dim(), n - s.dim()).copy_from(c.frame());
        f
    };
    extend(to) * extend(from).transpose()
}
