//! Synthetic samples of graph-like perturbations of a cone.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{unit_ball_volume, SampledCurrent, TangentFrame};
use crate::cone::PlaneCone;
use crate::error::{Error, Result};
use crate::geometry::{orthonormalize, Subspace};
use crate::random::{ball_point, gaussian_vector};
use crate::sampling;

const MODES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Sup bound `h` of the smooth perpendicular displacement.
    pub amplitude: f64,
    /// Standard deviation of the Gaussian perpendicular noise.
    pub noise: f64,
    /// Uniform candidate draws per plane in `B_1 ∩ α`; those inside the
    /// spine tube are rejected.
    pub density: usize,
    /// Radius `ρ` of the spine tube left empty.
    pub inner_cutoff: f64,
    pub frames: bool,
    pub seed: u64,
}

struct Mode {
    freq: DVector<f64>,
    phase: f64,
    coeff: f64,
    dir: DVector<f64>,
}

/// Samples every plane `α` of `S` on `B_1 \ B_ρ(V)`, moving each point by
/// `h Σ_k c_k sin(ω_k·u + φ_k) u_k` (with `Σ c_k = 1`, `u_k` unit vectors of
/// `α^⊥`) plus Gaussian noise in `α^⊥`. All weights are `ω_m / density`.
pub fn synth_cone_sample(s: &PlaneCone, p: &SynthParams) -> Result<SampledCurrent> {
    if !(p.amplitude >= 0.0 && p.amplitude.is_finite()) || !(p.noise >= 0.0 && p.noise.is_finite()) {
        return Err(Error::param("amplitude and noise must be finite and nonnegative"));
    }
    if !(0.0..1.0).contains(&p.inner_cutoff) {
        return Err(Error::param("inner cutoff must lie in [0, 1)"));
    }
    if p.density == 0 {
        return Err(Error::param("density must be positive"));
    }
    let m = s.m();
    let n = s.ambient_dim();
    let mut rng = sampling::rng(p.seed);
    let weight = unit_ball_volume(m) / p.density as f64;
    let mut points = Vec::new();
    let mut frames = Vec::new();
    for alpha in s.planes() {
        let perp = alpha.orthogonal_complement();
        let raw: Vec<f64> = (0..MODES).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = raw.iter().sum();
        let modes: Vec<Mode> = raw
            .iter()
            .map(|c| {
                let dir = if perp.dim() == 0 {
                    DVector::zeros(n)
                } else {
                    perp.embed(&gaussian_vector(perp.dim(), &mut rng).normalize())
                };
                Mode {
                    freq: ball_point(m, 3.0, &mut rng),
                    phase: rng.random::<f64>() * std::f64::consts::TAU,
                    coeff: c / total,
                    dir,
                }
            })
            .collect();
        for _ in 0..p.density {
            let u = ball_point(m, 1.0, &mut rng);
            let base = s.origin() + alpha.embed(&u);
            let noise: DVector<f64> = if perp.dim() > 0 {
                let g = DVector::from_fn(perp.dim(), |_, _| StandardNormal.sample(&mut rng));
                perp.embed(&(g * p.noise))
            } else {
                DVector::zeros(n)
            };
            if s.dist_to_spine(&base) < p.inner_cutoff {
                continue;
            }
            let mut x = base + noise;
            for md in &modes {
                x += &md.dir * (p.amplitude * md.coeff * (md.freq.dot(&u) + md.phase).sin());
            }
            points.push(x);
            if p.frames {
                frames.push(tangent(alpha, &modes, &u, p.amplitude)?);
            }
        }
    }
    let weights = vec![weight; points.len()];
    SampledCurrent::new(n, m, points, weights, p.frames.then_some(frames))
}

fn tangent(alpha: &Subspace, modes: &[Mode], u: &DVector<f64>, h: f64) -> Result<TangentFrame> {
    let (n, m) = (alpha.ambient_dim(), alpha.dim());
    let cols: Vec<DVector<f64>> = (0..m)
        .map(|j| {
            let mut t = alpha.basis_vector(j);
            for md in modes {
                t += &md.dir * (h * md.coeff * md.freq[j] * (md.freq.dot(u) + md.phase).cos());
            }
            t
        })
        .collect();
    let basis = orthonormalize(n, &cols)?;
    let mut frame = DMatrix::zeros(n, m);
    for (j, c) in basis.iter().enumerate() {
        frame.set_column(j, c);
    }
    Ok(TangentFrame { frame, sign: 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excess::one_sided_excess;

    fn cone() -> PlaneCone {
        PlaneCone::new(
            3,
            2,
            Subspace::coordinate(5, &[0]),
            vec![Subspace::coordinate(5, &[0, 1, 2]), Subspace::coordinate(5, &[0, 3, 4])],
        )
        .unwrap()
    }

    fn params(h: f64, noise: f64) -> SynthParams {
        SynthParams {
            amplitude: h,
            noise,
            density: 500,
            inner_cutoff: 0.05,
            frames: true,
            seed: 11,
        }
    }

    #[test]
    fn flat_sample_lies_on_cone() {
        let s = cone();
        let t = synth_cone_sample(&s, &params(0.0, 0.0)).unwrap();
        assert!(t.len() > 800);
        assert!(one_sided_excess(&t, &s, &DVector::zeros(5), 2.0).unwrap() < 1e-28);
    }

    #[test]
    fn amplitude_bounds_excess() {
        let s = cone();
        let t = synth_cone_sample(&s, &params(0.01, 0.0)).unwrap();
        let e = one_sided_excess(&t, &s, &DVector::zeros(5), 1.0).unwrap();
        assert!(e > 0.0);
        assert!(e <= 1e-4 * t.mass_in_ball(&DVector::zeros(5), 1.0));
    }

    #[test]
    fn deterministic() {
        let s = cone();
        let a = synth_cone_sample(&s, &params(0.02, 0.01)).unwrap();
        let b = synth_cone_sample(&s, &params(0.02, 0.01)).unwrap();
        assert_eq!(a, b);
    }
}
