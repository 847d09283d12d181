//! Deterministic low-discrepancy point sets and seed streams.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

/// Van der Corput radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// The `i`-th point of the Halton sequence in `[0,1)^dim`.
pub fn halton(i: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton dimension {dim} too large");
    PRIMES[..dim].iter().map(|&p| radical_inverse(i, p)).collect()
}

/// Map `2k` uniforms in `(0,1)` to `2k` standard normals (Box–Muller).
fn gaussians(u: &[f64], dim: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(dim);
    for pair in u.chunks(2) {
        let r = (-2.0 * pair[0].max(1e-300).ln()).sqrt();
        let t = 2.0 * PI * pair[1];
        g.push(r * t.cos());
        g.push(r * t.sin());
    }
    g.truncate(dim);
    g
}

fn halton_gauss(i: u64, dim: usize, extra: usize) -> (Vec<f64>, Vec<f64>) {
    let k = dim.div_ceil(2) * 2;
    // skip index 0, whose coordinates are all zero
    let u = halton(i + 1, k + extra);
    (gaussians(&u[..k], dim), u[k..].to_vec())
}

/// `count` deterministic, well-spread points on the unit sphere `S^{dim-1}`.
pub fn sphere_points(dim: usize, count: usize) -> Vec<DVector<f64>> {
    if dim == 1 {
        return (0..count)
            .map(|i| DVector::from_element(1, if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
    }
    (0..count as u64)
        .map(|i| {
            let (g, _) = halton_gauss(i, dim, 0);
            let v = DVector::from_vec(g);
            let n = v.norm();
            v / n
        })
        .collect()
}

/// `count` deterministic points filling the closed unit ball of `R^dim`,
/// uniformly distributed in volume.
pub fn ball_points(dim: usize, count: usize) -> Vec<DVector<f64>> {
    (0..count as u64)
        .map(|i| {
            let (g, rest) = halton_gauss(i, dim, 1);
            let v = DVector::from_vec(g);
            let n = v.norm();
            let radius = rest[0].powf(1.0 / dim as f64);
            v * (radius / n)
        })
        .collect()
}

/// Approximate `sup f` over the unit sphere: evaluate on `dirs`, then polish
/// the best few candidates by a shrinking-step pattern search.
pub fn maximize_on_sphere<F: Fn(&DVector<f64>) -> f64>(dirs: &[DVector<f64>], f: F) -> f64 {
    let mut scored: Vec<(f64, usize)> = dirs.iter().enumerate().map(|(i, d)| (f(d), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let Some(&(top, _)) = scored.first() else {
        return f64::NEG_INFINITY;
    };
    let dim = dirs[0].len();
    if dim < 2 {
        return top;
    }
    let mut best = top;
    for &(start_val, i) in scored.iter().take(4) {
        let mut x = dirs[i].clone();
        let mut fx = start_val;
        let mut step = 0.05;
        let mut evals = 0;
        while step > 1e-10 && evals < 4000 {
            let mut improved = false;
            for k in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[k] += sign * step;
                    let n = y.norm();
                    y /= n;
                    let fy = f(&y);
                    evals += 1;
                    if fy > fx {
                        x = y;
                        fx = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(fx);
    }
    best
}

/// SplitMix64 finalizer, used to derive independent per-trial seeds from a
/// master seed and a trial counter.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
