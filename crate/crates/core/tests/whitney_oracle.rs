use nalgebra::DVector;

use conekit_core::cone::PlaneCone;
use conekit_core::excess::SampledCurrent;
use conekit_core::random::plane_pair_with_angles;
use conekit_core::sampling;
use conekit_core::whitney::{cubes_at_generation, CurrentOracle, WhitneyCube, WhitneyGeometry, DEFAULT_RHO_STAR};

/// Point above the center of `l`, at spine distance `r` inside the first
/// plane, pushed off that plane by `d`.
fn sample_point(s: &PlaneCone, l: &WhitneyCube, r: f64, d: f64) -> DVector<f64> {
    let plane = &s.planes()[0];
    let along = plane.relative_complement(s.spine()).unwrap().basis_vector(0);
    let off = plane.orthogonal_complement().basis_vector(0);
    s.origin() + s.spine().embed(&l.center_coords()) + along * r + off * d
}

fn oracle_for(s: &PlaneCone, points: Vec<DVector<f64>>, weights: Vec<f64>) -> CurrentOracle {
    let t = SampledCurrent::new(s.ambient_dim(), s.m(), points, weights, None).unwrap();
    let layer = s.sub_cone(&[0]).unwrap();
    let geometry = WhitneyGeometry::from_cone(s, DEFAULT_RHO_STAR).unwrap();
    CurrentOracle::new(&t, &[layer], &geometry).unwrap()
}

#[test]
fn single_sample_gives_scaled_squared_distance() {
    let mut rng = sampling::rng(7);
    let s = plane_pair_with_angles(3, 2, 0.8, 0.8, &mut rng).unwrap();
    let (w, d) = (0.37, 1e-3);
    for ell in 0..=3u32 {
        let h = (2.0f64).powi(-(ell as i32));
        for l in cubes_at_generation(ell, 3).unwrap() {
            let oracle = oracle_for(&s, vec![sample_point(&s, &l, 0.75 * h, d)], vec![w]);
            let expected = (2.0f64).powi(5 * ell as i32) * w * d * d;
            let got = oracle.excess(&l, 0).unwrap();
            assert!((got - expected).abs() <= 1e-9 * expected, "ℓ={ell}: {got} vs {expected}");
        }
    }
}

#[test]
fn samples_in_the_spine_tube_or_far_away_do_not_count() {
    let mut rng = sampling::rng(8);
    let s = plane_pair_with_angles(3, 2, 0.5, 0.5, &mut rng).unwrap();
    let l = cubes_at_generation(2, 3).unwrap().remove(1);
    let h = 0.25;
    let tube = sample_point(&s, &l, 0.5 * DEFAULT_RHO_STAR * h, 1e-2);
    let far = sample_point(&s, &l, 4.5 * h, 1e-2);
    let oracle = oracle_for(&s, vec![tube, far], vec![1.0, 1.0]);
    assert_eq!(oracle.excess(&l, 0).unwrap(), 0.0);
}

#[test]
fn layer_index_out_of_range_is_rejected() {
    let mut rng = sampling::rng(9);
    let s = plane_pair_with_angles(3, 2, 0.5, 0.5, &mut rng).unwrap();
    let l = cubes_at_generation(0, 3).unwrap().remove(0);
    let oracle = oracle_for(&s, vec![sample_point(&s, &l, 0.5, 0.0)], vec![1.0]);
    assert!(oracle.excess(&l, 1).is_err());
}
