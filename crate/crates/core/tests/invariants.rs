use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::RngExt;

use conekit_core::clustering::{cluster_split, PointSet};
use conekit_core::cone::{layer_subdivide, prune, prune_constants, GapMatrix};
use conekit_core::excess::{read_current, write_current, BodyFormat, SampledCurrent, TangentFrame};
use conekit_core::geometry::{canonical_rotation, morgan_angles, principal_angles, unit_ball_hausdorff};
use conekit_core::random::{multiscale_cone, random_rotation, random_subspace};
use conekit_core::sampling;
use conekit_core::whitney::{in_region, locate_normalized};

/// Distances between random points satisfy the triangle inequality by construction.
fn gaps_from_points(seed: u64, n: usize) -> GapMatrix {
    let mut rng = sampling::rng(seed);
    let pts: Vec<DVector<f64>> = (0..n)
        .map(|_| DVector::from_fn(3, |_, _| rng.random::<f64>()))
        .collect();
    let g = DMatrix::from_fn(n, n, |i, j| (&pts[i] - &pts[j]).norm());
    GapMatrix::new(g).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angles_are_symmetric_and_bounded(seed in any::<u64>(), ambient in 2usize..7, dim in 1usize..4) {
        prop_assume!(dim < ambient);
        let mut rng = sampling::rng(seed);
        let a = random_subspace(ambient, dim, &mut rng);
        let b = random_subspace(ambient, dim, &mut rng);
        let ab = morgan_angles(&a, &b).unwrap();
        let ba = morgan_angles(&b, &a).unwrap();
        prop_assert_eq!(ab.len(), ba.len());
        for (x, y) in ab.angles.iter().zip(&ba.angles) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!(ab.angles.iter().all(|t| (0.0..=FRAC_PI_2 + 1e-12).contains(t)));
        prop_assert!(ab.angles.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hausdorff_is_sine_of_largest_angle(seed in any::<u64>(), ambient in 2usize..7, dim in 1usize..4) {
        prop_assume!(dim < ambient);
        let mut rng = sampling::rng(seed);
        let a = random_subspace(ambient, dim, &mut rng);
        let b = random_subspace(ambient, dim, &mut rng);
        let largest = principal_angles(&a, &b).unwrap().into_iter().fold(0.0, f64::max);
        let h = unit_ball_hausdorff(&a, &b).unwrap();
        prop_assert!((h - largest.sin()).abs() < 1e-9);
    }

    #[test]
    fn hausdorff_is_a_rotation_invariant_metric(seed in any::<u64>(), ambient in 3usize..7, dim in 1usize..3) {
        let mut rng = sampling::rng(seed);
        let a = random_subspace(ambient, dim, &mut rng);
        let b = random_subspace(ambient, dim, &mut rng);
        let c = random_subspace(ambient, dim, &mut rng);
        let ab = unit_ball_hausdorff(&a, &b).unwrap();
        let bc = unit_ball_hausdorff(&b, &c).unwrap();
        let ac = unit_ball_hausdorff(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(unit_ball_hausdorff(&a, &a).unwrap() < 1e-12);
        let r = random_rotation(ambient, &mut rng);
        let moved = unit_ball_hausdorff(&a.transformed(&r).unwrap(), &b.transformed(&r).unwrap()).unwrap();
        prop_assert!((moved - ab).abs() < 1e-10);
    }

    #[test]
    fn canonical_rotation_maps_plane_onto_plane(seed in any::<u64>(), ambient in 2usize..7, dim in 1usize..4) {
        prop_assume!(dim < ambient);
        let mut rng = sampling::rng(seed);
        let a = random_subspace(ambient, dim, &mut rng);
        let b = random_subspace(ambient, dim, &mut rng);
        let largest = principal_angles(&a, &b).unwrap().into_iter().fold(0.0, f64::max);
        prop_assume!(largest < FRAC_PI_2 - 1e-3);
        let r = canonical_rotation(&a, &b).unwrap();
        let id = DMatrix::<f64>::identity(ambient, ambient);
        prop_assert!((r.transpose() * &r - id).amax() < 1e-10);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-10);
        let image = &r * a.frame();
        for col in image.column_iter() {
            prop_assert!(b.dist(&col.into_owned()) < 1e-10);
        }
    }

    #[test]
    fn prune_holds_below_scale_and_refuses_above(seed in any::<u64>(), n in 2usize..7, delta in 0.1f64..0.9, t in 0.0f64..1.0) {
        let g = gaps_from_points(seed, n);
        let (_, eps) = prune_constants(n, delta);
        let top = eps * g.max_gap(&g.all());
        let cert = prune(&g, top * t, delta).unwrap();
        prop_assert!(cert.holds());
        prop_assert!(prune(&g, top * 1.5, delta).is_err());
    }

    #[test]
    fn layers_hold_on_multiscale_families(seed in any::<u64>(), n in 2usize..6, delta in 0.1f64..0.9) {
        let mut rng = sampling::rng(seed);
        let g = multiscale_cone(3, 2, n, &mut rng).unwrap().gap_matrix();
        prop_assert!(layer_subdivide(&g, delta).unwrap().holds());
        let flat = gaps_from_points(seed, n);
        prop_assert!(layer_subdivide(&flat, delta).unwrap().holds());
    }

    #[test]
    fn split_partitions_the_points(xs in prop::collection::vec(-10.0f64..10.0, 2..20)) {
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.first() != sorted.last());
        let p = PointSet::on_line(&xs).unwrap();
        let c = cluster_split(&p).unwrap();
        prop_assert!(c.holds);
        let mut all: Vec<usize> = c.first.iter().chain(&c.second).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..xs.len()).collect::<Vec<_>>());
    }

    #[test]
    fn current_roundtrips_exactly(seed in any::<u64>(), count in 1usize..40, frames in any::<bool>(), binary in any::<bool>()) {
        let mut rng = sampling::rng(seed);
        let (ambient, m) = (4, 2);
        let points: Vec<DVector<f64>> = (0..count)
            .map(|_| DVector::from_fn(ambient, |_, _| rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let weights: Vec<f64> = (0..count).map(|_| rng.random::<f64>() + 1e-3).collect();
        let frames = frames.then(|| {
            (0..count)
                .map(|_| TangentFrame {
                    frame: random_subspace(ambient, m, &mut rng).frame().clone(),
                    sign: if rng.random::<bool>() { 1.0 } else { -1.0 },
                })
                .collect()
        });
        let t = SampledCurrent::new(ambient, m, points, weights, frames).unwrap();
        let format = if binary { BodyFormat::Binary } else { BodyFormat::Csv };
        let mut buf = Vec::new();
        write_current(&t, format, &mut buf).unwrap();
        let back = read_current(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn every_region_point_has_a_cube(y in prop::collection::vec(-1.0f64..=1.0, 1..4), r in 1e-3f64..=1.0) {
        let cubes = locate_normalized(&y, r, 12);
        prop_assert!(!cubes.is_empty());
        prop_assert!(cubes.iter().all(|l| in_region(&y, r, l)));
    }
}
