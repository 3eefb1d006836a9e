use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmer_core::geometry::{
    chord_bound, hausdorff_raw, hd, identity_assignment, DeadReckoning, Dim, PointCloud, Translation, Vec3,
};

/// Textbook O(n m) Hausdorff distance.
fn brute_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let directed = |x: &[Vec3], y: &[Vec3]| {
        x.iter()
            .map(|p| y.iter().map(|q| ((p.l - q.l).powi(2) + (p.h - q.h).powi(2) + (p.d - q.d).powi(2)).sqrt()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

fn point() -> impl Strategy<Value = Vec3> {
    (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(l, h, d)| Vec3::new(l, h, d))
}

proptest! {
    #[test]
    fn hausdorff_matches_brute_force(a in prop::collection::vec(point(), 1..60), b in prop::collection::vec(point(), 1..60)) {
        let fast = hausdorff_raw(&a, &b).unwrap();
        prop_assert_eq!(fast, brute_hausdorff(&a, &b));
        prop_assert_eq!(fast, hausdorff_raw(&b, &a).unwrap());
        prop_assert_eq!(hausdorff_raw(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn rigid_shift_is_invisible_to_centroid_hd(a in prop::collection::vec(point(), 1..40), s in point()) {
        let moved: Vec<Vec3> = a.iter().map(|&p| p + s).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = hd(&moved, &a, &identity_assignment(a.len()), Translation::Centroid, &mut rng).unwrap();
        prop_assert!(v < 1e-9);
    }

    #[test]
    fn reckoning_preserves_length_and_stays_in_cone(
        start in point(), dest in point(), eps in 0.0..30.0f64, seed in any::<u64>(), planar in any::<bool>()
    ) {
        let (dim, start, dest) = if planar {
            (Dim::Two, Vec3::planar(start.l, start.h), Vec3::planar(dest.l, dest.h))
        } else {
            (Dim::Three, start, dest)
        };
        let mut dr = DeadReckoning::new(eps, ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let end = dr.reckon(start, dest, dim);
        let len = start.distance(dest);
        prop_assert!((start.distance(end) - len).abs() <= 1e-9 * len.max(1.0));
        prop_assert!(end.distance(dest) <= chord_bound(len, eps) + 1e-9);
        if planar {
            prop_assert_eq!(end.d, 0.0);
        }
    }
}

#[test]
fn chord_bound_hand_value() {
    // 2 * 100 * sin(2.5 deg)
    assert!((chord_bound(100.0, 5.0) - 8.723_877_473_067_224).abs() < 1e-12);
}

#[test]
fn zero_epsilon_lands_exactly() {
    let mut dr = DeadReckoning::new(0.0, ChaCha8Rng::seed_from_u64(3)).unwrap();
    let dest = Vec3::new(3.0, -4.0, 12.0);
    assert_eq!(dr.reckon(Vec3::ZERO, dest, Dim::Three), dest);
}

#[test]
fn bad_epsilon_rejected() {
    assert!(DeadReckoning::new(-1.0, ChaCha8Rng::seed_from_u64(0)).is_err());
    assert!(DeadReckoning::new(180.0, ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn cloud_text_round_trip_and_dedup() {
    let (c, report) = PointCloud::parse("1 2 3\n4 5 6\n1 2 3\n").unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(report.duplicates, 1);
    let (back, _) = PointCloud::parse(&c.to_text()).unwrap();
    assert_eq!(back, c);
    let (flat, _) = PointCloud::parse("0 0\n1 1\n").unwrap();
    assert_eq!(flat.dim(), Dim::Two);
}

#[test]
fn malformed_cloud_names_the_line() {
    let err = PointCloud::parse("0 0 0\n1 2 3 4\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    assert!(PointCloud::parse("0 0 nan\n").is_err());
    assert!(PointCloud::parse("").is_err());
}
