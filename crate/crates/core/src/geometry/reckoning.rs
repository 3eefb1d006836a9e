use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Dim, GeometryError, Vec3};

/// Upper bound on how far a dead-reckoned flight of length `len` can land
/// from its intended destination: the chord subtending `2 * (eps / 2)`.
pub fn chord_bound(len: f64, epsilon_deg: f64) -> f64 {
    2.0 * len * (epsilon_deg.to_radians() / 2.0).sin()
}

/// Deterministic core of the error model. Flies from `start` toward `dest`
/// with the heading rotated by `delta` radians. In 3D the rotation happens in
/// the plane selected by `vartheta` around the ideal axis.
pub fn deviate(start: Vec3, dest: Vec3, delta: f64, vartheta: f64, dim: Dim) -> Vec3 {
    let ideal = dest - start;
    let len = ideal.norm();
    let Some(u) = ideal.normalized() else {
        return start;
    };
    let dir = match dim {
        Dim::Two => {
            let (s, c) = delta.sin_cos();
            Vec3::planar(u.l * c - u.h * s, u.l * s + u.h * c)
        }
        Dim::Three => {
            let (p, q) = basis(u);
            let (s, c) = delta.sin_cos();
            let (st, ct) = vartheta.sin_cos();
            u * c + (p * ct + q * st) * s
        }
    };
    start + dir * len
}

/// Two unit vectors completing `u` to an orthonormal frame. The seed axis is
/// H; a heading (almost) parallel to H falls back to L.
fn basis(u: Vec3) -> (Vec3, Vec3) {
    let seed = if u.cross(Vec3::H_AXIS).norm() > 1e-6 { Vec3::H_AXIS } else { Vec3::L_AXIS };
    let p = u.cross(seed).normalized().expect("seed axis is not parallel");
    let q = u.cross(p);
    (p, q)
}

/// Seeded dead-reckoning error source.
#[derive(Debug, Clone)]
pub struct DeadReckoning {
    epsilon_deg: f64,
    rng: ChaCha8Rng,
}

impl DeadReckoning {
    pub fn new(epsilon_deg: f64, rng: ChaCha8Rng) -> Result<Self, GeometryError> {
        if !(0.0..180.0).contains(&epsilon_deg) {
            return Err(GeometryError::InvalidEpsilon(epsilon_deg));
        }
        Ok(DeadReckoning { epsilon_deg, rng })
    }

    pub fn epsilon_deg(&self) -> f64 {
        self.epsilon_deg
    }

    /// Actual endpoint of a flight from `start` aimed at `dest`. Zero-length
    /// flights and `epsilon == 0` consume no randomness.
    pub fn reckon(&mut self, start: Vec3, dest: Vec3, dim: Dim) -> Vec3 {
        if start == dest || self.epsilon_deg == 0.0 {
            return dest;
        }
        let eps = self.epsilon_deg.to_radians();
        let delta = self.rng.gen_range(-eps..=eps);
        let vartheta = match dim {
            Dim::Two => 0.0,
            Dim::Three => self.rng.gen_range(0.0..std::f64::consts::TAU),
        };
        deviate(start, dest, delta, vartheta, dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn model(eps: f64, seed: u64) -> DeadReckoning {
        DeadReckoning::new(eps, ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_epsilon_is_exact() {
        let mut m = model(0.0, 1);
        let end = m.reckon(Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0), Dim::Three);
        assert_eq!(end, Vec3::new(10.0, 0.0, 0.0));
    }

    #[test]
    fn forced_extreme_angle_hits_the_chord() {
        let dest = Vec3::new(10.0, 0.0, 0.0);
        for dim in [Dim::Two, Dim::Three] {
            let end = deviate(Vec3::ZERO, dest, 5f64.to_radians(), 1.0, dim);
            // independent trig: the endpoint sits on the circle of radius 10
            // at 5 degrees from the L axis
            let expect = ((10.0 - 10.0 * 5f64.to_radians().cos()).powi(2)
                + (10.0 * 5f64.to_radians().sin()).powi(2))
            .sqrt();
            assert!((end.distance(dest) - expect).abs() < 1e-12);
            assert!((end.distance(dest) - 0.8724).abs() < 1e-4);
            assert!((end.norm() - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_to_seed_axis_uses_fallback() {
        let end = deviate(Vec3::ZERO, Vec3::new(0.0, 20.0, 0.0), 0.1, 0.3, Dim::Three);
        assert!(end.is_finite());
        assert!((end.norm() - 20.0).abs() < 1e-9);
        assert!((end.angle_to(Vec3::H_AXIS) - 0.1).abs() < 1e-9);
    }

    #[test]
    fn zero_length_consumes_nothing() {
        let mut a = model(5.0, 3);
        let mut b = model(5.0, 3);
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(a.reckon(p, p, Dim::Three), p);
        let q = Vec3::new(4.0, 5.0, 6.0);
        assert_eq!(a.reckon(p, q, Dim::Three), b.reckon(p, q, Dim::Three));
    }

    #[test]
    fn rejects_bad_epsilon() {
        let r = |e| DeadReckoning::new(e, ChaCha8Rng::seed_from_u64(0));
        assert!(r(-1.0).is_err());
        assert!(r(180.0).is_err());
        assert!(r(f64::NAN).is_err());
    }

    #[test]
    fn sampled_3d_flights_respect_the_dome() {
        let mut m = model(3.0, 11);
        let dest = Vec3::new(0.0, 20.0, 0.0);
        for _ in 0..10_000 {
            let end = m.reckon(Vec3::ZERO, dest, Dim::Three);
            assert!((end.norm() - 20.0).abs() < 1e-9);
            assert!(end.angle_to(dest).to_degrees() <= 3.0 + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn length_and_chord_bound_hold(
            s in prop::array::uniform3(-100.0f64..100.0),
            t in prop::array::uniform3(-100.0f64..100.0),
            eps in 0.0f64..90.0,
            seed in any::<u64>(),
            three in any::<bool>(),
        ) {
            let dim = if three { Dim::Three } else { Dim::Two };
            let start = Vec3::new(s[0], s[1], if three { s[2] } else { 0.0 });
            let dest = Vec3::new(t[0], t[1], if three { t[2] } else { 0.0 });
            let len = start.distance(dest);
            let end = model(eps, seed).reckon(start, dest, dim);
            prop_assert!((end.distance(start) - len).abs() <= 1e-9 * len.max(1.0));
            prop_assert!(end.distance(dest) <= chord_bound(len, eps) + 1e-9);
            if !three {
                prop_assert_eq!(end.d, 0.0);
            }
        }
    }
}
