//! Rest-to-rest flight timing.

/// Velocity limits in metres per second and metres per second squared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityProfile {
    pub v_max: f64,
    pub a_max: f64,
}

/// Seconds needed to fly `distance_cells` starting and ending at rest:
/// accelerate at `a_max`, cruise at `v_max`, brake at `a_max`. Short hops
/// never reach `v_max` and use a triangular profile.
pub fn travel_time(distance_cells: f64, profile: VelocityProfile, cell_size_m: f64) -> f64 {
    let x = distance_cells.max(0.0) * cell_size_m;
    let VelocityProfile { v_max, a_max } = profile;
    if x == 0.0 {
        return 0.0;
    }
    if x < v_max * v_max / a_max {
        2.0 * (x / a_max).sqrt()
    } else {
        x / v_max + v_max / a_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: VelocityProfile = VelocityProfile { v_max: 3.0, a_max: 3.0 };

    /// Numerically integrates the bang-coast-bang profile.
    fn simulate(x: f64) -> f64 {
        let dt = 1e-6;
        let (mut pos, mut v, mut t) = (0.0f64, 0.0f64, 0.0f64);
        while pos < x {
            let brake = v * v / (2.0 * P.a_max);
            let a = if pos + brake >= x { -P.a_max } else if v < P.v_max { P.a_max } else { 0.0 };
            v = (v + a * dt).clamp(0.0, P.v_max);
            pos += v * dt;
            t += dt;
            if v == 0.0 && a < 0.0 {
                break;
            }
        }
        t
    }

    #[test]
    fn closed_forms() {
        assert_eq!(travel_time(0.0, P, 0.05), 0.0);
        // 6 m = 120 cells of 5 cm
        assert!((travel_time(120.0, P, 0.05) - 3.0).abs() < 1e-12);
        assert!((travel_time(20.0, P, 0.05) - 2.0 * (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn matches_numeric_integration() {
        for cells in [5.0, 20.0, 60.0, 120.0, 300.0] {
            let t = travel_time(cells, P, 0.05);
            assert!((t - simulate(cells * 0.05)).abs() < 1e-2, "{cells}");
        }
    }

    #[test]
    fn is_continuous_at_the_switch() {
        let edge = P.v_max * P.v_max / P.a_max / 0.05;
        let a = travel_time(edge - 1e-9, P, 0.05);
        let b = travel_time(edge + 1e-9, P, 0.05);
        assert!((a - b).abs() < 1e-6);
    }
}
