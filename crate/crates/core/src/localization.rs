//! Relative-localization plugins. A plugin looks at a localizing FLS and
//! its anchor and says how the localizer (and its swarm) should move so the
//! pair's estimated displacement matches the ground truth.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::geometry::{deviate, DeadReckoning, Dim, Vec3};

/// Estimated and ground-truth position of one FLS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub est: Vec3,
    pub gt: Vec3,
}

/// Optional sensing error on the measured displacement `d`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeasurementNoise {
    pub distance_rel_error: f64,
    pub angle_error_deg: f64,
}

impl MeasurementNoise {
    pub fn is_off(&self) -> bool {
        self.distance_rel_error == 0.0 && self.angle_error_deg == 0.0
    }

    /// Perturbs a measured displacement. Draws nothing when noise is off.
    pub fn apply(&self, d: Vec3, dim: Dim, rng: &mut dyn RngCore) -> Vec3 {
        if self.is_off() || d == Vec3::ZERO {
            return d;
        }
        let scale = 1.0 + self.distance_rel_error * rng.gen_range(-1.0..=1.0);
        let a = self.angle_error_deg.to_radians();
        let delta = if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 };
        let vartheta = rng.gen_range(0.0..std::f64::consts::TAU);
        deviate(Vec3::ZERO, d, delta, vartheta, dim) * scale
    }
}

/// Outcome of one localization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    /// `V = d - D`, flown by the localizer from `staging` (or from its
    /// current position when there is no staging flight).
    pub v: Vec3,
    /// Actual position reached by a preparatory flight, if any.
    pub staging: Option<Vec3>,
    /// Length of the preparatory flight.
    pub staging_distance: f64,
    /// The displacement the localizer believes it underwent, which its swarm
    /// replays.
    pub swarm_vector: Vec3,
}

/// Everything a plugin may consume besides the two poses.
pub struct LocalizeCtx<'a> {
    pub dim: Dim,
    pub reckoning: &'a mut DeadReckoning,
    pub noise: MeasurementNoise,
    pub noise_rng: &'a mut dyn RngCore,
}

pub trait Localizer: fmt::Debug {
    fn localize(&self, me: Pose, anchor: Pose, ctx: &mut LocalizeCtx<'_>) -> Correction;
}

/// Signal strength: measure `d` remotely, no preparatory flight.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignalStrength;

impl Localizer for SignalStrength {
    fn localize(&self, me: Pose, anchor: Pose, ctx: &mut LocalizeCtx<'_>) -> Correction {
        let d = ctx.noise.apply(anchor.est - me.est, ctx.dim, ctx.noise_rng);
        let v = d - (anchor.gt - me.gt);
        Correction { v, staging: None, staging_distance: 0.0, swarm_vector: v }
    }
}

/// Physical movement: fly next to the anchor first, then measure.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalMovement {
    pub standoff: f64,
}

impl Default for PhysicalMovement {
    fn default() -> Self {
        PhysicalMovement { standoff: 1.0 }
    }
}

impl Localizer for PhysicalMovement {
    fn localize(&self, me: Pose, anchor: Pose, ctx: &mut LocalizeCtx<'_>) -> Correction {
        let to_anchor = anchor.est - me.est;
        let gap = to_anchor.norm();
        // stop `standoff` short of the anchor on the line toward it
        let target = match to_anchor.normalized() {
            Some(u) if gap > self.standoff => anchor.est - u * self.standoff,
            _ => me.est,
        };
        let reached = ctx.reckoning.reckon(me.est, target, ctx.dim);
        let d = ctx.noise.apply(anchor.est - reached, ctx.dim, ctx.noise_rng);
        let v = d - (anchor.gt - me.gt);
        // The IMU reports the commanded leg, so its error leaks into the
        // vector the swarm replays.
        let swarm_vector = (target - me.est) + v;
        Correction {
            v,
            staging: (target != me.est).then_some(reached),
            staging_distance: reached.distance(me.est),
            swarm_vector,
        }
    }
}

/// Plugin selector used by configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalizerKind {
    #[default]
    Ss,
    Pm,
}

impl LocalizerKind {
    pub fn build(self, standoff: f64) -> Box<dyn Localizer> {
        match self {
            LocalizerKind::Ss => Box::new(SignalStrength),
            LocalizerKind::Pm => Box::new(PhysicalMovement { standoff }),
        }
    }
}

impl FromStr for LocalizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ss" => Ok(LocalizerKind::Ss),
            "pm" => Ok(LocalizerKind::Pm),
            other => Err(format!("unknown localizer {other:?} (expected ss or pm)")),
        }
    }
}

impl fmt::Display for LocalizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocalizerKind::Ss => "ss",
            LocalizerKind::Pm => "pm",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(
        plugin: &dyn Localizer,
        me: Pose,
        anchor: Pose,
        eps: f64,
        dim: Dim,
    ) -> Correction {
        let mut dr = DeadReckoning::new(eps, ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut nr = ChaCha8Rng::seed_from_u64(2);
        let mut ctx = LocalizeCtx {
            dim,
            reckoning: &mut dr,
            noise: MeasurementNoise::default(),
            noise_rng: &mut nr,
        };
        plugin.localize(me, anchor, &mut ctx)
    }

    fn pose(est: Vec3, gt: Vec3) -> Pose {
        Pose { est, gt }
    }

    #[test]
    fn ss_examples() {
        let c = run(
            &SignalStrength,
            pose(Vec3::ZERO, Vec3::ZERO),
            pose(Vec3::new(5.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)),
            0.0,
            Dim::Two,
        );
        assert_eq!(c.v, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(c.swarm_vector, c.v);
        let c = run(
            &SignalStrength,
            pose(Vec3::ZERO, Vec3::ZERO),
            pose(Vec3::new(0.0, 4.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
            0.0,
            Dim::Three,
        );
        assert_eq!(c.v, Vec3::new(0.0, 3.0, 0.0));
    }

    #[test]
    fn ss_correct_geometry_needs_no_move() {
        let me = pose(Vec3::new(1.0, 1.0, 1.0), Vec3::new(7.0, 2.0, 0.0));
        let a = pose(Vec3::new(4.0, 5.0, 1.0), Vec3::new(10.0, 6.0, 0.0));
        assert_eq!(run(&SignalStrength, me, a, 5.0, Dim::Three).v, Vec3::ZERO);
    }

    #[test]
    fn pm_exact_legs_recover_ground_truth() {
        let me = pose(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0));
        let a = pose(Vec3::new(20.0, 3.0, 0.0), Vec3::new(2.0, 1.0, 0.0));
        let c = run(&PhysicalMovement::default(), me, a, 0.0, Dim::Two);
        let staged = c.staging.unwrap();
        assert!((staged.distance(a.est) - 1.0).abs() < 1e-12);
        let end = staged + c.v;
        assert!(((a.est - end) - (a.gt - me.gt)).norm() < 1e-12);
        assert!((me.est + c.swarm_vector).distance(end) < 1e-12);
    }

    #[test]
    fn pm_travels_further_than_ss() {
        let me = pose(Vec3::ZERO, Vec3::ZERO);
        let a = pose(Vec3::new(20.0, 0.5, 0.0), Vec3::new(19.0, 0.0, 0.0));
        let ss = run(&SignalStrength, me, a, 5.0, Dim::Two);
        let pm = run(&PhysicalMovement::default(), me, a, 5.0, Dim::Two);
        assert!(pm.staging_distance + pm.v.norm() > ss.v.norm());
    }

    #[test]
    fn pm_beside_anchor_skips_staging() {
        let me = pose(Vec3::ZERO, Vec3::ZERO);
        let a = pose(Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0));
        let c = run(&PhysicalMovement::default(), me, a, 5.0, Dim::Two);
        assert_eq!(c.staging, None);
        assert_eq!(c.v, Vec3::ZERO);
    }

    #[test]
    fn noise_is_bounded() {
        let n = MeasurementNoise { distance_rel_error: 0.1, angle_error_deg: 2.0 };
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let d = Vec3::new(3.0, 4.0, 0.0);
        for _ in 0..1000 {
            let m = n.apply(d, Dim::Three, &mut r);
            assert!((m.norm() - 5.0).abs() <= 0.5 + 1e-9);
            assert!(m.angle_to(d) <= 2f64.to_radians() + 1e-9);
        }
    }

    fn v3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-30.0f64..30.0).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
    }

    proptest! {
        #[test]
        fn ss_single_step_restores_relative_geometry(le in v3(), ae in v3(), lg in v3(), ag in v3()) {
            let c = run(&SignalStrength, pose(le, lg), pose(ae, ag), 0.0, Dim::Three);
            let end = le + c.v;
            prop_assert!(((ae - end) - (ag - lg)).norm() < 1e-9);
            prop_assert!(c.v.norm() <= (ae - le).norm() + (ag - lg).norm() + 1e-9);
        }
    }
}
