use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A position or displacement in display cells along the Length, Height and
/// Depth axes. Two-dimensional clouds keep `d == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub l: f64,
    pub h: f64,
    pub d: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { l: 0.0, h: 0.0, d: 0.0 };
    pub const L_AXIS: Vec3 = Vec3 { l: 1.0, h: 0.0, d: 0.0 };
    pub const H_AXIS: Vec3 = Vec3 { l: 0.0, h: 1.0, d: 0.0 };
    pub const D_AXIS: Vec3 = Vec3 { l: 0.0, h: 0.0, d: 1.0 };

    pub const fn new(l: f64, h: f64, d: f64) -> Self {
        Vec3 { l, h, d }
    }

    pub const fn planar(l: f64, h: f64) -> Self {
        Vec3 { l, h, d: 0.0 }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.l * other.l + self.h * other.h + self.d * other.d
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            l: self.h * other.d - self.d * other.h,
            h: self.d * other.l - self.l * other.d,
            d: self.l * other.h - self.h * other.l,
        }
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn distance_squared(self, other: Vec3) -> f64 {
        (self - other).norm_squared()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > f64::EPSILON {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.l.is_finite() && self.h.is_finite() && self.d.is_finite()
    }

    /// Angle in radians between two non-zero vectors.
    pub fn angle_to(self, other: Vec3) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return 0.0;
        }
        (self.dot(other) / denom).clamp(-1.0, 1.0).acos()
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.l, self.h, self.d)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.l + o.l, self.h + o.h, self.d + o.d)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.l - o.l, self.h - o.h, self.d - o.d)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.l * s, self.h * s, self.d * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.l / s, self.h / s, self.d / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.l, -self.h, -self.d)
    }
}

impl std::iter::Sum for Vec3 {
    fn sum<I: Iterator<Item = Vec3>>(iter: I) -> Vec3 {
        iter.fold(Vec3::ZERO, |acc, v| acc + v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_follows_right_hand_rule() {
        assert_eq!(Vec3::L_AXIS.cross(Vec3::H_AXIS), Vec3::D_AXIS);
        assert_eq!(Vec3::H_AXIS.cross(Vec3::D_AXIS), Vec3::L_AXIS);
    }

    #[test]
    fn normalize_zero_is_none() {
        assert!(Vec3::ZERO.normalized().is_none());
        let u = Vec3::new(3.0, 4.0, 0.0).normalized().unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-15);
    }
}
