//! Planar vectors and 2×2 matrices.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// A point or displacement in the plane, in abstract length units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    /// The zero vector.
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    /// Constructs a vector from components.
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Euclidean inner product.
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Scalar cross product `x·other.y − y·other.x` (signed parallelogram area).
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Squared Euclidean norm.
    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// Euclidean norm.
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Euclidean distance to another point.
    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise perpendicular `(−y, x)`.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Unit vector in the same direction; errors on the zero vector.
    pub fn normalized(self) -> Result<Vec2> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::invalid(format!(
                "cannot normalize vector ({}, {})",
                self.x, self.y
            )));
        }
        Ok(Vec2::new(self.x / n, self.y / n))
    }

    /// True iff both components are finite.
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation `a + t·(b − a)`.
    pub fn lerp(a: Vec2, b: Vec2, t: f64) -> Vec2 {
        Vec2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

/// A 2×2 matrix `[[a, b], [c, d]]` acting on column vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    /// The identity matrix.
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Constructs a matrix from row-major entries.
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    /// Determinant `ad − bc`.
    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix–vector product.
    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    /// Matrix product `self · rhs`.
    pub fn mul(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }

    /// Inverse matrix; errors when the determinant vanishes.
    pub fn inverse(self) -> Result<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::invalid(format!("singular matrix, det = {det}")));
        }
        Ok(Mat2::new(
            self.d / det,
            -self.b / det,
            -self.c / det,
            self.a / det,
        ))
    }

    /// Transposed matrix.
    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    /// True iff all entries are finite.
    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_cross() {
        let u = Vec2::new(1.0, 2.0);
        let v = Vec2::new(3.0, -1.0);
        assert_eq!(u.dot(v), 1.0);
        assert_eq!(u.cross(v), -7.0);
        assert_eq!(u.perp().dot(u), 0.0);
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(Vec2::ZERO.normalized().is_err());
        let n = Vec2::new(3.0, 4.0).normalized().unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-15);
        assert!((n.x - 0.6).abs() < 1e-15);
    }

    #[test]
    fn matrix_inverse_roundtrip() {
        let m = Mat2::new(1.9, 1.0, 0.1, 0.0);
        let inv = m.inverse().unwrap();
        let id = m.mul(inv);
        assert!((id.a - 1.0).abs() < 1e-14);
        assert!(id.b.abs() < 1e-14);
        assert!(id.c.abs() < 1e-14);
        assert!((id.d - 1.0).abs() < 1e-14);
        let v = Vec2::new(0.3, -0.7);
        let w = inv.mul_vec(m.mul_vec(v));
        assert!(v.dist(w) < 1e-14);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).inverse().is_err());
    }

    #[test]
    fn lerp_endpoints() {
        let a = Vec2::new(-1.0, 2.0);
        let b = Vec2::new(3.0, 0.0);
        assert_eq!(Vec2::lerp(a, b, 0.0), a);
        assert_eq!(Vec2::lerp(a, b, 1.0), b);
        assert_eq!(Vec2::lerp(a, b, 0.5), Vec2::new(1.0, 1.0));
    }
}
