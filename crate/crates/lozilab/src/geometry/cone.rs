//! Symmetric planar cones and the universal (horizontal/vertical) cone pair.
//!
//! A cone is the set of directions making a bounded angle with a unit axis
//! `v`: all nonzero `u` with `|⟨u, v⟩| ≥ l·‖u‖` for a coefficient
//! `l ∈ (0, 1)`. Equivalently, writing `u` in coordinates aligned with `v`,
//! the slope of `u` relative to the axis is at most `√(1−l²)/l`.
//!
//! The coefficient value `0` is reserved as a degenerate marker: the cone
//! has collapsed onto the axis line itself. This encodes the boundary case
//! in which the expansion/contraction directions merge and no open cone
//! survives; membership then means "parallel to the axis".

use super::vec2::Vec2;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for the unit-axis invariant.
const AXIS_NORM_TOL: f64 = 1e-12;

/// Relative size of the perpendicular component below which a vector counts
/// as parallel to the axis of a degenerate cone.
const PARALLEL_TOL: f64 = 1e-9;

/// A symmetric cone `{u ≠ 0 : |⟨u, axis⟩| ≥ coeff·‖u‖}` about a unit axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    axis: Vec2,
    coeff: f64,
}

impl Cone {
    /// Constructs a cone from a unit axis and a coefficient in `[0, 1)`.
    ///
    /// Coefficient `0` builds the degenerate line-cone (see module docs).
    pub fn new(axis: Vec2, coeff: f64) -> Result<Self> {
        if !axis.is_finite() || (axis.norm() - 1.0).abs() > AXIS_NORM_TOL {
            return Err(Error::invalid(format!(
                "cone axis must be a unit vector, got ({}, {}) with norm {}",
                axis.x,
                axis.y,
                axis.norm()
            )));
        }
        if !coeff.is_finite() || !(0.0..1.0).contains(&coeff) {
            return Err(Error::invalid(format!(
                "cone coefficient must lie in [0, 1), got {coeff}"
            )));
        }
        Ok(Cone { axis, coeff })
    }

    /// Constructs the cone of all directions whose slope relative to `axis`
    /// is at most `slope ≥ 0`; slope `0` builds the degenerate line-cone.
    pub fn from_slope(axis: Vec2, slope: f64) -> Result<Self> {
        if !slope.is_finite() || slope < 0.0 {
            return Err(Error::invalid(format!(
                "cone slope must be nonnegative, got {slope}"
            )));
        }
        let coeff = if slope == 0.0 {
            0.0
        } else {
            1.0 / (1.0 + slope * slope).sqrt()
        };
        Cone::new(axis, coeff)
    }

    /// The unit axis.
    pub fn axis(&self) -> Vec2 {
        self.axis
    }

    /// The coefficient `l`; `0` marks the degenerate line-cone.
    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    /// True when the cone has collapsed onto its axis line.
    pub fn is_degenerate(&self) -> bool {
        self.coeff == 0.0
    }

    /// Maximal slope `√(1−l²)/l` of cone members relative to the axis;
    /// `0` for the degenerate line-cone.
    pub fn slope(&self) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (1.0 - self.coeff * self.coeff).sqrt() / self.coeff
        }
    }

    /// Membership test; errors on the zero vector.
    ///
    /// For a degenerate cone, membership means the perpendicular component
    /// of `u` is below `1e−9·‖u‖`.
    pub fn contains(&self, u: Vec2) -> Result<bool> {
        if !u.is_finite() {
            return Err(Error::invalid("cone membership of a non-finite vector"));
        }
        let n = u.norm();
        if n == 0.0 {
            return Err(Error::invalid("cone membership of the zero vector"));
        }
        if self.is_degenerate() {
            Ok(u.dot(self.axis.perp()).abs() <= PARALLEL_TOL * n)
        } else {
            Ok(u.dot(self.axis).abs() >= self.coeff * n)
        }
    }

    /// Membership with a small coefficient slack, for vectors produced by
    /// floating-point images of boundary rays: accepts `u` when
    /// `|⟨u, axis⟩|/‖u‖ ≥ coeff − tol` (degenerate cones relax the
    /// parallelism tolerance by `tol` instead).
    pub fn contains_relaxed(&self, u: Vec2, tol: f64) -> Result<bool> {
        if !u.is_finite() {
            return Err(Error::invalid("cone membership of a non-finite vector"));
        }
        let n = u.norm();
        if n == 0.0 {
            return Err(Error::invalid("cone membership of the zero vector"));
        }
        if self.is_degenerate() {
            Ok(u.dot(self.axis.perp()).abs() <= (PARALLEL_TOL + tol) * n)
        } else {
            Ok(u.dot(self.axis).abs() >= (self.coeff - tol) * n)
        }
    }

    /// Unit vector at signed slope `t` relative to the axis
    /// (`t = ±slope()` gives the two boundary rays); errors if `|t|`
    /// exceeds the cone's slope.
    pub fn ray_at(&self, t: f64) -> Result<Vec2> {
        if !t.is_finite() || t.abs() > self.slope() + 1e-15 {
            return Err(Error::invalid(format!(
                "ray slope {t} outside cone of slope {}",
                self.slope()
            )));
        }
        (self.axis + t * self.axis.perp()).normalized()
    }

    /// The two boundary rays `axis ± slope·axis⊥`, normalized. For the
    /// degenerate cone both rays coincide with the axis.
    pub fn boundary_rays(&self) -> [Vec2; 2] {
        let s = self.slope();
        [
            self.ray_at(s).expect("boundary ray is inside the cone"),
            self.ray_at(-s).expect("boundary ray is inside the cone"),
        ]
    }
}

/// The standard horizontal/vertical cone pair: an expanding cone about the
/// x-axis and a contracting cone about the y-axis, with coefficients large
/// enough that the two cones meet only in the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalConePair {
    unstable: Cone,
    stable: Cone,
}

impl UniversalConePair {
    /// Builds the pair from coefficients `α_u`, `α_s`; disjointness requires
    /// `α_u² + α_s² > 1`.
    pub fn new(alpha_u: f64, alpha_s: f64) -> Result<Self> {
        let unstable = Cone::new(Vec2::new(1.0, 0.0), alpha_u)?;
        let stable = Cone::new(Vec2::new(0.0, 1.0), alpha_s)?;
        if alpha_u * alpha_u + alpha_s * alpha_s <= 1.0 {
            return Err(Error::invalid(format!(
                "cones overlap: α_u² + α_s² = {} ≤ 1",
                alpha_u * alpha_u + alpha_s * alpha_s
            )));
        }
        Ok(UniversalConePair { unstable, stable })
    }

    /// Builds the pair from slope half-widths `c_u` (about the x-axis) and
    /// `c_s` (about the y-axis); disjointness requires `c_u·c_s < 1`.
    pub fn from_slopes(c_u: f64, c_s: f64) -> Result<Self> {
        if !(c_u.is_finite() && c_s.is_finite()) || c_u < 0.0 || c_s < 0.0 {
            return Err(Error::invalid("cone slopes must be finite and nonnegative"));
        }
        if c_u * c_s >= 1.0 {
            return Err(Error::invalid(format!(
                "cones overlap: c_u·c_s = {} ≥ 1",
                c_u * c_s
            )));
        }
        let unstable = Cone::from_slope(Vec2::new(1.0, 0.0), c_u)?;
        let stable = Cone::from_slope(Vec2::new(0.0, 1.0), c_s)?;
        Ok(UniversalConePair { unstable, stable })
    }

    /// The expanding cone about the x-axis.
    pub fn unstable(&self) -> &Cone {
        &self.unstable
    }

    /// The contracting cone about the y-axis.
    pub fn stable(&self) -> &Cone {
        &self.stable
    }
}
