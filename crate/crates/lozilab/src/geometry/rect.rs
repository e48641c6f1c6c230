//! Curvilinear rectangles bounded by monotone curves, and strips inside them.
//!
//! A rectangle has two `S`-oriented side faces (left, right) and two
//! `U`-oriented horizontal faces (lower, upper) joined corner to corner into
//! a Jordan curve. A strip is the part of a rectangle between two interior
//! curves of the same orientation as a pair of opposite faces.

use super::curve::{MonotoneCurve, Orientation};
use super::order::{compare_graphs, GraphCmp};
use super::vec2::Vec2;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for face corners meeting and for bound endpoints lying on faces.
const CORNER_TOL: f64 = 1e-9;

/// A curvilinear rectangle. Side faces are `S` curves traversed bottom to
/// top; horizontal faces are `U` curves traversed left to right.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Rectangle {
    left: MonotoneCurve,
    right: MonotoneCurve,
    lower: MonotoneCurve,
    upper: MonotoneCurve,
}

impl Rectangle {
    /// Builds a rectangle, checking orientations, corner matching, and that
    /// the faces are ordered (left strictly before right, lower strictly
    /// before upper).
    pub fn new(
        left: MonotoneCurve,
        right: MonotoneCurve,
        lower: MonotoneCurve,
        upper: MonotoneCurve,
    ) -> Result<Self> {
        if left.orientation() != Orientation::S || right.orientation() != Orientation::S {
            return Err(Error::invalid("rectangle side faces must be S curves"));
        }
        if lower.orientation() != Orientation::U || upper.orientation() != Orientation::U {
            return Err(Error::invalid("rectangle horizontal faces must be U curves"));
        }
        let corners = [
            (left.start(), lower.start(), "bottom-left"),
            (left.end(), upper.start(), "top-left"),
            (right.start(), lower.end(), "bottom-right"),
            (right.end(), upper.end(), "top-right"),
        ];
        for (a, b, name) in corners {
            if a.dist(b) > CORNER_TOL {
                return Err(Error::invalid(format!(
                    "{name} corner mismatch: ({}, {}) vs ({}, {}), distance {}",
                    a.x,
                    a.y,
                    b.x,
                    b.y,
                    a.dist(b)
                )));
            }
        }
        match compare_graphs(&left, &right, CORNER_TOL)? {
            GraphCmp::Before => {}
            other => {
                return Err(Error::invalid(format!(
                    "left face must lie strictly before right face, found {other:?}"
                )))
            }
        }
        match compare_graphs(&lower, &upper, CORNER_TOL)? {
            GraphCmp::Before => {}
            other => {
                return Err(Error::invalid(format!(
                    "lower face must lie strictly before upper face, found {other:?}"
                )))
            }
        }
        Ok(Rectangle {
            left,
            right,
            lower,
            upper,
        })
    }

    /// Axis-aligned rectangle between two opposite corners.
    pub fn from_bbox(lo: Vec2, hi: Vec2) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo.x >= hi.x || lo.y >= hi.y {
            return Err(Error::invalid("bounding box corners must be ordered"));
        }
        let left = MonotoneCurve::segment(Orientation::S, lo, Vec2::new(lo.x, hi.y), 0.0)?;
        let right = MonotoneCurve::segment(Orientation::S, Vec2::new(hi.x, lo.y), hi, 0.0)?;
        let lower = MonotoneCurve::segment(Orientation::U, lo, Vec2::new(hi.x, lo.y), 0.0)?;
        let upper = MonotoneCurve::segment(Orientation::U, Vec2::new(lo.x, hi.y), hi, 0.0)?;
        Rectangle::new(left, right, lower, upper)
    }

    pub fn left(&self) -> &MonotoneCurve {
        &self.left
    }

    pub fn right(&self) -> &MonotoneCurve {
        &self.right
    }

    pub fn lower(&self) -> &MonotoneCurve {
        &self.lower
    }

    pub fn upper(&self) -> &MonotoneCurve {
        &self.upper
    }

    /// Corners `[bottom-left, bottom-right, top-right, top-left]`.
    pub fn corners(&self) -> [Vec2; 4] {
        [
            self.lower.start(),
            self.lower.end(),
            self.upper.end(),
            self.upper.start(),
        ]
    }

    /// Axis-aligned bounding box `(min-corner, max-corner)`.
    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for face in [&self.left, &self.right, &self.lower, &self.upper] {
            for p in face.samples() {
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
        }
        (lo, hi)
    }

    /// Diameter of the bounding box (an upper bound on the true diameter).
    pub fn diam(&self) -> f64 {
        let (lo, hi) = self.bbox();
        lo.dist(hi)
    }

    /// Membership test with the default boundary tolerance `1e−9`.
    pub fn contains(&self, p: Vec2) -> bool {
        self.contains_tol(p, 1e-9)
    }

    /// Membership test: `p` must lie between left and right faces (compared
    /// at its height, clamped) and between lower and upper faces (compared
    /// at its abscissa, clamped), each within `tol`.
    pub fn contains_tol(&self, p: Vec2, tol: f64) -> bool {
        if !p.is_finite() {
            return false;
        }
        let xl = self.left.eval_clamped(p.y);
        let xr = self.right.eval_clamped(p.y);
        let yl = self.lower.eval_clamped(p.x);
        let yu = self.upper.eval_clamped(p.x);
        p.x >= xl - tol && p.x <= xr + tol && p.y >= yl - tol && p.y <= yu + tol
    }

    /// Deterministic grid of points inside the rectangle: `ny` levels
    /// between the faces' common height range, `nx` points between the side
    /// faces at each level. Points failing the membership test (possible at
    /// extreme corners) are dropped.
    pub fn sample_grid(&self, nx: usize, ny: usize) -> Vec<Vec2> {
        let (l_lo, l_hi) = self.left.param_range();
        let (r_lo, r_hi) = self.right.param_range();
        let y_lo = l_lo.max(r_lo);
        let y_hi = l_hi.min(r_hi);
        let mut out = Vec::with_capacity(nx * ny);
        if y_hi <= y_lo || nx < 2 || ny < 2 {
            return out;
        }
        for j in 0..ny {
            let y = y_lo + (y_hi - y_lo) * (j as f64 / (ny - 1) as f64);
            let xl = self.left.eval_clamped(y);
            let xr = self.right.eval_clamped(y);
            for i in 0..nx {
                let x = xl + (xr - xl) * (i as f64 / (nx - 1) as f64);
                let p = Vec2::new(x, y);
                if self.contains(p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Which pair of faces a strip's bounds run parallel to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StripKind {
    /// Bounds are `S` curves connecting the lower and upper faces.
    SStrip,
    /// Bounds are `U` curves connecting the left and right faces.
    UStrip,
}

/// The part of a host rectangle between two curves joining opposite faces.
///
/// Bounds are normalized at construction so `bound_a` precedes `bound_b`
/// (left of / below, by kind). A strip is *proper* when neither bound
/// coincides with the corresponding host face.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Strip {
    host: Rectangle,
    bound_a: MonotoneCurve,
    bound_b: MonotoneCurve,
    kind: StripKind,
    proper: bool,
}

impl Strip {
    /// Builds a strip, validating orientations, that bound endpoints lie on
    /// the opposite host faces, and that the bounds are ordered (swapping
    /// them into order if given reversed).
    pub fn new(
        host: Rectangle,
        bound_a: MonotoneCurve,
        bound_b: MonotoneCurve,
        kind: StripKind,
    ) -> Result<Self> {
        let (want, start_face, end_face, host_a, host_b) = match kind {
            StripKind::SStrip => (
                Orientation::S,
                host.lower.clone(),
                host.upper.clone(),
                host.left.clone(),
                host.right.clone(),
            ),
            StripKind::UStrip => (
                Orientation::U,
                host.left.clone(),
                host.right.clone(),
                host.lower.clone(),
                host.upper.clone(),
            ),
        };
        for (which, b) in [("first", &bound_a), ("second", &bound_b)] {
            if b.orientation() != want {
                return Err(Error::invalid(format!(
                    "{which} strip bound has wrong orientation for {kind:?}"
                )));
            }
            let d_start = start_face.closest_distance(b.start());
            let d_end = end_face.closest_distance(b.end());
            if d_start > CORNER_TOL || d_end > CORNER_TOL {
                return Err(Error::invalid(format!(
                    "{which} strip bound endpoints miss the opposite host faces \
                     (distances {d_start}, {d_end})"
                )));
            }
        }
        let (bound_a, bound_b) = match compare_graphs(&bound_a, &bound_b, CORNER_TOL)? {
            GraphCmp::Before => (bound_a, bound_b),
            GraphCmp::After => (bound_b, bound_a),
            other => {
                return Err(Error::invalid(format!(
                    "strip bounds must be strictly ordered, found {other:?}"
                )))
            }
        };
        let proper = !matches!(
            compare_graphs(&bound_a, &host_a, CORNER_TOL)?,
            GraphCmp::Coincide
        ) && !matches!(
            compare_graphs(&bound_b, &host_b, CORNER_TOL)?,
            GraphCmp::Coincide
        );
        Ok(Strip {
            host,
            bound_a,
            bound_b,
            kind,
            proper,
        })
    }

    pub fn host(&self) -> &Rectangle {
        &self.host
    }

    /// The earlier bound (left of / below the other, by kind).
    pub fn bound_a(&self) -> &MonotoneCurve {
        &self.bound_a
    }

    /// The later bound.
    pub fn bound_b(&self) -> &MonotoneCurve {
        &self.bound_b
    }

    pub fn kind(&self) -> StripKind {
        self.kind
    }

    /// True when neither bound coincides with the corresponding host face.
    pub fn proper(&self) -> bool {
        self.proper
    }

    /// The strip as a rectangle of its own: the bounds become two faces and
    /// the host's opposite faces are trimmed between the bound endpoints.
    pub fn as_rectangle(&self) -> Result<Rectangle> {
        match self.kind {
            StripKind::SStrip => {
                let lower = self
                    .host
                    .lower
                    .sub_between_params(self.bound_a.start().x, self.bound_b.start().x)?;
                let upper = self
                    .host
                    .upper
                    .sub_between_params(self.bound_a.end().x, self.bound_b.end().x)?;
                Rectangle::new(self.bound_a.clone(), self.bound_b.clone(), lower, upper)
            }
            StripKind::UStrip => {
                let left = self
                    .host
                    .left
                    .sub_between_params(self.bound_a.start().y, self.bound_b.start().y)?;
                let right = self
                    .host
                    .right
                    .sub_between_params(self.bound_a.end().y, self.bound_b.end().y)?;
                Rectangle::new(left, right, self.bound_a.clone(), self.bound_b.clone())
            }
        }
    }

    /// Membership test: inside the host and between the two bounds.
    pub fn contains(&self, p: Vec2) -> bool {
        if !self.host.contains(p) {
            return false;
        }
        let tol = 1e-9;
        match self.kind {
            StripKind::SStrip => {
                p.x >= self.bound_a.eval_clamped(p.y) - tol
                    && p.x <= self.bound_b.eval_clamped(p.y) + tol
            }
            StripKind::UStrip => {
                p.y >= self.bound_a.eval_clamped(p.x) - tol
                    && p.y <= self.bound_b.eval_clamped(p.x) + tol
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Rectangle {
        Rectangle::from_bbox(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap()
    }

    #[test]
    fn bbox_rectangle_contains_interior_not_exterior() {
        let r = unit_square();
        assert!(r.contains(Vec2::new(0.5, 0.5)));
        assert!(r.contains(Vec2::new(0.0, 0.0)));
        assert!(!r.contains(Vec2::new(1.1, 0.5)));
        assert!(!r.contains(Vec2::new(0.5, -0.1)));
        assert!((r.diam() - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn corner_mismatch_is_rejected() {
        let left = MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            0.0,
        )
        .unwrap();
        let right = MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            0.0,
        )
        .unwrap();
        let lower = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.0, 0.01),
            Vec2::new(1.0, 0.01),
            0.0,
        )
        .unwrap();
        let upper = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            0.0,
        )
        .unwrap();
        assert!(Rectangle::new(left, right, lower, upper).is_err());
    }

    #[test]
    fn slanted_rectangle_contains_respects_faces() {
        // Side faces lean with slope dx/dy = 0.2.
        let left = MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(0.0, 0.0),
            Vec2::new(0.2, 1.0),
            0.2,
        )
        .unwrap();
        let right = MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(1.0, 0.0),
            Vec2::new(1.2, 1.0),
            0.2,
        )
        .unwrap();
        let lower = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            0.0,
        )
        .unwrap();
        let upper = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.2, 1.0),
            Vec2::new(1.2, 1.0),
            0.0,
        )
        .unwrap();
        let r = Rectangle::new(left, right, lower, upper).unwrap();
        assert!(r.contains(Vec2::new(0.15, 0.5)));
        assert!(!r.contains(Vec2::new(0.05, 0.9)));
        assert!(r.contains(Vec2::new(1.15, 0.9)));
        assert!(!r.contains(Vec2::new(1.15, 0.1)));
    }

    #[test]
    fn sample_grid_points_lie_inside() {
        let r = unit_square();
        let pts = r.sample_grid(7, 5);
        assert_eq!(pts.len(), 35);
        for p in pts {
            assert!(r.contains(p));
        }
    }

    fn vertical(x: f64) -> MonotoneCurve {
        MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(x, 0.0),
            Vec2::new(x, 1.0),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn strip_normalizes_bound_order() {
        let s = Strip::new(unit_square(), vertical(0.7), vertical(0.3), StripKind::SStrip)
            .unwrap();
        assert!((s.bound_a().start().x - 0.3).abs() < 1e-15);
        assert!((s.bound_b().start().x - 0.7).abs() < 1e-15);
        assert!(s.proper());
        assert!(s.contains(Vec2::new(0.5, 0.5)));
        assert!(!s.contains(Vec2::new(0.1, 0.5)));
    }

    #[test]
    fn strip_touching_host_face_is_improper() {
        let s = Strip::new(unit_square(), vertical(0.0), vertical(0.3), StripKind::SStrip)
            .unwrap();
        assert!(!s.proper());
    }

    #[test]
    fn strip_bounds_must_reach_opposite_faces() {
        let short = MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(0.5, 0.2),
            Vec2::new(0.5, 1.0),
            0.0,
        )
        .unwrap();
        assert!(Strip::new(unit_square(), short, vertical(0.7), StripKind::SStrip).is_err());
    }

    #[test]
    fn strip_as_rectangle_roundtrip() {
        let s = Strip::new(unit_square(), vertical(0.25), vertical(0.75), StripKind::SStrip)
            .unwrap();
        let r = s.as_rectangle().unwrap();
        let (lo, hi) = r.bbox();
        assert!((lo.x - 0.25).abs() < 1e-12);
        assert!((hi.x - 0.75).abs() < 1e-12);
        assert!((hi.y - 1.0).abs() < 1e-12);
    }
}
