//! Partial orders along the expanding (x) and contracting (y) directions.
//!
//! Points are compared through displacement cones: `a` precedes `b` along
//! the expanding direction when `b − a` lies in the horizontal cone of a
//! disjoint universal pair and points rightward. Graph-representable curves
//! and strips are compared by evaluating both objects on test lines through
//! their common parameter range — horizontal lines for the left/right
//! order, vertical lines for the below/above order.

use super::cone::UniversalConePair;
use super::curve::{MonotoneCurve, Orientation};
use super::rect::{Strip, StripKind};
use super::vec2::Vec2;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Result of an order query. `Left` means the first operand precedes the
/// second (to the left for the expanding order, below for the contracting
/// order); `Incomparable` covers overlap beyond a shared boundary, equality,
/// and displacements outside the governing cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelOrder {
    Left,
    Right,
    Incomparable,
}

/// How two same-oriented graphs relate over their common parameter range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphCmp {
    /// `a` is strictly before `b` (allowing boundary contact within tol).
    Before,
    /// `a` is strictly after `b`.
    After,
    /// The graphs coincide within tol everywhere on the common range.
    Coincide,
    /// The graphs cross: both strict signs occur.
    Mixed,
    /// The parameter ranges do not overlap.
    NoOverlap,
}

/// Compares two curves of the same orientation by evaluating both at every
/// vertex parameter (of either curve) in the common range, plus midpoints.
pub fn compare_graphs(a: &MonotoneCurve, b: &MonotoneCurve, tol: f64) -> Result<GraphCmp> {
    if a.orientation() != b.orientation() {
        return Err(Error::invalid(
            "compare_graphs requires curves of the same orientation",
        ));
    }
    let (a_lo, a_hi) = a.param_range();
    let (b_lo, b_hi) = b.param_range();
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if hi < lo - tol {
        return Ok(GraphCmp::NoOverlap);
    }
    let mut params: Vec<f64> = Vec::new();
    params.push(lo);
    params.push(hi);
    for c in [a, b] {
        for p in c.samples() {
            let t = c.param_of(*p);
            if t > lo && t < hi {
                params.push(t);
            }
        }
    }
    params.sort_by(|x, y| x.partial_cmp(y).expect("finite parameters"));
    params.dedup();
    // Midpoints guard against crossings between vertices of piecewise-affine
    // graphs (possible only when slope bounds differ).
    let mids: Vec<f64> = params.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    params.extend(mids);

    let mut any_pos = false;
    let mut any_neg = false;
    for t in params {
        let d = b.eval_clamped(t) - a.eval_clamped(t);
        if d > tol {
            any_pos = true;
        } else if d < -tol {
            any_neg = true;
        }
    }
    Ok(match (any_pos, any_neg) {
        (true, true) => GraphCmp::Mixed,
        (true, false) => GraphCmp::Before,
        (false, true) => GraphCmp::After,
        (false, false) => GraphCmp::Coincide,
    })
}

/// Context shared by order queries: the governing cone pair and the
/// comparison tolerance.
#[derive(Clone, Copy, Debug)]
pub struct OrderContext {
    pub cones: UniversalConePair,
    pub tol: f64,
}

impl OrderContext {
    pub fn new(cones: UniversalConePair) -> Self {
        OrderContext { cones, tol: 1e-9 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// A geometric object that order queries accept.
#[derive(Clone, Copy, Debug)]
pub enum PlaneObject<'a> {
    Point(Vec2),
    Curve(&'a MonotoneCurve),
    Strip(&'a Strip),
}

/// Which of the two orders a query runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    /// Order along x; operands are S-oriented objects.
    Expanding,
    /// Order along y; operands are U-oriented objects.
    Contracting,
}

impl Axis {
    fn curve_orientation(self) -> Orientation {
        match self {
            Axis::Expanding => Orientation::S,
            Axis::Contracting => Orientation::U,
        }
    }

    fn strip_kind(self) -> StripKind {
        match self {
            Axis::Expanding => StripKind::SStrip,
            Axis::Contracting => StripKind::UStrip,
        }
    }

    /// Splits a point into (test parameter, ordered coordinate).
    fn split(self, p: Vec2) -> (f64, f64) {
        match self {
            Axis::Expanding => (p.y, p.x),
            Axis::Contracting => (p.x, p.y),
        }
    }
}

fn order_points(axis: Axis, a: Vec2, b: Vec2, ctx: &OrderContext) -> Result<RelOrder> {
    let d = b - a;
    if d.norm() <= ctx.tol {
        return Ok(RelOrder::Incomparable);
    }
    let (cone, component) = match axis {
        Axis::Expanding => (ctx.cones.unstable(), d.x),
        Axis::Contracting => (ctx.cones.stable(), d.y),
    };
    if !cone.contains(d)? {
        return Ok(RelOrder::Incomparable);
    }
    Ok(if component > 0.0 {
        RelOrder::Left
    } else if component < 0.0 {
        RelOrder::Right
    } else {
        RelOrder::Incomparable
    })
}

fn order_curves(
    axis: Axis,
    a: &MonotoneCurve,
    b: &MonotoneCurve,
    ctx: &OrderContext,
) -> Result<RelOrder> {
    let want = axis.curve_orientation();
    if a.orientation() != want || b.orientation() != want {
        return Err(Error::invalid(format!(
            "this order compares {want:?}-oriented curves"
        )));
    }
    Ok(match compare_graphs(a, b, ctx.tol)? {
        GraphCmp::Before => RelOrder::Left,
        GraphCmp::After => RelOrder::Right,
        GraphCmp::Coincide | GraphCmp::Mixed | GraphCmp::NoOverlap => RelOrder::Incomparable,
    })
}

fn order_point_curve(
    axis: Axis,
    p: Vec2,
    c: &MonotoneCurve,
    ctx: &OrderContext,
) -> Result<RelOrder> {
    if c.orientation() != axis.curve_orientation() {
        return Err(Error::invalid(format!(
            "this order compares points against {:?}-oriented curves",
            axis.curve_orientation()
        )));
    }
    let (t, coord) = axis.split(p);
    let (lo, hi) = c.param_range();
    if t < lo - ctx.tol || t > hi + ctx.tol {
        return Ok(RelOrder::Incomparable);
    }
    let d = c.eval_clamped(t) - coord;
    Ok(if d > ctx.tol {
        RelOrder::Left
    } else if d < -ctx.tol {
        RelOrder::Right
    } else {
        RelOrder::Incomparable
    })
}

fn invert(order: RelOrder) -> RelOrder {
    match order {
        RelOrder::Left => RelOrder::Right,
        RelOrder::Right => RelOrder::Left,
        RelOrder::Incomparable => RelOrder::Incomparable,
    }
}

fn strip_bounds<'a>(
    axis: Axis,
    s: &'a Strip,
) -> Result<(&'a MonotoneCurve, &'a MonotoneCurve)> {
    if s.kind() != axis.strip_kind() {
        return Err(Error::invalid(format!(
            "this order compares {:?} strips",
            axis.strip_kind()
        )));
    }
    Ok((s.bound_a(), s.bound_b()))
}

/// Orders two objects along one axis. Strips are compared through their
/// bounds; a shared boundary curve still yields a strict order, while any
/// deeper overlap is incomparable.
fn order_objects(
    axis: Axis,
    a: &PlaneObject<'_>,
    b: &PlaneObject<'_>,
    ctx: &OrderContext,
) -> Result<RelOrder> {
    use PlaneObject::*;
    match (a, b) {
        (Point(p), Point(q)) => order_points(axis, *p, *q, ctx),
        (Curve(c), Curve(d)) => order_curves(axis, c, d, ctx),
        (Point(p), Curve(c)) => order_point_curve(axis, *p, c, ctx),
        (Curve(c), Point(p)) => Ok(invert(order_point_curve(axis, *p, c, ctx)?)),
        (Strip(s), Strip(t)) => {
            let (s_a, s_b) = strip_bounds(axis, s)?;
            let (t_a, t_b) = strip_bounds(axis, t)?;
            // s before t when s's later bound does not pass t's earlier one.
            match compare_graphs(s_b, t_a, ctx.tol)? {
                GraphCmp::Before | GraphCmp::Coincide => return Ok(RelOrder::Left),
                _ => {}
            }
            match compare_graphs(t_b, s_a, ctx.tol)? {
                GraphCmp::Before | GraphCmp::Coincide => Ok(RelOrder::Right),
                _ => Ok(RelOrder::Incomparable),
            }
        }
        (obj, Strip(s)) => {
            let (s_a, s_b) = strip_bounds(axis, s)?;
            if order_objects(axis, obj, &Curve(s_a), ctx)? == RelOrder::Left {
                return Ok(RelOrder::Left);
            }
            if order_objects(axis, obj, &Curve(s_b), ctx)? == RelOrder::Right {
                return Ok(RelOrder::Right);
            }
            Ok(RelOrder::Incomparable)
        }
        (Strip(_), _) => Ok(invert(order_objects(axis, b, a, ctx)?)),
    }
}

/// Order along the expanding (x) direction: `Left` means the first operand
/// lies to the left of the second. Operands are points, `S` curves, or
/// `S` strips.
pub fn order_u(a: &PlaneObject<'_>, b: &PlaneObject<'_>, ctx: &OrderContext) -> Result<RelOrder> {
    order_objects(Axis::Expanding, a, b, ctx)
}

/// Order along the contracting (y) direction: `Left` means the first
/// operand lies below the second. Operands are points, `U` curves, or
/// `U` strips.
pub fn order_s(a: &PlaneObject<'_>, b: &PlaneObject<'_>, ctx: &OrderContext) -> Result<RelOrder> {
    order_objects(Axis::Contracting, a, b, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rect::Rectangle;

    fn ctx() -> OrderContext {
        OrderContext::new(UniversalConePair::from_slopes(0.5, 0.5).unwrap())
    }

    #[test]
    fn horizontally_separated_points() {
        let c = ctx();
        let a = PlaneObject::Point(Vec2::new(0.0, 0.0));
        let b = PlaneObject::Point(Vec2::new(1.0, 0.0));
        assert_eq!(order_u(&a, &b, &c).unwrap(), RelOrder::Left);
        assert_eq!(order_u(&b, &a, &c).unwrap(), RelOrder::Right);
    }

    #[test]
    fn steep_displacement_is_incomparable_in_u() {
        // (0.1, 10) has slope 100 ≫ 0.5: outside the expanding cone.
        let c = ctx();
        let a = PlaneObject::Point(Vec2::new(0.0, 0.0));
        let b = PlaneObject::Point(Vec2::new(0.1, 10.0));
        assert_eq!(order_u(&a, &b, &c).unwrap(), RelOrder::Incomparable);
        // The same displacement is comparable in the contracting order.
        assert_eq!(order_s(&a, &b, &c).unwrap(), RelOrder::Left);
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
    fn curve_order_by_test_lines() {
        let c = ctx();
        let a = vertical(0.2);
        let b = vertical(0.8);
        assert_eq!(
            order_u(&PlaneObject::Curve(&a), &PlaneObject::Curve(&b), &c).unwrap(),
            RelOrder::Left
        );
        assert_eq!(
            order_u(&PlaneObject::Curve(&b), &PlaneObject::Curve(&a), &c).unwrap(),
            RelOrder::Right
        );
        assert_eq!(
            order_u(&PlaneObject::Curve(&a), &PlaneObject::Curve(&a), &c).unwrap(),
            RelOrder::Incomparable
        );
    }

    #[test]
    fn crossing_curves_are_incomparable() {
        let c = ctx();
        let a = MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(0.0, 0.0),
            Vec2::new(0.4, 1.0),
            0.4,
        )
        .unwrap();
        let b = MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(0.4, 0.0),
            Vec2::new(0.0, 1.0),
            0.4,
        )
        .unwrap();
        assert_eq!(
            order_u(&PlaneObject::Curve(&a), &PlaneObject::Curve(&b), &c).unwrap(),
            RelOrder::Incomparable
        );
    }

    #[test]
    fn point_against_curve() {
        let c = ctx();
        let curve = vertical(0.5);
        let left_pt = PlaneObject::Point(Vec2::new(0.2, 0.5));
        let right_pt = PlaneObject::Point(Vec2::new(0.9, 0.5));
        let off_pt = PlaneObject::Point(Vec2::new(0.2, 5.0));
        assert_eq!(
            order_u(&left_pt, &PlaneObject::Curve(&curve), &c).unwrap(),
            RelOrder::Left
        );
        assert_eq!(
            order_u(&PlaneObject::Curve(&curve), &right_pt, &c).unwrap(),
            RelOrder::Left
        );
        assert_eq!(
            order_u(&off_pt, &PlaneObject::Curve(&curve), &c).unwrap(),
            RelOrder::Incomparable
        );
    }

    #[test]
    fn adjacent_strips_sharing_a_bound_are_ordered() {
        let c = ctx();
        let host = Rectangle::from_bbox(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        let s1 = Strip::new(host.clone(), vertical(0.1), vertical(0.4), StripKind::SStrip)
            .unwrap();
        let s2 = Strip::new(host.clone(), vertical(0.4), vertical(0.9), StripKind::SStrip)
            .unwrap();
        let s3 = Strip::new(host, vertical(0.3), vertical(0.6), StripKind::SStrip).unwrap();
        assert_eq!(
            order_u(&PlaneObject::Strip(&s1), &PlaneObject::Strip(&s2), &c).unwrap(),
            RelOrder::Left
        );
        assert_eq!(
            order_u(&PlaneObject::Strip(&s2), &PlaneObject::Strip(&s1), &c).unwrap(),
            RelOrder::Right
        );
        // Overlapping beyond a shared boundary.
        assert_eq!(
            order_u(&PlaneObject::Strip(&s1), &PlaneObject::Strip(&s3), &c).unwrap(),
            RelOrder::Incomparable
        );
    }

    #[test]
    fn point_against_strip() {
        let c = ctx();
        let host = Rectangle::from_bbox(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        let s = Strip::new(host, vertical(0.4), vertical(0.6), StripKind::SStrip).unwrap();
        assert_eq!(
            order_u(
                &PlaneObject::Point(Vec2::new(0.1, 0.5)),
                &PlaneObject::Strip(&s),
                &c
            )
            .unwrap(),
            RelOrder::Left
        );
        assert_eq!(
            order_u(
                &PlaneObject::Point(Vec2::new(0.9, 0.5)),
                &PlaneObject::Strip(&s),
                &c
            )
            .unwrap(),
            RelOrder::Right
        );
        assert_eq!(
            order_u(
                &PlaneObject::Point(Vec2::new(0.5, 0.5)),
                &PlaneObject::Strip(&s),
                &c
            )
            .unwrap(),
            RelOrder::Incomparable
        );
    }
}
