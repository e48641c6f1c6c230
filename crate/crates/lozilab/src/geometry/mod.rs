//! Planar primitives: vectors, cones, monotone curves, orderings,
//! rectangles, strips, clipping, and a segment index.
//!
//! All types are immutable after construction and all operations are pure,
//! so everything here is safe to share across threads without coordination.

pub mod clip;
pub mod cone;
pub mod curve;
pub mod index;
pub mod order;
pub mod rect;
pub mod vec2;

pub use clip::{bisect_boundary, clip_polyline_to_region, dist_point_segment, seg_intersect};
pub use cone::{Cone, UniversalConePair};
pub use curve::{
    intersect_us, validate_samples, CurveCheck, CurveViolation, MonotoneCurve, Orientation,
    ViolationKind,
};
pub use index::SegmentIndex;
pub use order::{compare_graphs, order_s, order_u, GraphCmp, OrderContext, PlaneObject, RelOrder};
pub use rect::{Rectangle, Strip, StripKind};
pub use vec2::{Mat2, Vec2};

/// Convenience: membership in a cone, as a free function mirroring the
/// method on [`Cone`].
pub fn cone_contains(c: &Cone, u: Vec2) -> crate::error::Result<bool> {
    c.contains(u)
}
