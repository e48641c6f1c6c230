//! Segment utilities and predicate-based polyline clipping.

use super::vec2::Vec2;

/// Number of bisection steps used to localize a region boundary along a
/// segment; 80 halvings of a unit-scale segment reach ~1e−24.
const BOUNDARY_BISECT_STEPS: usize = 80;

/// Distance from point `p` to the closed segment `[a, b]`.
pub fn dist_point_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Intersection of closed segments `[p0, p1]` and `[q0, q1]`, if any.
/// Parallel overlapping segments report a single shared point.
pub fn seg_intersect(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Option<Vec2> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    let qp = q0 - p0;
    if denom == 0.0 {
        // Parallel. Collinear overlap: project q endpoints on [p0, p1].
        if qp.cross(r) != 0.0 {
            return None;
        }
        let len_sq = r.norm_sq();
        if len_sq == 0.0 {
            return (p0.dist(q0) == 0.0).then_some(p0);
        }
        let t0 = (q0 - p0).dot(r) / len_sq;
        let t1 = (q1 - p0).dot(r) / len_sq;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let t = lo.max(0.0);
        if t <= hi.min(1.0) {
            return Some(p0 + r * t);
        }
        return None;
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(p0 + r * t)
    } else {
        None
    }
}

/// Bisects the segment `[inside_pt, outside_pt]` for the boundary of the
/// region described by `inside`, returning a point on the inside within
/// the bisection resolution.
pub fn bisect_boundary(inside_pt: Vec2, outside_pt: Vec2, inside: impl Fn(Vec2) -> bool) -> Vec2 {
    debug_assert!(inside(inside_pt) && !inside(outside_pt));
    let mut lo = inside_pt;
    let mut hi = outside_pt;
    for _ in 0..BOUNDARY_BISECT_STEPS {
        if lo.dist(hi) <= 1e-13 {
            break;
        }
        let mid = Vec2::lerp(lo, hi, 0.5);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Clips a polyline to the region described by the `inside` predicate.
///
/// Returns the maximal runs of the polyline lying inside the region, each
/// run terminated by bisected boundary points. A vertex exactly on the
/// boundary belongs to whichever side the predicate assigns it to. Segments
/// that cross the region and return without an inside vertex are missed;
/// refine the polyline first when that matters.
pub fn clip_polyline_to_region(samples: &[Vec2], inside: impl Fn(Vec2) -> bool) -> Vec<Vec<Vec2>> {
    let mut pieces: Vec<Vec<Vec2>> = Vec::new();
    let mut current: Vec<Vec2> = Vec::new();
    for (i, &p) in samples.iter().enumerate() {
        let p_in = inside(p);
        if p_in {
            if current.is_empty() && i > 0 {
                // Entering the region: localize the entry point.
                current.push(bisect_boundary(p, samples[i - 1], &inside));
            }
            current.push(p);
        } else if !current.is_empty() {
            // Leaving the region: localize the exit point.
            let last = *current.last().expect("non-empty run");
            current.push(bisect_boundary(last, p, &inside));
            if current.len() >= 2 {
                pieces.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
        }
    }
    if current.len() >= 2 {
        pieces.push(current);
    }
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_segment_distance_cases() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(2.0, 0.0);
        assert_eq!(dist_point_segment(Vec2::new(1.0, 1.0), a, b), 1.0);
        assert_eq!(dist_point_segment(Vec2::new(-1.0, 0.0), a, b), 1.0);
        assert_eq!(dist_point_segment(Vec2::new(3.0, 0.0), a, b), 1.0);
        assert_eq!(dist_point_segment(Vec2::new(1.0, 0.0), a, b), 0.0);
    }

    #[test]
    fn segment_intersection_crossing() {
        let p = seg_intersect(
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(2.0, 0.0),
        )
        .unwrap();
        assert!(p.dist(Vec2::new(1.0, 1.0)) < 1e-15);
    }

    #[test]
    fn segment_intersection_miss_and_parallel() {
        assert!(seg_intersect(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0)
        )
        .is_none());
        // Collinear with overlap.
        let p = seg_intersect(
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(3.0, 0.0),
        )
        .unwrap();
        assert!(p.dist(Vec2::new(1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn clipping_a_line_to_a_half_plane() {
        let samples: Vec<Vec2> = (0..=10).map(|i| Vec2::new(i as f64 * 0.1, 0.0)).collect();
        let pieces = clip_polyline_to_region(&samples, |p| p.x <= 0.55);
        assert_eq!(pieces.len(), 1);
        let piece = &pieces[0];
        assert_eq!(piece[0], samples[0]);
        let end = piece.last().unwrap();
        assert!((end.x - 0.55).abs() < 1e-12);
    }

    #[test]
    fn clipping_produces_multiple_pieces() {
        // Inside is the union of two vertical bands.
        let samples: Vec<Vec2> = (0..=100).map(|i| Vec2::new(i as f64 * 0.01, 0.0)).collect();
        let pieces =
            clip_polyline_to_region(&samples, |p| p.x < 0.25 || (p.x > 0.5 && p.x < 0.75));
        assert_eq!(pieces.len(), 2);
        assert!((pieces[0].last().unwrap().x - 0.25).abs() < 1e-10);
        assert!((pieces[1][0].x - 0.5).abs() < 1e-10);
        assert!((pieces[1].last().unwrap().x - 0.75).abs() < 1e-10);
    }

    #[test]
    fn clipping_fully_outside_is_empty() {
        let samples = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)];
        assert!(clip_polyline_to_region(&samples, |p| p.y > 1.0).is_empty());
    }
}
