//! Polygonal plane regions with optional holes.
//!
//! Trapping statements quantify over open disc-like sets, and every such set
//! this crate manipulates is represented here: a simple outer loop plus
//! disjoint simple hole loops.  Loops are stored closed-implicitly (the last
//! vertex connects back to the first), the outer loop counter-clockwise and
//! holes clockwise, so signed areas read off orientation directly.
//!
//! Membership uses even–odd ray casting, which is orientation-agnostic and
//! robust for the axis-aligned staircase boundaries produced by box covers.
//! Every containment verdict downstream pairs the parity test with an
//! explicit distance-to-boundary, so points within tolerance of the boundary
//! are never silently classified.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::vec2::Vec2;

/// Consecutive loop vertices closer than this are merged at construction.
pub const VERTEX_MERGE_TOL: f64 = 1e-12;

/// Non-adjacent boundary segments closer than this make the region
/// non-simple and are rejected at construction.
pub const SIMPLICITY_TOL: f64 = 1e-12;

/// A simple polygon with optional polygonal holes.
///
/// Invariants enforced at construction: every loop has at least three
/// distinct vertices, no two non-adjacent boundary segments come within
/// [`SIMPLICITY_TOL`] of each other, the outer loop encloses positive area,
/// and every hole vertex lies inside the outer loop.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionPolygon {
    /// Outer boundary, counter-clockwise.
    outer: Vec<Vec2>,
    /// Hole boundaries, clockwise.
    holes: Vec<Vec<Vec2>>,
}

impl RegionPolygon {
    /// Builds a region from an outer loop and hole loops, in any orientation.
    ///
    /// Orientations are normalized (outer counter-clockwise, holes
    /// clockwise); near-duplicate consecutive vertices are merged.
    pub fn new(outer: Vec<Vec2>, holes: Vec<Vec<Vec2>>) -> Result<Self> {
        let mut outer = clean_loop(outer)?;
        if signed_area(&outer) < 0.0 {
            outer.reverse();
        }
        if signed_area(&outer) <= SIMPLICITY_TOL * SIMPLICITY_TOL {
            return Err(Error::invalid("outer loop encloses no area"));
        }
        let mut normalized_holes = Vec::with_capacity(holes.len());
        for hole in holes {
            let mut hole = clean_loop(hole)?;
            if signed_area(&hole) > 0.0 {
                hole.reverse();
            }
            if signed_area(&hole).abs() <= SIMPLICITY_TOL * SIMPLICITY_TOL {
                return Err(Error::invalid("hole loop encloses no area"));
            }
            normalized_holes.push(hole);
        }
        let region = RegionPolygon {
            outer,
            holes: normalized_holes,
        };
        region.check_simplicity()?;
        for hole in &region.holes {
            if !point_in_loop(&region.outer, hole[0]) {
                return Err(Error::invalid("hole vertex outside the outer loop"));
            }
        }
        Ok(region)
    }

    /// Axis-aligned rectangular region.
    pub fn from_rect(lo: Vec2, hi: Vec2) -> Result<Self> {
        if !(lo.x < hi.x && lo.y < hi.y) {
            return Err(Error::invalid("rectangle corners must be ordered"));
        }
        RegionPolygon::new(
            vec![
                lo,
                Vec2::new(hi.x, lo.y),
                hi,
                Vec2::new(lo.x, hi.y),
            ],
            Vec::new(),
        )
    }

    /// Outer loop vertices (counter-clockwise, implicitly closed).
    pub fn outer(&self) -> &[Vec2] {
        &self.outer
    }

    /// Hole loops (clockwise, implicitly closed).
    pub fn holes(&self) -> &[Vec<Vec2>] {
        &self.holes
    }

    /// All loops: the outer loop first, then holes.
    pub fn loops(&self) -> impl Iterator<Item = &[Vec2]> {
        std::iter::once(self.outer.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    /// Every boundary segment of every loop.
    pub fn segments(&self) -> Vec<(Vec2, Vec2)> {
        let mut out = Vec::new();
        for lp in self.loops() {
            for k in 0..lp.len() {
                out.push((lp[k], lp[(k + 1) % lp.len()]));
            }
        }
        out
    }

    /// Enclosed area: outer area minus hole areas.
    pub fn area(&self) -> f64 {
        signed_area(&self.outer) + self.holes.iter().map(|h| signed_area(h)).sum::<f64>()
    }

    /// Total boundary length over all loops.
    pub fn perimeter(&self) -> f64 {
        self.segments().iter().map(|(a, b)| a.dist(*b)).sum()
    }

    /// Axis-aligned bounding box of the outer loop.
    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = self.outer[0];
        let mut hi = self.outer[0];
        for p in &self.outer {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Diameter of the bounding box.
    pub fn diam(&self) -> f64 {
        let (lo, hi) = self.bbox();
        lo.dist(hi)
    }

    /// Even–odd interior test.  Points within [`SIMPLICITY_TOL`] of the
    /// boundary report `false`; callers that care about near-boundary points
    /// must consult [`RegionPolygon::boundary_distance`].
    pub fn contains(&self, p: Vec2) -> bool {
        if self.boundary_distance(p) <= SIMPLICITY_TOL {
            return false;
        }
        let mut inside = false;
        for lp in self.loops() {
            if point_in_loop(lp, p) {
                inside = !inside;
            }
        }
        inside
    }

    /// Distance from a point to the nearest boundary segment.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for lp in self.loops() {
            for k in 0..lp.len() {
                let d = point_segment_distance(p, lp[k], lp[(k + 1) % lp.len()]);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Boundary samples at spacing at most `spacing`, covering every loop.
    ///
    /// Each segment contributes its start vertex plus enough interior points
    /// to keep gaps below the spacing; segment end vertices arrive as the
    /// next segment's start.
    pub fn sample_boundary(&self, spacing: f64) -> Vec<Vec2> {
        let mut out = Vec::new();
        for lp in self.loops() {
            for k in 0..lp.len() {
                let a = lp[k];
                let b = lp[(k + 1) % lp.len()];
                let n = (a.dist(b) / spacing.max(1e-300)).ceil().max(1.0) as usize;
                for i in 0..n {
                    out.push(Vec2::lerp(a, b, i as f64 / n as f64));
                }
            }
        }
        out
    }

    /// A point in the interior, found by horizontal scanlines.
    pub fn interior_point(&self) -> Result<Vec2> {
        let (lo, hi) = self.bbox();
        let height = hi.y - lo.y;
        for k in 0..64 {
            // Low-discrepancy sweep of scan heights, avoiding the bbox edges.
            let t = ((k as f64) * 0.618_033_988_749_895 + 0.137).fract();
            let y = lo.y + height * (0.05 + 0.9 * t);
            let mut xs = Vec::new();
            for lp in self.loops() {
                for i in 0..lp.len() {
                    let a = lp[i];
                    let b = lp[(i + 1) % lp.len()];
                    if (a.y > y) != (b.y > y) {
                        xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                    }
                }
            }
            xs.sort_by(|p, q| p.partial_cmp(q).expect("finite crossings"));
            for pair in xs.chunks(2) {
                if pair.len() == 2 {
                    let cand = Vec2::new(0.5 * (pair[0] + pair[1]), y);
                    if self.contains(cand) && self.boundary_distance(cand) > SIMPLICITY_TOL {
                        return Ok(cand);
                    }
                }
            }
        }
        Err(Error::inconsistent(
            "no interior point found by scanline sweep",
        ))
    }

    /// Rejects any pair of non-adjacent boundary segments that touch or come
    /// within [`SIMPLICITY_TOL`] of each other, over all loops.
    fn check_simplicity(&self) -> Result<()> {
        #[derive(Clone, Copy)]
        struct Seg {
            lp: usize,
            idx: usize,
            len: usize,
            a: Vec2,
            b: Vec2,
        }
        let mut segs = Vec::new();
        for (lp_idx, lp) in self.loops().enumerate() {
            for k in 0..lp.len() {
                segs.push(Seg {
                    lp: lp_idx,
                    idx: k,
                    len: lp.len(),
                    a: lp[k],
                    b: lp[(k + 1) % lp.len()],
                });
            }
        }
        let cell = segs
            .iter()
            .map(|s| s.a.dist(s.b))
            .fold(0.0_f64, f64::max)
            .max(SIMPLICITY_TOL * 16.0);
        let key = |p: Vec2| -> (i64, i64) {
            ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
        };
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (s_idx, s) in segs.iter().enumerate() {
            let (i0, j0) = key(Vec2::new(s.a.x.min(s.b.x), s.a.y.min(s.b.y)));
            let (i1, j1) = key(Vec2::new(s.a.x.max(s.b.x), s.a.y.max(s.b.y)));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets.entry((i, j)).or_default().push(s_idx);
                }
            }
        }
        let mut checked: HashMap<(usize, usize), ()> = HashMap::new();
        for ids in buckets.values() {
            for (pos, &si) in ids.iter().enumerate() {
                for &sj in &ids[pos + 1..] {
                    let (si, sj) = (si.min(sj), si.max(sj));
                    if checked.insert((si, sj), ()).is_some() {
                        continue;
                    }
                    let (p, q) = (segs[si], segs[sj]);
                    let adjacent = p.lp == q.lp
                        && ((p.idx + 1) % p.len == q.idx || (q.idx + 1) % q.len == p.idx);
                    if adjacent {
                        continue;
                    }
                    if segment_distance(p.a, p.b, q.a, q.b) <= SIMPLICITY_TOL {
                        return Err(Error::invalid(format!(
                            "boundary self-intersects near ({:.6}, {:.6})",
                            p.a.x, p.a.y
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Merges near-duplicate consecutive vertices and demands three survivors.
fn clean_loop(mut lp: Vec<Vec2>) -> Result<Vec<Vec2>> {
    if lp.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("non-finite loop vertex"));
    }
    let mut cleaned: Vec<Vec2> = Vec::with_capacity(lp.len());
    for p in lp.drain(..) {
        if cleaned.last().map(|q| q.dist(p) <= VERTEX_MERGE_TOL) != Some(true) {
            cleaned.push(p);
        }
    }
    while cleaned.len() > 1
        && cleaned[0].dist(*cleaned.last().expect("nonempty")) <= VERTEX_MERGE_TOL
    {
        cleaned.pop();
    }
    if cleaned.len() < 3 {
        return Err(Error::invalid("loop needs at least three distinct vertices"));
    }
    Ok(cleaned)
}

/// Shoelace signed area of an implicitly closed loop.
pub fn signed_area(lp: &[Vec2]) -> f64 {
    let mut twice = 0.0;
    for k in 0..lp.len() {
        let a = lp[k];
        let b = lp[(k + 1) % lp.len()];
        twice += a.cross(b);
    }
    0.5 * twice
}

/// Even–odd parity of a single loop via half-open ray casting.
fn point_in_loop(lp: &[Vec2], p: Vec2) -> bool {
    let mut inside = false;
    for k in 0..lp.len() {
        let a = lp[k];
        let b = lp[(k + 1) % lp.len()];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from a point to a closed segment.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let denom = ab.norm_sq();
    if denom == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / denom).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Distance between two closed segments: zero when they cross.
pub fn segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    let d1 = (a1 - a0).cross(b0 - a0);
    let d2 = (a1 - a0).cross(b1 - a0);
    let d3 = (b1 - b0).cross(a0 - b0);
    let d4 = (b1 - b0).cross(a1 - b0);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return 0.0;
    }
    point_segment_distance(b0, a0, a1)
        .min(point_segment_distance(b1, a0, a1))
        .min(point_segment_distance(a0, b0, b1))
        .min(point_segment_distance(a1, b0, b1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> RegionPolygon {
        RegionPolygon::from_rect(Vec2::ZERO, Vec2::new(1.0, 1.0)).expect("square")
    }

    #[test]
    fn square_area_perimeter_and_membership() {
        let sq = unit_square();
        assert!((sq.area() - 1.0).abs() < 1e-15);
        assert!((sq.perimeter() - 4.0).abs() < 1e-15);
        assert!(sq.contains(Vec2::new(0.5, 0.5)));
        assert!(!sq.contains(Vec2::new(1.5, 0.5)));
        assert!(!sq.contains(Vec2::new(0.5, -0.1)));
        assert!((sq.boundary_distance(Vec2::new(0.5, 0.5)) - 0.5).abs() < 1e-15);
        assert!((sq.boundary_distance(Vec2::new(2.0, 0.5)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hole_subtracts_area_and_excludes_points() {
        let outer = vec![
            Vec2::ZERO,
            Vec2::new(3.0, 0.0),
            Vec2::new(3.0, 3.0),
            Vec2::new(0.0, 3.0),
        ];
        let hole = vec![
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(1.0, 2.0),
        ];
        let region = RegionPolygon::new(outer, vec![hole]).expect("annulus");
        assert!((region.area() - 8.0).abs() < 1e-12);
        assert!(!region.contains(Vec2::new(1.5, 1.5)), "hole interior excluded");
        assert!(region.contains(Vec2::new(0.5, 1.5)), "ring interior included");
        assert!((region.boundary_distance(Vec2::new(1.5, 1.5)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bowtie_is_rejected_as_non_simple() {
        let bowtie = vec![
            Vec2::ZERO,
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(RegionPolygon::new(bowtie, Vec::new()).is_err());
    }

    #[test]
    fn hole_outside_outer_is_rejected() {
        let outer = vec![
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let far_hole = vec![
            Vec2::new(5.0, 5.0),
            Vec2::new(6.0, 5.0),
            Vec2::new(6.0, 6.0),
        ];
        assert!(RegionPolygon::new(outer, vec![far_hole]).is_err());
    }

    #[test]
    fn clockwise_input_is_normalized_counter_clockwise() {
        let cw = vec![
            Vec2::ZERO,
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ];
        let region = RegionPolygon::new(cw, Vec::new()).expect("square");
        assert!(signed_area(region.outer()) > 0.0);
    }

    #[test]
    fn degenerate_loops_are_rejected() {
        let collinear = vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        assert!(RegionPolygon::new(collinear, Vec::new()).is_err());
        let duplicated = vec![Vec2::ZERO, Vec2::new(0.0, 5e-13), Vec2::new(1.0, 0.0)];
        assert!(RegionPolygon::new(duplicated, Vec::new()).is_err());
    }

    #[test]
    fn interior_point_lands_inside_even_with_a_hole() {
        let outer = vec![
            Vec2::ZERO,
            Vec2::new(3.0, 0.0),
            Vec2::new(3.0, 3.0),
            Vec2::new(0.0, 3.0),
        ];
        let hole = vec![
            Vec2::new(0.5, 0.5),
            Vec2::new(2.5, 0.5),
            Vec2::new(2.5, 2.5),
            Vec2::new(0.5, 2.5),
        ];
        let region = RegionPolygon::new(outer, vec![hole]).expect("annulus");
        let p = region.interior_point().expect("interior point");
        assert!(region.contains(p));
    }

    #[test]
    fn boundary_samples_respect_spacing() {
        let sq = unit_square();
        let samples = sq.sample_boundary(0.3);
        assert!(samples.len() >= 16, "4 segments × ≥4 points");
        for p in &samples {
            assert!(sq.boundary_distance(*p) < 1e-12);
        }
    }

    #[test]
    fn serde_round_trip_preserves_geometry() {
        let outer = vec![
            Vec2::ZERO,
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let region = RegionPolygon::new(outer, Vec::new()).expect("rect");
        let json = serde_json::to_string(&region).expect("serialize");
        let back: RegionPolygon = serde_json::from_str(&json).expect("deserialize");
        assert_eq!(back.outer().len(), region.outer().len());
        assert!((back.area() - region.area()).abs() < 1e-15);
    }
}
