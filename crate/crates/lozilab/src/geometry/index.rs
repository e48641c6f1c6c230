//! Uniform-grid spatial index for distance queries against many segments.
//!
//! Built once over a set of segments (typically refined polylines), the
//! index answers "distance from point to the nearest segment" by scanning
//! grid cells in expanding rings around the query point, stopping as soon
//! as the ring's lower distance bound exceeds the best hit.

use super::clip::dist_point_segment;
use super::vec2::Vec2;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Grid-bucketed segment set supporting nearest-distance queries.
#[derive(Clone, Debug)]
pub struct SegmentIndex {
    segments: Vec<(Vec2, Vec2)>,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
    bbox_lo: Vec2,
    bbox_hi: Vec2,
}

impl SegmentIndex {
    /// Builds an index with the given bucket size (comparable to typical
    /// segment length for good performance).
    pub fn build(segments: Vec<(Vec2, Vec2)>, cell: f64) -> Result<Self> {
        if !cell.is_finite() || cell <= 0.0 {
            return Err(Error::invalid(format!(
                "bucket size must be positive, got {cell}"
            )));
        }
        if segments.len() > u32::MAX as usize {
            return Err(Error::invalid("too many segments for the index"));
        }
        let mut bbox_lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut bbox_hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (idx, (a, b)) in segments.iter().enumerate() {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::invalid("segments must be finite"));
            }
            bbox_lo.x = bbox_lo.x.min(a.x.min(b.x));
            bbox_lo.y = bbox_lo.y.min(a.y.min(b.y));
            bbox_hi.x = bbox_hi.x.max(a.x.max(b.x));
            bbox_hi.y = bbox_hi.y.max(a.y.max(b.y));
            let i0 = (a.x.min(b.x) / cell).floor() as i64;
            let i1 = (a.x.max(b.x) / cell).floor() as i64;
            let j0 = (a.y.min(b.y) / cell).floor() as i64;
            let j1 = (a.y.max(b.y) / cell).floor() as i64;
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets.entry((i, j)).or_default().push(idx as u32);
                }
            }
        }
        Ok(SegmentIndex {
            segments,
            cell,
            buckets,
            bbox_lo,
            bbox_hi,
        })
    }

    /// Collects the segments of a polyline into an existing list.
    pub fn polyline_segments(samples: &[Vec2], out: &mut Vec<(Vec2, Vec2)>) {
        for pair in samples.windows(2) {
            out.push((pair[0], pair[1]));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// Distance from `p` to the nearest indexed segment; infinite for an
    /// empty index.
    pub fn distance(&self, p: Vec2) -> f64 {
        if self.segments.is_empty() {
            return f64::INFINITY;
        }
        let ci = (p.x / self.cell).floor() as i64;
        let cj = (p.y / self.cell).floor() as i64;
        // Upper bound for the ring scan: reach the far corner of the bbox.
        let far = {
            let dx = (p.x - self.bbox_lo.x).abs().max((p.x - self.bbox_hi.x).abs());
            let dy = (p.y - self.bbox_lo.y).abs().max((p.y - self.bbox_hi.y).abs());
            (dx * dx + dy * dy).sqrt()
        };
        let max_ring = (far / self.cell).ceil() as i64 + 2;
        let mut best = f64::INFINITY;
        for r in 0..=max_ring {
            // Everything on ring r is at least (r−1) cells away.
            if best.is_finite() && best <= (r - 1).max(0) as f64 * self.cell {
                break;
            }
            let visit = |i: i64, j: i64, best: &mut f64| {
                if let Some(ids) = self.buckets.get(&(i, j)) {
                    for &id in ids {
                        let (a, b) = self.segments[id as usize];
                        let d = dist_point_segment(p, a, b);
                        if d < *best {
                            *best = d;
                        }
                    }
                }
            };
            if r == 0 {
                visit(ci, cj, &mut best);
            } else {
                for k in -r..=r {
                    visit(ci + k, cj - r, &mut best);
                    visit(ci + k, cj + r, &mut best);
                }
                for k in (-r + 1)..r {
                    visit(ci - r, cj + k, &mut best);
                    visit(ci + r, cj + k, &mut best);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_matches_brute_force() {
        let mut segs = Vec::new();
        // A zig-zag polyline.
        let pts: Vec<Vec2> = (0..50)
            .map(|i| Vec2::new(i as f64 * 0.1, if i % 2 == 0 { 0.0 } else { 0.3 }))
            .collect();
        SegmentIndex::polyline_segments(&pts, &mut segs);
        let index = SegmentIndex::build(segs.clone(), 0.2).unwrap();
        let queries = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.5, 1.0),
            Vec2::new(-1.0, -1.0),
            Vec2::new(4.9, 0.15),
            Vec2::new(10.0, 0.0),
        ];
        for q in queries {
            let brute = segs
                .iter()
                .map(|(a, b)| dist_point_segment(q, *a, *b))
                .fold(f64::INFINITY, f64::min);
            let fast = index.distance(q);
            assert!(
                (brute - fast).abs() < 1e-12,
                "mismatch at ({}, {}): {brute} vs {fast}",
                q.x,
                q.y
            );
        }
    }

    #[test]
    fn empty_index_reports_infinity() {
        let index = SegmentIndex::build(Vec::new(), 1.0).unwrap();
        assert_eq!(index.distance(Vec2::ZERO), f64::INFINITY);
    }
}
