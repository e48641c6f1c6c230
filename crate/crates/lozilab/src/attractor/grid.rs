//! Box covers on a fixed square lattice.
//!
//! All attractor-side verdicts are resolution-stamped: they hold for a union
//! of closed grid boxes at mesh `h`, never for ideal sets.  The lattice is
//! anchored at the origin, so covers computed at the same mesh are directly
//! comparable as sets of integer box ids.
//!
//! Image enclosures are deliberately conservative (bounding boxes of corner
//! images, both branches when a box straddles the divider, padding for
//! non-affine branches).  Overestimating an image can only enlarge a cover;
//! every trapping claim is re-verified afterwards on the traced polygon, so
//! the enclosures need to be sound, not sharp.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::index::SegmentIndex;
use crate::geometry::vec2::Vec2;
use crate::maps::{BranchTag, PiecewiseMap};

use super::region::RegionPolygon;

/// Integer id of a grid box: the box `(i, j)` covers
/// `[i·h, (i+1)·h] × [j·h, (j+1)·h]`.
pub type BoxId = (i64, i64);

/// Extra inclusion slack (relative) in covering rasterization, so boxes the
/// boundary merely grazes are kept.
const RASTER_SLACK: f64 = 1.0001;

/// A square lattice of mesh `h` anchored at the origin.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Grid {
    h: f64,
}

impl Grid {
    /// A lattice with the given positive mesh.
    pub fn new(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid("grid mesh must be positive and finite"));
        }
        Ok(Grid { h })
    }

    /// Mesh size.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// The box containing a point.
    pub fn box_of(&self, p: Vec2) -> BoxId {
        (
            (p.x / self.h).floor() as i64,
            (p.y / self.h).floor() as i64,
        )
    }

    /// Center of a box.
    pub fn center(&self, b: BoxId) -> Vec2 {
        Vec2::new((b.0 as f64 + 0.5) * self.h, (b.1 as f64 + 0.5) * self.h)
    }

    /// The four corners of a box.
    pub fn corners(&self, b: BoxId) -> [Vec2; 4] {
        let (x0, y0) = (b.0 as f64 * self.h, b.1 as f64 * self.h);
        [
            Vec2::new(x0, y0),
            Vec2::new(x0 + self.h, y0),
            Vec2::new(x0 + self.h, y0 + self.h),
            Vec2::new(x0, y0 + self.h),
        ]
    }

    /// Distance from a point to a closed box (zero inside).
    pub fn box_distance(&self, p: Vec2, b: BoxId) -> f64 {
        let (x0, y0) = (b.0 as f64 * self.h, b.1 as f64 * self.h);
        let dx = (x0 - p.x).max(p.x - (x0 + self.h)).max(0.0);
        let dy = (y0 - p.y).max(p.y - (y0 + self.h)).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    /// Distance from a point to a union of boxes, by expanding ring search.
    ///
    /// Returns infinity for an empty set.
    pub fn set_distance(&self, set: &BTreeSet<BoxId>, p: Vec2) -> f64 {
        if set.is_empty() {
            return f64::INFINITY;
        }
        let b0 = self.box_of(p);
        let mut best = f64::INFINITY;
        let mut r: i64 = 0;
        loop {
            // Any box in ring r is at least (r−1)·h away, so once that
            // exceeds the best distance no farther ring can improve it.
            if (r - 1).max(0) as f64 * self.h > best {
                return best;
            }
            let mut ring_has_candidates = false;
            for (i, j) in ring(b0, r) {
                ring_has_candidates = true;
                if set.contains(&(i, j)) {
                    best = best.min(self.box_distance(p, (i, j)));
                }
            }
            debug_assert!(ring_has_candidates);
            if best.is_finite() && (r as f64 - 1.0) * self.h > best {
                return best;
            }
            r += 1;
            if r > 4 * extent(set) + 4 {
                return best;
            }
        }
    }

    /// All boxes within Chebyshev distance `k` of the set.
    pub fn dilate(&self, set: &BTreeSet<BoxId>, k: i64) -> BTreeSet<BoxId> {
        let mut out = BTreeSet::new();
        for &(i, j) in set {
            for di in -k..=k {
                for dj in -k..=k {
                    out.insert((i + di, j + dj));
                }
            }
        }
        out
    }

    /// Boxes whose full `(2k+1)²` neighborhood lies in the set.
    pub fn erode(&self, set: &BTreeSet<BoxId>, k: i64) -> BTreeSet<BoxId> {
        set.iter()
            .copied()
            .filter(|&(i, j)| {
                (-k..=k).all(|di| (-k..=k).all(|dj| set.contains(&(i + di, j + dj))))
            })
            .collect()
    }

    /// Number of 4-connected components.
    pub fn components(&self, set: &BTreeSet<BoxId>) -> usize {
        let mut unseen: BTreeSet<BoxId> = set.clone();
        let mut count = 0;
        while let Some(&start) = unseen.iter().next() {
            count += 1;
            let mut queue = VecDeque::from([start]);
            unseen.remove(&start);
            while let Some((i, j)) = queue.pop_front() {
                for n in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
                    if unseen.remove(&n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        count
    }

    /// Conservative cover of `f(⋃ set)`.
    ///
    /// Per box: images of the corners under the branch owning the box (both
    /// branches when the box straddles the divider), expanded to the bounding
    /// box of those images.  Non-affine branches additionally sample edge
    /// midpoints and pad the enclosure by one box.
    pub fn image_boxes(&self, m: &PiecewiseMap, set: &BTreeSet<BoxId>) -> BTreeSet<BoxId> {
        let mut out = BTreeSet::new();
        for &b in set {
            let corners = self.corners(b);
            let sides: Vec<f64> = corners.iter().map(|&c| m.signed_side(c)).collect();
            let has_minus = sides.iter().any(|&s| s <= 0.0);
            let has_plus = sides.iter().any(|&s| s >= 0.0);
            for tag in [BranchTag::Minus, BranchTag::Plus] {
                let use_branch = match tag {
                    BranchTag::Minus => has_minus,
                    BranchTag::Plus => has_plus,
                };
                if !use_branch {
                    continue;
                }
                let branch = m.branch(tag);
                let affine = branch.as_affine().is_some();
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                let mut absorb = |p: Vec2| {
                    let w = branch.forward(p);
                    lo = Vec2::new(lo.x.min(w.x), lo.y.min(w.y));
                    hi = Vec2::new(hi.x.max(w.x), hi.y.max(w.y));
                };
                for &c in &corners {
                    absorb(c);
                }
                if !affine {
                    for k in 0..4 {
                        absorb(Vec2::lerp(corners[k], corners[(k + 1) % 4], 0.5));
                    }
                    absorb(self.center(b));
                }
                let pad = if affine { 0 } else { 1 };
                let (i0, j0) = self.box_of(lo);
                let (i1, j1) = self.box_of(hi);
                for i in (i0 - pad)..=(i1 + pad) {
                    for j in (j0 - pad)..=(j1 + pad) {
                        out.insert((i, j));
                    }
                }
            }
        }
        out
    }

    /// Boxes that may meet the region: covering rasterization.
    pub fn raster_cover(&self, region: &RegionPolygon) -> Result<BTreeSet<BoxId>> {
        let index = SegmentIndex::build(region.segments(), self.h)?;
        let near = self.h * std::f64::consts::FRAC_1_SQRT_2 * RASTER_SLACK;
        Ok(self
            .bbox_boxes(region, 1)
            .into_iter()
            .filter(|&b| {
                region.contains(self.center(b))
                    || self.corners(b).iter().any(|&c| region.contains(c))
                    || index.distance(self.center(b)) <= near
            })
            .collect())
    }

    /// Boxes certainly contained in the region: inner rasterization.
    ///
    /// A box qualifies when all four corners are interior and the boundary
    /// stays farther from the center than the half-diagonal, which rules out
    /// any boundary passage through the box.
    pub fn raster_inner(&self, region: &RegionPolygon) -> Result<BTreeSet<BoxId>> {
        let index = SegmentIndex::build(region.segments(), self.h)?;
        let clear = self.h * std::f64::consts::FRAC_1_SQRT_2 * RASTER_SLACK;
        Ok(self
            .bbox_boxes(region, 0)
            .into_iter()
            .filter(|&b| {
                index.distance(self.center(b)) > clear
                    && self.corners(b).iter().all(|&c| region.contains(c))
            })
            .collect())
    }

    /// All boxes intersecting the region's bounding box, padded by `pad`.
    fn bbox_boxes(&self, region: &RegionPolygon, pad: i64) -> Vec<BoxId> {
        let (lo, hi) = region.bbox();
        let (i0, j0) = self.box_of(lo);
        let (i1, j1) = self.box_of(hi);
        let mut out = Vec::new();
        for i in (i0 - pad)..=(i1 + pad) {
            for j in (j0 - pad)..=(j1 + pad) {
                out.push((i, j));
            }
        }
        out
    }

    /// Fills checkerboard contacts (two boxes meeting only at a corner) by
    /// inserting one of the missing diagonal partners; returns the number of
    /// boxes added.  Needed before boundary tracing, which requires every
    /// lattice vertex to have at most one outgoing boundary edge.
    pub fn fill_checkerboards(&self, set: &mut BTreeSet<BoxId>) -> usize {
        let mut added = 0;
        loop {
            let mut fresh: Vec<BoxId> = Vec::new();
            for &(i, j) in set.iter() {
                if set.contains(&(i + 1, j + 1))
                    && !set.contains(&(i + 1, j))
                    && !set.contains(&(i, j + 1))
                {
                    fresh.push((i + 1, j));
                }
                if set.contains(&(i + 1, j - 1))
                    && !set.contains(&(i + 1, j))
                    && !set.contains(&(i, j - 1))
                {
                    fresh.push((i + 1, j));
                }
            }
            if fresh.is_empty() {
                return added;
            }
            for b in fresh {
                if set.insert(b) {
                    added += 1;
                }
            }
        }
    }

    /// Fills every bounded component of the complement (holes); returns the
    /// number of boxes added.
    pub fn fill_bounded_complement(&self, set: &mut BTreeSet<BoxId>) -> usize {
        if set.is_empty() {
            return 0;
        }
        let (i0, i1, j0, j1) = bounds(set);
        let (i0, i1, j0, j1) = (i0 - 1, i1 + 1, j0 - 1, j1 + 1);
        let mut outside: BTreeSet<BoxId> = BTreeSet::new();
        let mut queue = VecDeque::from([(i0, j0)]);
        outside.insert((i0, j0));
        while let Some((i, j)) = queue.pop_front() {
            for (ni, nj) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
                if ni < i0 || ni > i1 || nj < j0 || nj > j1 {
                    continue;
                }
                if !set.contains(&(ni, nj)) && outside.insert((ni, nj)) {
                    queue.push_back((ni, nj));
                }
            }
        }
        let mut added = 0;
        for i in i0..=i1 {
            for j in j0..=j1 {
                if !set.contains(&(i, j)) && !outside.contains(&(i, j)) {
                    set.insert((i, j));
                    added += 1;
                }
            }
        }
        added
    }

    /// Traces the boundary of a box union into closed loops.
    ///
    /// Loops keep the interior on their left, so outer boundaries come out
    /// counter-clockwise and hole boundaries clockwise.  Collinear runs are
    /// collapsed.  Fails on checkerboard contacts, which make the boundary
    /// ambiguous; run [`Grid::fill_checkerboards`] first.
    pub fn trace_loops(&self, set: &BTreeSet<BoxId>) -> Result<Vec<Vec<Vec2>>> {
        for &(i, j) in set {
            let diag_up = set.contains(&(i + 1, j + 1))
                && !set.contains(&(i + 1, j))
                && !set.contains(&(i, j + 1));
            let diag_down = set.contains(&(i + 1, j - 1))
                && !set.contains(&(i + 1, j))
                && !set.contains(&(i, j - 1));
            if diag_up || diag_down {
                return Err(Error::inconsistent(format!(
                    "checkerboard contact at box ({i}, {j}); boundary is ambiguous"
                )));
            }
        }
        // Directed boundary edges between lattice vertices, interior on the
        // left.  Without checkerboards each vertex has at most one out-edge.
        let mut next: HashMap<BoxId, BoxId> = HashMap::new();
        let mut insert = |from: BoxId, to: BoxId| -> Result<()> {
            if next.insert(from, to).is_some() {
                return Err(Error::inconsistent(
                    "vertex with two outgoing boundary edges",
                ));
            }
            Ok(())
        };
        for &(i, j) in set {
            if !set.contains(&(i, j - 1)) {
                insert((i, j), (i + 1, j))?;
            }
            if !set.contains(&(i, j + 1)) {
                insert((i + 1, j + 1), (i, j + 1))?;
            }
            if !set.contains(&(i - 1, j)) {
                insert((i, j + 1), (i, j))?;
            }
            if !set.contains(&(i + 1, j)) {
                insert((i + 1, j), (i + 1, j + 1))?;
            }
        }
        let mut loops = Vec::new();
        let mut visited: BTreeSet<BoxId> = BTreeSet::new();
        let starts: Vec<BoxId> = next.keys().copied().collect();
        for start in starts {
            if visited.contains(&start) {
                continue;
            }
            let mut lattice_loop = Vec::new();
            let mut v = start;
            loop {
                visited.insert(v);
                lattice_loop.push(v);
                v = *next
                    .get(&v)
                    .ok_or_else(|| Error::inconsistent("open boundary chain"))?;
                if v == start {
                    break;
                }
            }
            // Collapse collinear runs (axis-aligned: same direction twice).
            let n = lattice_loop.len();
            let mut slim: Vec<Vec2> = Vec::new();
            for k in 0..n {
                let prev = lattice_loop[(k + n - 1) % n];
                let here = lattice_loop[k];
                let nxt = lattice_loop[(k + 1) % n];
                let d_in = (here.0 - prev.0, here.1 - prev.1);
                let d_out = (nxt.0 - here.0, nxt.1 - here.1);
                if d_in != d_out {
                    slim.push(Vec2::new(here.0 as f64 * self.h, here.1 as f64 * self.h));
                }
            }
            loops.push(slim);
        }
        Ok(loops)
    }

    /// Builds a [`RegionPolygon`] from a box union: the largest loop becomes
    /// the outer boundary, the rest its holes.  The set must be 4-connected.
    pub fn to_region(&self, set: &BTreeSet<BoxId>) -> Result<RegionPolygon> {
        if set.is_empty() {
            return Err(Error::invalid("empty box set has no boundary"));
        }
        if self.components(set) != 1 {
            return Err(Error::inconsistent(
                "box union is disconnected; no single outer boundary exists",
            ));
        }
        let mut loops = self.trace_loops(set)?;
        let outer_idx = loops
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                let (pa, pb) = (
                    super::region::signed_area(a).abs(),
                    super::region::signed_area(b).abs(),
                );
                pa.partial_cmp(&pb).expect("finite areas")
            })
            .map(|(k, _)| k)
            .expect("at least one loop");
        let outer = loops.swap_remove(outer_idx);
        RegionPolygon::new(outer, loops)
    }
}

/// Chebyshev ring of radius `r` around a box.
fn ring(b: BoxId, r: i64) -> Vec<BoxId> {
    if r == 0 {
        return vec![b];
    }
    let mut out = Vec::with_capacity((8 * r) as usize);
    for d in -r..=r {
        out.push((b.0 + d, b.1 - r));
        out.push((b.0 + d, b.1 + r));
    }
    for d in (-r + 1)..r {
        out.push((b.0 - r, b.1 + d));
        out.push((b.0 + r, b.1 + d));
    }
    out
}

/// Largest axis extent of the set, in boxes.
fn extent(set: &BTreeSet<BoxId>) -> i64 {
    if set.is_empty() {
        return 0;
    }
    let (i0, i1, j0, j1) = bounds(set);
    (i1 - i0).max(j1 - j0)
}

fn bounds(set: &BTreeSet<BoxId>) -> (i64, i64, i64, i64) {
    let mut it = set.iter();
    let &(i, j) = it.next().expect("nonempty");
    let (mut i0, mut i1, mut j0, mut j1) = (i, i, j, j);
    for &(a, b) in it {
        i0 = i0.min(a);
        i1 = i1.max(a);
        j0 = j0.min(b);
        j1 = j1.max(b);
    }
    (i0, i1, j0, j1)
}

/// A resolution-stamped attractor approximation: a point cloud together with
/// the box cover it lives in.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttractorApprox {
    /// Sampled attractor points.
    points: Vec<Vec2>,
    /// Box cover at mesh `h` containing all points.
    boxes: BTreeSet<BoxId>,
    /// Mesh of the cover.
    h: f64,
    /// Iteration depth (or burn-in) the approximation was computed at.
    generation: usize,
    /// Whether any internal budget was hit while building it.
    truncated: bool,
}

impl AttractorApprox {
    /// Assembles an approximation, checking that the boxes cover the points.
    pub fn new(
        points: Vec<Vec2>,
        boxes: BTreeSet<BoxId>,
        h: f64,
        generation: usize,
        truncated: bool,
    ) -> Result<Self> {
        let grid = Grid::new(h)?;
        for p in &points {
            if !boxes.contains(&grid.box_of(*p)) {
                return Err(Error::inconsistent(format!(
                    "point ({:.6}, {:.6}) outside the box cover",
                    p.x, p.y
                )));
            }
        }
        Ok(AttractorApprox {
            points,
            boxes,
            h,
            generation,
            truncated,
        })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn boxes(&self) -> &BTreeSet<BoxId> {
        &self.boxes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn grid(&self) -> Grid {
        Grid { h: self.h }
    }

    /// Centers of all cover boxes.
    pub fn box_centers(&self) -> Vec<Vec2> {
        let grid = self.grid();
        self.boxes.iter().map(|&b| grid.center(b)).collect()
    }

    /// Whether a point lies within `dilation` boxes of the cover.
    pub fn covers(&self, p: Vec2, dilation: i64) -> bool {
        let grid = self.grid();
        let (i, j) = grid.box_of(p);
        for di in -dilation..=dilation {
            for dj in -dilation..=dilation {
                if self.boxes.contains(&(i + di, j + dj)) {
                    return true;
                }
            }
        }
        false
    }

    /// Checks forward invariance at resolution: the image of every stored
    /// point stays within one box-diagonal of the cover.
    pub fn validate_invariance(&self, m: &PiecewiseMap) -> Result<()> {
        let grid = self.grid();
        let slack = self.h * std::f64::consts::SQRT_2 * (1.0 + 1e-9);
        for p in &self.points {
            let w = m.eval(*p);
            let d = grid.set_distance(&self.boxes, w);
            if d > slack {
                return Err(Error::inconsistent(format!(
                    "image of ({:.6}, {:.6}) drifts {d:.3e} from the cover (allowed {slack:.3e})",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::vec2::Mat2;
    use crate::maps;

    fn grid(h: f64) -> Grid {
        Grid::new(h).expect("grid")
    }

    fn block(i0: i64, i1: i64, j0: i64, j1: i64) -> BTreeSet<BoxId> {
        let mut s = BTreeSet::new();
        for i in i0..=i1 {
            for j in j0..=j1 {
                s.insert((i, j));
            }
        }
        s
    }

    #[test]
    fn raster_of_unit_square_brackets_the_true_box_count() {
        let g = grid(0.25);
        let sq = RegionPolygon::from_rect(Vec2::ZERO, Vec2::new(1.0, 1.0)).expect("square");
        let inner = g.raster_inner(&sq).expect("inner");
        let cover = g.raster_cover(&sq).expect("cover");
        assert_eq!(inner, block(1, 2, 1, 2), "only the four central boxes are certain");
        assert!(cover.is_superset(&block(0, 3, 0, 3)), "cover holds all 16 touched boxes");
        assert!(cover.len() <= 36, "cover stays within one surrounding ring");
        assert!(cover.is_superset(&inner));
    }

    #[test]
    fn dilate_then_erode_recovers_a_block() {
        let g = grid(0.1);
        let s = block(0, 4, 0, 2);
        assert_eq!(g.erode(&g.dilate(&s, 1), 1), s);
        assert_eq!(g.dilate(&s, 1).len(), 7 * 5);
    }

    #[test]
    fn set_distance_matches_brute_force() {
        let g = grid(0.5);
        let mut s = BTreeSet::new();
        s.insert((0, 0));
        s.insert((3, 1));
        s.insert((-2, 4));
        for p in [
            Vec2::new(0.25, 0.25),
            Vec2::new(2.0, 2.0),
            Vec2::new(-3.0, -3.0),
            Vec2::new(1.9, 0.6),
        ] {
            let brute = s
                .iter()
                .map(|&b| g.box_distance(p, b))
                .fold(f64::INFINITY, f64::min);
            assert!((g.set_distance(&s, p) - brute).abs() < 1e-12);
        }
        assert!(g.set_distance(&BTreeSet::new(), Vec2::ZERO).is_infinite());
    }

    #[test]
    fn trace_single_box_and_l_shape() {
        let g = grid(1.0);
        let mut one = BTreeSet::new();
        one.insert((0, 0));
        let loops = g.trace_loops(&one).expect("loops");
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].len(), 4);
        assert!((super::super::region::signed_area(&loops[0]) - 1.0).abs() < 1e-12);

        let mut ell = BTreeSet::new();
        ell.insert((0, 0));
        ell.insert((1, 0));
        ell.insert((0, 1));
        let loops = g.trace_loops(&ell).expect("loops");
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].len(), 6, "an L has six corners");
        assert!((super::super::region::signed_area(&loops[0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_ring_yields_outer_loop_and_hole() {
        let g = grid(1.0);
        let mut ringset = block(0, 2, 0, 2);
        ringset.remove(&(1, 1));
        let loops = g.trace_loops(&ringset).expect("loops");
        assert_eq!(loops.len(), 2);
        let mut areas: Vec<f64> = loops
            .iter()
            .map(|l| super::super::region::signed_area(l))
            .collect();
        areas.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        assert!((areas[0] + 1.0).abs() < 1e-12, "hole is clockwise with area 1");
        assert!((areas[1] - 9.0).abs() < 1e-12, "outer is counter-clockwise with area 9");

        let region = g.to_region(&ringset).expect("region");
        assert_eq!(region.holes().len(), 1);
        assert!((region.area() - 8.0).abs() < 1e-12);
        assert!(!region.contains(Vec2::new(1.5, 1.5)));
        assert!(region.contains(Vec2::new(0.5, 0.5)));
    }

    #[test]
    fn checkerboard_contact_is_detected_and_fillable() {
        let g = grid(1.0);
        let mut s = BTreeSet::new();
        s.insert((0, 0));
        s.insert((1, 1));
        assert!(g.trace_loops(&s).is_err());
        let added = g.fill_checkerboards(&mut s);
        assert!(added >= 1);
        assert!(g.trace_loops(&s).is_ok());
    }

    #[test]
    fn bounded_complement_components_are_filled() {
        let g = grid(1.0);
        let mut ringset = block(0, 4, 0, 4);
        ringset.remove(&(2, 2));
        ringset.remove(&(2, 3));
        let added = g.fill_bounded_complement(&mut ringset);
        assert_eq!(added, 2);
        assert_eq!(ringset, block(0, 4, 0, 4));
        // An unbounded notch is left alone.
        let mut notched = block(0, 4, 0, 4);
        notched.remove(&(2, 4));
        let added = g.fill_bounded_complement(&mut notched);
        assert_eq!(added, 0);
    }

    #[test]
    fn image_boxes_enclose_sampled_images() {
        let m = maps::lozi(1.9, 0.1).expect("map");
        let g = grid(0.05);
        // A patch straddling the divider exercises the two-branch path.
        let patch = block(-2, 1, -1, 1);
        let image = g.image_boxes(&m, &patch);
        for &b in &patch {
            let corners = g.corners(b);
            for sx in 0..5 {
                for sy in 0..5 {
                    let p = Vec2::new(
                        corners[0].x + g.h() * sx as f64 / 4.0,
                        corners[0].y + g.h() * sy as f64 / 4.0,
                    );
                    assert!(
                        image.contains(&g.box_of(m.eval(p))),
                        "image of a sampled point must land in the enclosure"
                    );
                }
            }
        }
    }

    #[test]
    fn attractor_approx_rejects_uncovered_points_and_validates_invariance() {
        let m = maps::lozi(1.9, 0.1).expect("map");
        let g = grid(0.01);
        let mut z = Vec2::new(0.5, 0.1);
        for _ in 0..500 {
            z = m.eval(z);
        }
        let mut points = Vec::new();
        let mut boxes = BTreeSet::new();
        for _ in 0..20_000 {
            z = m.eval(z);
            points.push(z);
            boxes.insert(g.box_of(z));
        }
        let att = AttractorApprox::new(points.clone(), boxes.clone(), 0.01, 500, false)
            .expect("cover holds points");
        att.validate_invariance(&m).expect("one-step invariance at resolution");
        assert!(att.covers(points[0], 0));

        let mut missing = boxes.clone();
        let removed = g.box_of(points[0]);
        missing.remove(&removed);
        assert!(AttractorApprox::new(points, missing, 0.01, 500, false).is_err());
    }

    #[test]
    fn image_enclosure_of_nonaffine_branch_is_padded() {
        // A contracting shear-bend, identical on both sides of the divider so
        // the gluing is trivial, but registered as a custom branch.
        let bend = |tag| {
            crate::maps::Branch::custom(
                tag,
                |z: Vec2| Vec2::new(0.5 * z.x + 0.1 * z.y.sin(), 0.5 * z.y),
                |z: Vec2| Mat2::new(0.5, 0.1 * z.y.cos(), 0.0, 0.5),
                |w: Vec2| Vec2::new(2.0 * w.x - 0.4 * (2.0 * w.y).sin(), 2.0 * w.y),
            )
        };
        let divider = crate::geometry::curve::MonotoneCurve::new(
            crate::geometry::curve::Orientation::S,
            vec![Vec2::new(0.0, -5.0), Vec2::new(0.0, 5.0)],
            0.0,
        )
        .expect("divider");
        let m = crate::maps::PiecewiseMap::new(
            "shear-bend",
            bend(BranchTag::Minus),
            bend(BranchTag::Plus),
            divider,
            1.0,
            Vec::new(),
            (Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0)),
        )
        .expect("map");
        let g = grid(0.125);
        let mut s = BTreeSet::new();
        s.insert((4, 3));
        let image = g.image_boxes(&m, &s);
        let corners = g.corners((4, 3));
        for sx in 0..5 {
            for sy in 0..5 {
                let p = Vec2::new(
                    corners[0].x + g.h() * sx as f64 / 4.0,
                    corners[0].y + g.h() * sy as f64 / 4.0,
                );
                assert!(image.contains(&g.box_of(m.eval(p))));
            }
        }
        assert!(image.len() >= 9, "the safety ring pads the enclosure");
    }
}
