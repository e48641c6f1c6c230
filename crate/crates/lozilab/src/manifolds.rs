//! Stable and unstable manifolds of the saddle fixed points.
//!
//! Local manifolds are eigen-direction segments truncated so that the
//! relevant orbit (backward for unstable, forward for stable) never leaves
//! the half-plane owned by the branch that fixes the point.  Global
//! approximations grow from the local seeds: unstable manifolds by forward
//! images of u-curves, stable manifolds by branch pull-backs intersected
//! with a reference rectangle.  Budgets are arc-length based rather than
//! generation based so orientation-preserving and reversing maps receive
//! comparable coverage.

use serde::{Deserialize, Serialize};

use crate::geometry::{
    clip_polyline_to_region, compare_graphs, intersect_us, seg_intersect, Cone, GraphCmp,
    MonotoneCurve, Orientation, Rectangle, SegmentIndex, Vec2,
};
use crate::maps::{BranchTag, PiecewiseMap, SaddleData};
use crate::{Error, Result};

/// Tolerance for treating two polyline endpoints as the same point when
/// merging smooth continuations.
const ENDPOINT_MERGE_TOL: f64 = 1e-10;
/// Tolerance under which two pieces are considered the same curve and
/// deduplicated during stable growth.
const PIECE_COINCIDE_TOL: f64 = 1e-9;
/// Steps used when marching a ray towards the divider.
const RAY_MARCH_STEPS: usize = 2048;
/// Pieces shorter than this are dropped as numerical dust.
const MIN_PIECE_LENGTH: f64 = 1e-10;
/// Default refinement chord as a fraction of the window diameter.
const CHORD_FRACTION: f64 = 1.0 / 2048.0;

/// Which invariant manifold of a saddle a [`ManifoldApprox`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManifoldSide {
    Stable,
    Unstable,
}

impl ManifoldSide {
    fn orientation(self) -> Orientation {
        match self {
            ManifoldSide::Stable => Orientation::S,
            ManifoldSide::Unstable => Orientation::U,
        }
    }
}

/// A polyline approximation to one invariant manifold: a list of monotone
/// pieces.  Unstable pieces are u-curves, stable pieces s-curves, and the
/// total arc length never exceeds the recorded budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifoldApprox {
    base: Vec2,
    side: ManifoldSide,
    pieces: Vec<MonotoneCurve>,
    length_budget: f64,
    generation: usize,
}

impl ManifoldApprox {
    /// Assembles an approximation, checking that every piece has the
    /// orientation demanded by `side` and the total length fits the budget.
    pub fn new(
        base: Vec2,
        side: ManifoldSide,
        pieces: Vec<MonotoneCurve>,
        length_budget: f64,
        generation: usize,
    ) -> Result<Self> {
        if !base.is_finite() {
            return Err(Error::invalid("manifold base point must be finite"));
        }
        if !length_budget.is_finite() || length_budget <= 0.0 {
            return Err(Error::invalid("length budget must be positive"));
        }
        let want = side.orientation();
        if pieces.iter().any(|p| p.orientation() != want) {
            return Err(Error::invalid(
                "manifold piece orientation does not match its side",
            ));
        }
        let total: f64 = pieces.iter().map(|p| p.arc_length()).sum();
        if total > length_budget * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "piece length {total} exceeds budget {length_budget}"
            )));
        }
        Ok(ManifoldApprox {
            base,
            side,
            pieces,
            length_budget,
            generation,
        })
    }

    pub fn base(&self) -> Vec2 {
        self.base
    }

    pub fn side(&self) -> ManifoldSide {
        self.side
    }

    pub fn pieces(&self) -> &[MonotoneCurve] {
        &self.pieces
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn length_budget(&self) -> f64 {
        self.length_budget
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(|p| p.arc_length()).sum()
    }

    /// All polyline segments of all pieces, for spatial indexing.
    pub fn segments(&self) -> Vec<(Vec2, Vec2)> {
        let mut out = Vec::new();
        for p in &self.pieces {
            SegmentIndex::polyline_segments(p.samples(), &mut out);
        }
        out
    }

    /// Builds a bucketed segment index over the manifold with the given
    /// cell size.
    pub fn index(&self, cell: f64) -> Result<SegmentIndex> {
        SegmentIndex::build(self.segments(), cell)
    }

    /// Distance from `p` to the nearest piece (brute force).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.pieces
            .iter()
            .map(|c| c.closest_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks every piece against the governing cone; any defect is an
    /// error carrying the first offending piece index.
    pub fn validate_cone(&self, cone: &Cone) -> Result<()> {
        for (i, piece) in self.pieces.iter().enumerate() {
            let check = piece.validate_curve(cone)?;
            if !check.ok() {
                return Err(Error::inconsistent(format!(
                    "manifold piece {i} violates its cone (max slope {:.6}, bound {:.6})",
                    check.max_slope, check.bound
                )));
            }
        }
        Ok(())
    }
}

/// Per-generation statistics recorded while growing an unstable manifold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationStats {
    /// Piece count after merging smooth continuations.
    pub pieces: usize,
    /// Total arc length after this generation.
    pub total_length: f64,
    /// Number of divider folds produced by this generation's images.
    pub folds: usize,
    /// Whether the arc-length budget truncated this generation.
    pub truncated: bool,
}

/// Growth history of [`grow_unstable_logged`].
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GrowthLog {
    pub generations: Vec<GenerationStats>,
}

/// Result of an arc-length bound check against a rectangle: a monotone
/// cone-compatible arc inside the rectangle can be at most `diam / alpha_u`
/// long.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArcBoundReport {
    pub length: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Grid diagnostic for how densely the stable approximation fills a
/// rectangle.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DensityReport {
    /// Largest distance from a checked cell centre to the manifold.
    pub max_gap: f64,
    pub grid_n: usize,
    pub cells_total: usize,
    /// Cells whose centre lies in the rectangle and passes the mask.
    pub cells_checked: usize,
    /// Diagonal of one grid cell, the natural comparison scale.
    pub cell_diagonal: f64,
}

/// Outcome of a stable-manifold crossing search along an iterated arc.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum WitnessOutcome {
    /// A point of the original arc whose forward orbit meets the stable
    /// approximation after `generations` steps.
    Found { point: Vec2, generations: usize },
    /// No crossing found before the budgets ran out; inconclusive.
    Exhausted,
}

/// Crossing-search report: outcome plus growth diagnostics.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WitnessReport {
    pub outcome: WitnessOutcome,
    /// First generation whose image met both the divider and the divider's
    /// image curve; expansion above sqrt(2) forces this to happen quickly.
    pub both_contact_generation: Option<usize>,
    pub generations_run: usize,
    pub total_length: f64,
}

/// Computes the local stable and unstable manifolds of one saddle as exact
/// eigen-segments, truncated so the controlling orbit stays inside the
/// owning branch's closed half-plane.  Returned as `(stable, unstable)`.
///
/// For the unstable segment the backward orbit contracts into the fixed
/// point, so a negative multiplier couples the two rays: each ray may reach
/// at most `|lambda|` times the other ray's divider distance.  For the
/// stable segment the forward orbit alternates sides when the multiplier is
/// negative, giving the mirrored constraint with `1 / |lambda|`.  Rays that
/// never meet the divider are cut at the window edge and marked truncated.
pub fn local_manifolds(
    m: &PiecewiseMap,
    saddle: &SaddleData,
) -> Result<(ManifoldApprox, ManifoldApprox)> {
    if m.signed_side(saddle.point).abs() <= 1e-9 {
        return Err(Error::invalid(
            "fixed point lies on the divider; local manifolds are undefined",
        ));
    }
    let stable = local_piece(m, saddle, ManifoldSide::Stable)?;
    let unstable = local_piece(m, saddle, ManifoldSide::Unstable)?;
    Ok((stable, unstable))
}

fn local_piece(m: &PiecewiseMap, saddle: &SaddleData, side: ManifoldSide) -> Result<ManifoldApprox> {
    let (value, dir) = match side {
        ManifoldSide::Stable => (saddle.stable_value, saddle.stable_dir),
        ManifoldSide::Unstable => (saddle.unstable_value, saddle.unstable_dir),
    };
    let p = saddle.point;
    let dir = dir.normalized()?;

    let w_plus = ray_window_exit(m, p, dir);
    let w_minus = ray_window_exit(m, p, -dir);
    let t_plus_div = ray_divider_param(m, p, dir, w_plus);
    let t_minus_div = ray_divider_param(m, p, -dir, w_minus);
    let big = f64::INFINITY;
    let d_plus = t_plus_div.unwrap_or(big);
    let d_minus = t_minus_div.unwrap_or(big);

    // Raw admissible spans before the window cap.
    let (raw_plus, raw_minus) = if value >= 0.0 {
        // Each ray is invariant on its own: the divider is the only limit.
        (d_plus, d_minus)
    } else {
        match side {
            // Backward orbit swaps rays with ratio 1/|lambda|: a ray may
            // extend to |lambda| times the other ray's divider distance.
            ManifoldSide::Unstable => (
                d_plus.min(value.abs() * d_minus),
                d_minus.min(value.abs() * d_plus),
            ),
            // Forward orbit swaps rays with ratio |lambda|: the first step
            // must still land inside the opposite span.
            ManifoldSide::Stable => (
                d_plus.min(d_minus / value.abs()),
                d_minus.min(d_plus / value.abs()),
            ),
        }
    };

    let t_plus = raw_plus.min(w_plus);
    let t_minus = raw_minus.min(w_minus);
    let truncated = raw_plus > w_plus || raw_minus > w_minus;
    if t_plus <= 0.0 && t_minus <= 0.0 {
        return Err(Error::inconsistent(
            "local manifold has zero admissible extent",
        ));
    }

    let a = p - t_minus * dir;
    let b = p + t_plus * dir;
    let orientation = side.orientation();
    let bound = observed_bound(orientation, &[a, p, b])?;
    let mut curve = MonotoneCurve::from_samples(orientation, vec![a, p, b], bound)?;
    if truncated {
        curve = curve.into_truncated();
    }
    let length = curve.arc_length();
    ManifoldApprox::new(p, side, vec![curve], length.max(MIN_PIECE_LENGTH), 0)
}

/// First parameter `t > 0` at which `p + t dir` meets the divider, if any
/// before `t_max`.
fn ray_divider_param(m: &PiecewiseMap, p: Vec2, dir: Vec2, t_max: f64) -> Option<f64> {
    let s0 = m.signed_side(p);
    if s0 == 0.0 {
        return Some(0.0);
    }
    let step = t_max / RAY_MARCH_STEPS as f64;
    if !(step > 0.0) {
        return None;
    }
    let mut t_prev = 0.0;
    for k in 1..=RAY_MARCH_STEPS {
        let t = step * k as f64;
        let s = m.signed_side(p + t * dir);
        if s == 0.0 {
            return Some(t);
        }
        if s.signum() != s0.signum() {
            // Bisect [t_prev, t] down to the crossing.
            let (mut lo, mut hi) = (t_prev, t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let sm = m.signed_side(p + mid * dir);
                if sm == 0.0 {
                    return Some(mid);
                }
                if sm.signum() == s0.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        t_prev = t;
    }
    None
}

/// Parameter at which the ray leaves the axis-aligned window box.
fn ray_window_exit(m: &PiecewiseMap, p: Vec2, dir: Vec2) -> f64 {
    let (lo, hi) = m.window();
    let mut t_exit = f64::INFINITY;
    for (pc, dc, lc, hc) in [(p.x, dir.x, lo.x, hi.x), (p.y, dir.y, lo.y, hi.y)] {
        if dc > 0.0 {
            t_exit = t_exit.min((hc - pc) / dc);
        } else if dc < 0.0 {
            t_exit = t_exit.min((lc - pc) / dc);
        }
    }
    t_exit.max(0.0)
}

/// Grows an unstable approximation by forward images; see
/// [`grow_unstable_logged`] for the recorded history.
pub fn grow_unstable(
    m: &PiecewiseMap,
    seed: &ManifoldApprox,
    generations: usize,
    budget: f64,
    cone: Option<&Cone>,
) -> Result<ManifoldApprox> {
    grow_unstable_logged(m, seed, generations, budget, cone).map(|(a, _)| a)
}

/// Grows an unstable approximation by iterating forward images of its
/// pieces.  Each generation refines, maps, merges smooth continuations,
/// and truncates to the arc-length budget; growth stops at the first
/// truncated generation since the lost ends would poison later images.
/// Because forward images of the seed contain the seed, only the newest
/// generation is kept.
pub fn grow_unstable_logged(
    m: &PiecewiseMap,
    seed: &ManifoldApprox,
    generations: usize,
    budget: f64,
    cone: Option<&Cone>,
) -> Result<(ManifoldApprox, GrowthLog)> {
    if seed.side() != ManifoldSide::Unstable {
        return Err(Error::invalid("grow_unstable needs an unstable seed"));
    }
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::invalid("growth budget must be positive"));
    }
    let (lo, hi) = m.window();
    let max_chord = lo.dist(hi) * CHORD_FRACTION;
    let mut pieces = seed.pieces().to_vec();
    let mut log = GrowthLog::default();
    let mut applied = 0;
    for _ in 0..generations {
        let mut images = Vec::new();
        let mut folds = 0usize;
        for piece in &pieces {
            let refined = piece.refine(max_chord)?;
            let imgs = m.curve_image(&refined)?;
            folds += imgs.len().saturating_sub(1);
            images.extend(imgs);
        }
        let merged = merge_continuations(images);
        let (kept, truncated) = truncate_to_budget(merged, budget)?;
        pieces = kept;
        applied += 1;
        log.generations.push(GenerationStats {
            pieces: pieces.len(),
            total_length: pieces.iter().map(|p| p.arc_length()).sum(),
            folds,
            truncated,
        });
        if truncated {
            break;
        }
    }
    let approx = ManifoldApprox::new(
        seed.base(),
        ManifoldSide::Unstable,
        pieces,
        budget,
        seed.generation() + applied,
    )?;
    if let Some(cone) = cone {
        approx.validate_cone(cone)?;
    }
    Ok((approx, log))
}

/// Pull-back of a curve through one branch: the branch preimage of the
/// curve, restricted to that branch's closed half-plane and to `rect`.
/// Yields zero or more s-curves.
pub fn pullback(
    m: &PiecewiseMap,
    tag: BranchTag,
    curve: &MonotoneCurve,
    rect: &Rectangle,
) -> Result<Vec<MonotoneCurve>> {
    let max_chord = rect.diam() * CHORD_FRACTION;
    let samples = adaptive_preimage(m, tag, curve, max_chord)?;
    let inside = |z: Vec2| {
        let s = m.signed_side(z);
        let in_half = match tag {
            BranchTag::Minus => s <= 1e-12,
            BranchTag::Plus => s >= -1e-12,
        };
        in_half && rect.contains_tol(z, 1e-9)
    };
    let mut out = Vec::new();
    for run in clip_polyline_to_region(&samples, &inside) {
        let run = dedup_points(run);
        if run.len() < 2 {
            continue;
        }
        let bound = observed_bound(Orientation::S, &run)?;
        let piece = MonotoneCurve::from_samples(Orientation::S, run, bound)?;
        if piece.arc_length() >= MIN_PIECE_LENGTH {
            out.push(piece);
        }
    }
    Ok(out)
}

/// Samples the branch preimage of `curve` adaptively so that preimage
/// chords stay below `max_chord` even where the inverse expands strongly.
fn adaptive_preimage(
    m: &PiecewiseMap,
    tag: BranchTag,
    curve: &MonotoneCurve,
    max_chord: f64,
) -> Result<Vec<Vec2>> {
    let branch = m.branch(tag);
    let (t0, t1) = curve.param_range();
    let mut out = Vec::new();
    let z0 = branch.inverse(curve.point_at_clamped(t0));
    out.push(z0);
    // Explicit stack of (t_lo, z_lo, t_hi, z_hi) intervals, emitted left to
    // right; splitting stops once the preimage chord is short enough.
    let mut stack = vec![(t0, z0, t1, branch.inverse(curve.point_at_clamped(t1)))];
    let mut guard = 0usize;
    while let Some((a, za, b, zb)) = stack.pop() {
        guard += 1;
        if guard > 4_000_000 {
            return Err(Error::BudgetExhausted(
                "adaptive preimage refinement diverged".into(),
            ));
        }
        if za.dist(zb) <= max_chord || (b - a).abs() <= 1e-12 {
            out.push(zb);
            continue;
        }
        let mid = 0.5 * (a + b);
        let zm = branch.inverse(curve.point_at_clamped(mid));
        stack.push((mid, zm, b, zb));
        stack.push((a, za, mid, zm));
    }
    Ok(dedup_points(out))
}

/// Grows a stable approximation inside `rect` by accumulating branch
/// pull-backs generation by generation.  Unlike forward growth the
/// pull-backs do not contain their source, so every generation is kept;
/// pieces coinciding with an existing piece are dropped.
pub fn grow_stable(
    m: &PiecewiseMap,
    seed: &ManifoldApprox,
    generations: usize,
    budget: f64,
    rect: &Rectangle,
    cone: Option<&Cone>,
) -> Result<ManifoldApprox> {
    if seed.side() != ManifoldSide::Stable {
        return Err(Error::invalid("grow_stable needs a stable seed"));
    }
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::invalid("growth budget must be positive"));
    }
    let max_chord = rect.diam() * CHORD_FRACTION;
    let mut all: Vec<MonotoneCurve> = Vec::new();
    for piece in seed.pieces() {
        let refined = piece.refine(max_chord)?;
        for run in clip_polyline_to_region(refined.samples(), &|z| rect.contains_tol(z, 1e-9)) {
            let run = dedup_points(run);
            if run.len() < 2 {
                continue;
            }
            let bound = observed_bound(Orientation::S, &run)?;
            let piece = MonotoneCurve::from_samples(Orientation::S, run, bound)?;
            if piece.arc_length() >= MIN_PIECE_LENGTH {
                all.push(piece);
            }
        }
    }
    if all.is_empty() {
        return Err(Error::invalid("stable seed does not meet the rectangle"));
    }

    let mut frontier = all.clone();
    let mut applied = 0;
    let mut truncated = false;
    'gens: for _ in 0..generations {
        let mut next = Vec::new();
        for piece in &frontier {
            for tag in [BranchTag::Minus, BranchTag::Plus] {
                for q in pullback(m, tag, piece, rect)? {
                    if coincides_with_any(&all, &q) {
                        continue;
                    }
                    all.push(q.clone());
                    next.push(q);
                    let total: f64 = all.iter().map(|p| p.arc_length()).sum();
                    if total > budget {
                        let (kept, _) = truncate_to_budget(std::mem::take(&mut all), budget)?;
                        all = kept;
                        truncated = true;
                        applied += 1;
                        break 'gens;
                    }
                }
            }
        }
        applied += 1;
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let _ = truncated;

    let approx = ManifoldApprox::new(
        seed.base(),
        ManifoldSide::Stable,
        all,
        budget,
        seed.generation() + applied,
    )?;
    if let Some(cone) = cone {
        approx.validate_cone(cone)?;
    }
    Ok(approx)
}

/// Checks the arc-length bound for a monotone cone-compatible arc inside a
/// rectangle: `length <= diam(rect) / alpha_u` up to a relative tolerance.
pub fn arc_bound_check(curve: &MonotoneCurve, alpha_u: f64, rect: &Rectangle) -> Result<ArcBoundReport> {
    if !(alpha_u > 0.0 && alpha_u <= 1.0) || !alpha_u.is_finite() {
        return Err(Error::invalid("alpha_u must lie in (0, 1]"));
    }
    let length = curve.arc_length();
    let bound = rect.diam() / alpha_u;
    let pass = length <= bound + 1e-9 * (1.0 + bound);
    Ok(ArcBoundReport {
        length,
        bound,
        pass,
    })
}

/// Measures the largest gap between the stable approximation and the
/// centres of an `n x n` grid over the rectangle, optionally restricted to
/// cells selected by `mask` (typically: cells meeting an attractor cover).
pub fn density_report(
    stable: &ManifoldApprox,
    rect: &Rectangle,
    grid_n: usize,
    mask: Option<&dyn Fn(Vec2) -> bool>,
) -> Result<DensityReport> {
    if grid_n == 0 {
        return Err(Error::invalid("grid_n must be at least 1"));
    }
    if stable.pieces().is_empty() {
        return Err(Error::invalid("stable approximation has no pieces"));
    }
    let (lo, hi) = rect.bbox();
    let w = (hi.x - lo.x) / grid_n as f64;
    let h = (hi.y - lo.y) / grid_n as f64;
    let index = stable.index(rect.diam() / 64.0)?;
    let mut max_gap: f64 = 0.0;
    let mut checked = 0usize;
    for i in 0..grid_n {
        for j in 0..grid_n {
            let c = Vec2::new(lo.x + (i as f64 + 0.5) * w, lo.y + (j as f64 + 0.5) * h);
            if !rect.contains_tol(c, 0.0) {
                continue;
            }
            if let Some(mask) = mask {
                if !mask(c) {
                    continue;
                }
            }
            checked += 1;
            max_gap = max_gap.max(index.distance(c));
        }
    }
    Ok(DensityReport {
        max_gap,
        grid_n,
        cells_total: grid_n * grid_n,
        cells_checked: checked,
        cell_diagonal: (w * w + h * h).sqrt(),
    })
}

/// Searches for a point of `arc` on the stable manifold by iterating the
/// arc forward until some image piece crosses a stable piece, then pulling
/// the crossing back through the (invertible) map.  The report also records
/// the first generation whose image met both the divider and the divider's
/// image, the mechanism that forces a crossing when expansion exceeds
/// sqrt(2).
pub fn crossing_witness(
    m: &PiecewiseMap,
    stable: &ManifoldApprox,
    arc: &MonotoneCurve,
    budget: f64,
    max_generations: usize,
) -> Result<WitnessReport> {
    if arc.orientation() != Orientation::U {
        return Err(Error::invalid("crossing search expects a u-curve arc"));
    }
    if stable.side() != ManifoldSide::Stable {
        return Err(Error::invalid("crossing search needs a stable manifold"));
    }
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::invalid("crossing budget must be positive"));
    }
    let (lo, hi) = m.window();
    let max_chord = lo.dist(hi) * CHORD_FRACTION;
    let divider_image = m.curve_image(&m.divider().refine(max_chord)?)?;

    let mut pieces = vec![arc.clone()];
    let mut both_contact = None;
    let mut total_length = arc.arc_length();
    let mut generations_run = 0;
    for gen in 0..=max_generations {
        generations_run = gen;
        // Contact bookkeeping: does this generation meet the divider and
        // the divider's image simultaneously?
        if both_contact.is_none() && meets_divider(m, &pieces) && meets_curves(&pieces, &divider_image)
        {
            both_contact = Some(gen);
        }
        // Crossing scan against every stable piece.
        for piece in &pieces {
            for s in stable.pieces() {
                if let Some(w) = first_crossing(piece, s, 0)? {
                    let mut z = w;
                    for _ in 0..gen {
                        z = robust_inverse(m, z)?;
                    }
                    return Ok(WitnessReport {
                        outcome: WitnessOutcome::Found {
                            point: z,
                            generations: gen,
                        },
                        both_contact_generation: both_contact,
                        generations_run: gen,
                        total_length,
                    });
                }
            }
        }
        if gen == max_generations {
            break;
        }
        // Grow one more generation under the arc-length budget.
        let mut images = Vec::new();
        for piece in &pieces {
            let refined = piece.refine(max_chord)?;
            images.extend(m.curve_image(&refined)?);
        }
        let merged = merge_continuations(images);
        let (kept, _) = truncate_to_budget(merged, budget)?;
        if kept.is_empty() {
            break;
        }
        pieces = kept;
        total_length = pieces.iter().map(|p| p.arc_length()).sum();
    }
    Ok(WitnessReport {
        outcome: WitnessOutcome::Exhausted,
        both_contact_generation: both_contact,
        generations_run,
        total_length,
    })
}

/// First transversal crossing of a u-piece with an s-piece, splitting the
/// u-piece when multiple crossings confuse the single-root intersector.
fn first_crossing(u: &MonotoneCurve, s: &MonotoneCurve, depth: usize) -> Result<Option<Vec2>> {
    match intersect_us(u, s) {
        Ok(hit) => Ok(hit),
        Err(Error::Inconsistency(_)) if depth < 24 => {
            let (a, b) = u.param_range();
            let mid = 0.5 * (a + b);
            if !(mid > a && mid < b) {
                return Ok(None);
            }
            let left = u.sub_between_params(a, mid)?;
            if let Some(hit) = first_crossing(&left, s, depth + 1)? {
                return Ok(Some(hit));
            }
            let right = u.sub_between_params(mid, b)?;
            first_crossing(&right, s, depth + 1)
        }
        Err(e) => Err(e),
    }
}

/// Global inverse with a fallback that tries both branch inverses and keeps
/// the candidate whose forward image reproduces `w`.
fn robust_inverse(m: &PiecewiseMap, w: Vec2) -> Result<Vec2> {
    if let Some((z, _)) = m.inverse(w) {
        return Ok(z);
    }
    let mut best: Option<(f64, Vec2)> = None;
    for tag in [BranchTag::Minus, BranchTag::Plus] {
        let z = m.branch(tag).inverse(w);
        let err = m.eval(z).dist(w);
        if best.map_or(true, |(e, _)| err < e) {
            best = Some((err, z));
        }
    }
    match best {
        Some((err, z)) if err <= 1e-6 * (1.0 + w.norm()) => Ok(z),
        _ => Err(Error::inconsistent("no branch inverts the given point")),
    }
}

fn meets_divider(m: &PiecewiseMap, pieces: &[MonotoneCurve]) -> bool {
    pieces.iter().any(|p| {
        let mut prev: Option<f64> = None;
        for &z in p.samples() {
            let s = m.signed_side(z);
            if s.abs() <= 1e-12 {
                return true;
            }
            if let Some(ps) = prev {
                if ps.signum() != s.signum() {
                    return true;
                }
            }
            prev = Some(s);
        }
        false
    })
}

fn meets_curves(pieces: &[MonotoneCurve], others: &[MonotoneCurve]) -> bool {
    for p in pieces {
        for o in others {
            let (pa, po) = (p.samples(), o.samples());
            for i in 0..pa.len() - 1 {
                for j in 0..po.len() - 1 {
                    if seg_intersect(pa[i], pa[i + 1], po[j], po[j + 1]).is_some() {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Merges consecutive pieces that continue each other smoothly (shared
/// endpoint and still a monotone graph after concatenation); folds refuse
/// to merge because the joined samples stop being monotone.
fn merge_continuations(pieces: Vec<MonotoneCurve>) -> Vec<MonotoneCurve> {
    let mut out: Vec<MonotoneCurve> = Vec::new();
    for piece in pieces {
        if piece.arc_length() < MIN_PIECE_LENGTH {
            continue;
        }
        if let Some(last) = out.last() {
            if last.orientation() == piece.orientation()
                && last.end().dist(piece.start()) <= ENDPOINT_MERGE_TOL
            {
                let mut samples = last.samples().to_vec();
                samples.extend_from_slice(&piece.samples()[1..]);
                let bound =
                    last.slope_bound().max(piece.slope_bound()) * (1.0 + 1e-9) + 1e-12;
                if let Ok(merged) = MonotoneCurve::new(last.orientation(), samples, bound) {
                    *out.last_mut().expect("non-empty") = merged;
                    continue;
                }
            }
        }
        out.push(piece);
    }
    out
}

/// Keeps pieces in construction order until the cumulative arc length
/// reaches `budget`, cutting the final piece part-way if needed.
fn truncate_to_budget(
    pieces: Vec<MonotoneCurve>,
    budget: f64,
) -> Result<(Vec<MonotoneCurve>, bool)> {
    let mut used = 0.0;
    let mut out = Vec::new();
    for piece in pieces {
        let len = piece.arc_length();
        if used + len <= budget {
            used += len;
            out.push(piece);
            continue;
        }
        let remaining = budget - used;
        if remaining > MIN_PIECE_LENGTH {
            out.push(truncate_curve_at_length(&piece, remaining)?);
        }
        return Ok((out, true));
    }
    Ok((out, false))
}

/// Prefix of a curve with the given arc length.
fn truncate_curve_at_length(curve: &MonotoneCurve, length: f64) -> Result<MonotoneCurve> {
    let samples = curve.samples();
    let mut acc = 0.0;
    let mut kept = vec![samples[0]];
    for w in samples.windows(2) {
        let chord = w[0].dist(w[1]);
        if acc + chord >= length {
            let t = if chord > 0.0 {
                (length - acc) / chord
            } else {
                0.0
            };
            let cut = Vec2::lerp(w[0], w[1], t.clamp(0.0, 1.0));
            if cut.dist(*kept.last().expect("non-empty")) > 1e-13 {
                kept.push(cut);
            }
            break;
        }
        acc += chord;
        kept.push(w[1]);
    }
    if kept.len() < 2 {
        return Err(Error::invalid("truncation left no usable curve"));
    }
    let c = MonotoneCurve::from_samples(curve.orientation(), kept, curve.slope_bound())?;
    Ok(c.into_truncated())
}

/// Largest graph slope observed along a polyline, as the slope bound for a
/// curve constructed from it.
fn observed_bound(orientation: Orientation, samples: &[Vec2]) -> Result<f64> {
    let mut bound: f64 = 0.0;
    for w in samples.windows(2) {
        let (run, rise) = match orientation {
            Orientation::U => (w[1].x - w[0].x, w[1].y - w[0].y),
            Orientation::S => (w[1].y - w[0].y, w[1].x - w[0].x),
        };
        if run.abs() <= 1e-15 {
            return Err(Error::invalid(
                "polyline is not a graph for the requested orientation",
            ));
        }
        bound = bound.max((rise / run).abs());
    }
    Ok(bound * (1.0 + 1e-9) + 1e-12)
}

fn dedup_points(points: Vec<Vec2>) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().map_or(true, |q| q.dist(p) > 1e-13) {
            out.push(p);
        }
    }
    out
}

fn coincides_with_any(existing: &[MonotoneCurve], cand: &MonotoneCurve) -> bool {
    existing.iter().any(|e| {
        e.orientation() == cand.orientation()
            && matches!(
                compare_graphs(e, cand, PIECE_COINCIDE_TOL),
                Ok(GraphCmp::Coincide)
            )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::synthesize_affine_cones;
    use crate::geometry::Mat2;
    use crate::maps::{lozi, piecewise_affine};

    fn lozi_default() -> PiecewiseMap {
        lozi(1.9, 0.1).expect("valid parameters")
    }

    #[test]
    fn local_unstable_at_x_spans_divider_contact_to_its_image() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (_, unstable) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        assert_eq!(unstable.pieces().len(), 1);
        let piece = &unstable.pieces()[0];
        assert_eq!(piece.orientation(), Orientation::U);
        // Left endpoint on the divider, right endpoint its forward image.
        let p0 = piece.start();
        let z = piece.end();
        assert!((p0.x - 0.0).abs() < 1e-9);
        assert!((p0.y - 0.054017578473228356).abs() < 1e-9);
        assert!((z.x - 1.0540175784732284).abs() < 1e-9);
        assert!(z.y.abs() < 1e-9);
        assert!((unstable.total_length() - 1.0554008501582133).abs() < 1e-8);
        assert!(!piece.truncated());
    }

    #[test]
    fn local_stable_at_x_reaches_divider_and_window() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (stable, _) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let piece = &stable.pieces()[0];
        assert_eq!(piece.orientation(), Orientation::S);
        let lo = piece.start();
        let hi = piece.end();
        assert!(lo.x.abs() < 1e-9);
        assert!((lo.y - -0.6611604356160855).abs() < 1e-9);
        // The upward ray never meets the divider and is cut at the window.
        assert!((hi.y - 5.0).abs() < 1e-9);
        assert!((hi.x - 2.901300550635879).abs() < 1e-8);
        assert!(piece.truncated());
    }

    #[test]
    fn local_unstable_at_y_is_window_truncated_on_the_far_ray() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (_, unstable) = local_manifolds(&m, &fp.y_fixed).expect("local manifolds");
        let piece = &unstable.pieces()[0];
        let left = piece.start();
        let right = piece.end();
        assert!((left.x - -5.0).abs() < 1e-9);
        assert!((left.y - -0.3049968789001575).abs() < 1e-8);
        assert!(right.x.abs() < 1e-9);
        assert!((right.y - -0.04875078027496063).abs() < 1e-9);
        assert!(piece.truncated());
    }

    #[test]
    fn one_generation_multiplies_interior_segment_length_by_the_multiplier() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let slope = fp.x_fixed.unstable_dir.y / fp.x_fixed.unstable_dir.x;
        let y = |x: f64| fp.x_fixed.point.y + (x - fp.x_fixed.point.x) * slope;
        let seg = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.2, y(0.2)),
            Vec2::new(0.5, y(0.5)),
            slope.abs() * 1.001,
        )
        .expect("segment");
        let len0 = seg.arc_length();
        let seed = ManifoldApprox::new(fp.x_fixed.point, ManifoldSide::Unstable, vec![seg], 100.0, 0)
            .expect("seed");
        let grown = grow_unstable(&m, &seed, 1, 100.0, None).expect("grow");
        assert_eq!(grown.pieces().len(), 1);
        let ratio = grown.total_length() / len0;
        assert!((ratio - 1.9512492197250393).abs() < 1e-6);
        assert!(ratio > 1.845823645);
    }

    #[test]
    fn divider_crossing_adds_one_piece_and_is_logged_as_a_fold() {
        let m = lozi_default();
        let seg = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(-0.5, 0.02),
            Vec2::new(0.5, 0.02),
            1e-9,
        )
        .expect("segment");
        let seed = ManifoldApprox::new(Vec2::ZERO, ManifoldSide::Unstable, vec![seg], 100.0, 0)
            .expect("seed");
        let (grown, log) = grow_unstable_logged(&m, &seed, 1, 100.0, None).expect("grow");
        assert_eq!(grown.pieces().len(), 2);
        assert_eq!(log.generations[0].folds, 1);
        // The two image pieces share the fold point on the divider's image.
        let a = &grown.pieces()[0];
        let b = &grown.pieces()[1];
        let shared = a
            .samples()
            .iter()
            .any(|p| b.samples().iter().any(|q| p.dist(*q) < 1e-9));
        assert!(shared);
    }

    #[test]
    fn six_generations_obey_count_length_and_arc_bounds() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (_, seed) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let synth = synthesize_affine_cones(&m)
            .expect("synthesis")
            .expect("hyperbolic");
        let cone = synth
            .unstable
            .as_constant()
            .expect("constant field")
            .clone();
        let (grown, log) = grow_unstable_logged(&m, &seed, 6, 1e6, Some(&cone)).expect("grow");
        // Unconditional fold bound: a monotone piece crosses the divider at
        // most once per step, so counts at most double per generation.
        assert!(grown.pieces().len() <= 64);
        let len0 = seed.total_length();
        let lam = 1.9512492197250393f64;
        let total = grown.total_length();
        assert!(total >= 1.845823645f64.powi(6) * len0);
        assert!(total <= lam.powi(6) * len0 * 1.001);
        assert_eq!(log.generations.len(), 6);
        assert!(log.generations.iter().all(|g| !g.truncated));
        // Every piece stays inside the trapping-scale box and respects the
        // arc-length bound for its cone.
        let rect = Rectangle::from_bbox(Vec2::new(-1.1, -0.2), Vec2::new(1.2, 0.2)).expect("rect");
        let alpha_u = 1.0 / (1.0 + synth.summary.c_u * synth.summary.c_u).sqrt();
        for piece in grown.pieces() {
            let report = arc_bound_check(piece, alpha_u, &rect).expect("report");
            assert!(report.pass, "piece length {} > {}", report.length, report.bound);
        }
    }

    #[test]
    fn budget_truncation_stops_growth_and_marks_pieces() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (_, seed) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let (grown, log) = grow_unstable_logged(&m, &seed, 8, 5.0, None).expect("grow");
        assert!(grown.total_length() <= 5.0 * (1.0 + 1e-9));
        assert!(log.generations.last().expect("ran").truncated);
        assert!(log.generations.len() < 8);
        assert!(grown.pieces().iter().any(|p| p.truncated()));
    }

    fn stable_test_rect() -> Rectangle {
        Rectangle::from_bbox(Vec2::new(-1.5, -0.35), Vec2::new(1.5, 0.35)).expect("rect")
    }

    #[test]
    fn stable_pullbacks_roundtrip_and_dedup_the_fixed_line() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (seed, _) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let rect = stable_test_rect();
        let grown = grow_stable(&m, &seed, 1, 100.0, &rect, None).expect("grow");
        // Plus pull-back reproduces the seed line (dropped as coincident),
        // minus pull-back contributes one new s-curve in the left half.
        assert_eq!(grown.pieces().len(), 2);
        let new_piece = grown
            .pieces()
            .iter()
            .find(|p| p.start().x < 0.0)
            .expect("left piece");
        for k in 0..=10 {
            let (a, b) = new_piece.param_range();
            let z = new_piece.point_at_clamped(a + (b - a) * k as f64 / 10.0);
            assert!(z.x <= 1e-9);
            let w = m.eval(z);
            let d = grown.pieces()[0].closest_distance(w);
            assert!(d < 1e-8, "forward image strays {d}");
        }
    }

    #[test]
    fn stable_pieces_converge_forward_to_x() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (seed, _) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let rect = stable_test_rect();
        let grown = grow_stable(&m, &seed, 2, 100.0, &rect, None).expect("grow");
        assert!(grown.pieces().len() >= 3);
        for piece in grown.pieces() {
            let (a, b) = piece.param_range();
            let z = piece.point_at_clamped(0.5 * (a + b));
            let mut w = z;
            let mut dist_prev = f64::INFINITY;
            for n in 0..=8 {
                let d = w.dist(fp.x_fixed.point);
                if n >= 2 {
                    assert!(d <= dist_prev * (1.0 + 1e-9));
                }
                dist_prev = d;
                w = m.eval(w);
            }
            assert!(w.dist(fp.x_fixed.point) < 1e-5);
        }
    }

    #[test]
    fn density_gap_shrinks_with_budget() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (seed, _) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let rect = Rectangle::from_bbox(Vec2::new(-1.05, -0.18), Vec2::new(1.11, 0.18))
            .expect("rect");
        let mut gaps = Vec::new();
        for budget in [5.0, 25.0, 120.0] {
            let grown = grow_stable(&m, &seed, 8, budget, &rect, None).expect("grow");
            let report = density_report(&grown, &rect, 24, None).expect("report");
            assert_eq!(report.cells_checked, 24 * 24);
            gaps.push(report.max_gap);
        }
        assert!(gaps[1] <= gaps[0] + 1e-12);
        assert!(gaps[2] <= gaps[1] + 1e-12);
        assert!(gaps[2] < gaps[0]);
    }

    #[test]
    fn density_single_cell_is_finite() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (seed, _) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let rect = stable_test_rect();
        let report = density_report(&seed, &rect, 1, None).expect("report");
        assert_eq!(report.cells_checked, 1);
        assert!(report.max_gap.is_finite());
        assert!(report.max_gap >= 0.0);
    }

    #[test]
    fn witness_is_immediate_when_the_arc_crosses_the_local_stable_line() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (stable, _) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let arc = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.2, 0.0),
            Vec2::new(0.5, 0.0),
            1e-9,
        )
        .expect("arc");
        let report = crossing_witness(&m, &stable, &arc, 1e4, 50).expect("search");
        match report.outcome {
            WitnessOutcome::Found { point, generations } => {
                assert_eq!(generations, 0);
                // Stable eigenline of X crosses y = 0 at this abscissa.
                assert!((point.x - 0.33883956438391455).abs() < 1e-8);
                assert!(point.y.abs() < 1e-8);
            }
            WitnessOutcome::Exhausted => panic!("expected an immediate witness"),
        }
    }

    #[test]
    fn witness_pulls_back_through_later_generations() {
        let m = lozi_default();
        let fp = m.fixed_points().expect("saddles");
        let (seed, _) = local_manifolds(&m, &fp.x_fixed).expect("local manifolds");
        let rect = stable_test_rect();
        let stable = grow_stable(&m, &seed, 3, 200.0, &rect, None).expect("grow");
        let arc = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.6, 0.01),
            Vec2::new(0.61, 0.01),
            1e-9,
        )
        .expect("arc");
        let report = crossing_witness(&m, &stable, &arc, 1e4, 60).expect("search");
        match report.outcome {
            WitnessOutcome::Found { point, generations } => {
                assert!(generations >= 1);
                // The witness lies on the original arc...
                assert!((point.y - 0.01).abs() < 1e-6);
                assert!(point.x >= 0.6 - 1e-6 && point.x <= 0.61 + 1e-6);
                // ... and its forward orbit lands on the stable set.
                let w = m.eval_n(point, generations);
                assert!(stable.distance_to(w) < 1e-6);
            }
            WitnessOutcome::Exhausted => panic!("expected a witness within 60 generations"),
        }
    }

    #[test]
    fn witness_search_exhausts_on_a_contracting_map() {
        // Contracting on both branches, shifted so the divider image is the
        // line x = 2, well apart from the divider; the orbit drifts right
        // towards (4, 0) and never reaches the stand-in stable piece.
        let m = piecewise_affine(
            (Mat2::new(0.5, 0.0, 0.0, 0.4), Vec2::new(2.0, 0.0)),
            (Mat2::new(0.5, 0.0, 0.0, 0.4), Vec2::new(2.0, 0.0)),
            5.0,
        )
        .expect("map");
        let far = MonotoneCurve::segment(
            Orientation::S,
            Vec2::new(-4.0, -1.0),
            Vec2::new(-4.0, 1.0),
            1e-9,
        )
        .expect("far stable piece");
        let stable =
            ManifoldApprox::new(Vec2::new(-4.0, 0.0), ManifoldSide::Stable, vec![far], 10.0, 0)
                .expect("stable stand-in");
        let arc = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(-0.1, 0.05),
            Vec2::new(0.1, 0.05),
            1e-9,
        )
        .expect("arc");
        let report = crossing_witness(&m, &stable, &arc, 1e4, 40).expect("search");
        assert!(matches!(report.outcome, WitnessOutcome::Exhausted));
        // The arc contracts towards the origin and eventually vanishes
        // below the dust threshold; either way the search must not claim a
        // witness and must never see a double divider contact.
        assert!(report.generations_run >= 20);
        assert!(report.both_contact_generation.is_none());
    }

    #[test]
    fn arc_bound_check_evaluates_the_ratio() {
        let rect = Rectangle::from_bbox(Vec2::new(0.0, 0.0), Vec2::new(1.6, 1.2)).expect("rect");
        let seg = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.0, 0.0),
            Vec2::new(1.6, 1.2),
            0.7500001,
        )
        .expect("diagonal");
        // alpha_u = 1: the diagonal itself is the boundary case.
        let report = arc_bound_check(&seg, 1.0, &rect).expect("report");
        assert!((report.bound - 2.0).abs() < 1e-12);
        assert!(report.pass);
        // alpha_u = 0.8 relaxes the bound to 2.5.
        let report = arc_bound_check(&seg, 0.8, &rect).expect("report");
        assert!((report.bound - 2.5).abs() < 1e-12);
        assert!(report.pass);
        // A bound smaller than the arc fails.
        let long = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(-3.0, 0.0),
            Vec2::new(3.0, 0.0),
            1e-9,
        )
        .expect("long");
        let report = arc_bound_check(&long, 0.9, &rect).expect("report");
        assert!(!report.pass);
        assert!(arc_bound_check(&long, 1.5, &rect).is_err());
    }
}
