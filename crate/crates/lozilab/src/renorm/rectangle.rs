//! The distinguished rectangle hosting the first-return analysis.
//!
//! The rectangle `R` is a curvilinear box spanning a horizontal band around
//! the divider-image axis:
//!
//! * the **left face** is a segment of the local stable curve of the left
//!   saddle `Y`, so points on it converge to `Y` without leaving the face;
//! * the **right face** is the pull-back of that same stable curve under
//!   the right branch, so its forward image folds back onto the left face's
//!   carrier curve;
//! * the horizontal faces join the corresponding endpoints.
//!
//! Conceptually `R` truncates an *infinite-to-the-right* sleeve: the band
//! between the two horizontal lines, bounded on the left by the extension
//! of the left face and unbounded on the right. Orbits may leave the sleeve
//! only by crossing that left boundary, which [`verify_r_conditions`]
//! checks on a sample grid together with the facts that make the
//! first-return partition work: the divider crosses `R`, its image (the
//! *fold*) lies in the right half-plane, and the local stable curve of the
//! right saddle `X` spans the band and is pierced by the fold.

use serde::Serialize;

use crate::attractor::RegionPolygon;
use crate::cones::synthesize_affine_cones;
use crate::error::{Error, Result};
use crate::geometry::{
    intersect_us, MonotoneCurve, Orientation, Rectangle, UniversalConePair, Vec2,
};
use crate::manifolds::{local_manifolds, pullback, ManifoldApprox};
use crate::maps::{BranchTag, PiecewiseMap, SaddleData};
use crate::renorm::frame::VerticalFrame;

/// Maximum allowed vertical wobble of the divider image: the band is bounded
/// by horizontal lines, which only makes sense over a level fold axis.
const LEVEL_TOL: f64 = 1e-9;

/// How far (in band heights) a pull-back piece may stop short of the band
/// edge and still count as spanning it.
const SPAN_GRACE: f64 = 1e-4;

/// Tunables for building and checking the rectangle.
#[derive(Clone, Debug, Serialize)]
pub struct RenormConfig {
    /// Half-height of the band around the divider-image axis.
    pub half_height: f64,
    /// Right edge of the truncated sleeve used for escape sampling.
    pub x_max: f64,
    /// Per-axis resolution of sampled checks.
    pub samples: usize,
    /// Geometric tolerance for containment and face checks.
    pub tol: f64,
}

impl RenormConfig {
    /// Band heights that work for the built-in instances; unknown gluings
    /// get a middling default that the caller can tune.
    pub fn defaults_for(m: &PiecewiseMap) -> Self {
        let half_height = match m.name() {
            "lozi" => 0.15,
            "bcnf" => 0.3,
            _ => 0.2,
        };
        RenormConfig {
            half_height,
            x_max: 4.0,
            samples: 48,
            tol: 1e-7,
        }
    }
}

/// The rectangle together with the curves later stages keep reusing.
#[derive(Clone, Debug)]
pub struct RenormRectangle {
    rect: Rectangle,
    frame: VerticalFrame,
    axis_y: f64,
    y_lo: f64,
    y_hi: f64,
    x_max: f64,
    saddle_x: SaddleData,
    saddle_y: SaddleData,
    /// Local stable curve through the right saddle `X` (full local piece).
    stable_x: MonotoneCurve,
    /// Local stable curve through the left saddle `Y` (full local piece).
    stable_y: MonotoneCurve,
    /// Local unstable curve through the left saddle `Y`.
    unstable_y: MonotoneCurve,
    /// Expanding/contracting slope half-widths `(c_u, c_s)` used as curve
    /// bounds downstream.
    cone_slopes: (f64, f64),
    /// The divider segment crossing the rectangle, an s-curve.
    divider_seg: MonotoneCurve,
    /// Image of [`RenormRectangle::divider_seg`]: the fold arc, a u-curve on
    /// the divider image.
    fold: MonotoneCurve,
    u_left: Vec2,
    u_right: Vec2,
    tol: f64,
}

/// Picks the approximation piece passing closest to `base`.
fn closest_piece(approx: &ManifoldApprox, base: Vec2) -> Result<MonotoneCurve> {
    approx
        .pieces()
        .iter()
        .min_by(|a, b| {
            a.closest_distance(base)
                .total_cmp(&b.closest_distance(base))
        })
        .cloned()
        .ok_or_else(|| Error::inconsistent("local manifold approximation has no pieces"))
}

/// Nearly-horizontal u-curve joining two face endpoints.
fn horizontal_face(a: Vec2, b: Vec2) -> Result<MonotoneCurve> {
    let dx = (b.x - a.x).abs();
    if dx <= 0.0 {
        return Err(Error::invalid("horizontal face endpoints share an x"));
    }
    let observed = (b.y - a.y).abs() / dx;
    MonotoneCurve::segment(Orientation::U, a, b, (observed * 2.0).max(1e-6))
}

/// Builds the rectangle for `m` at the band size in `cfg`.
///
/// Fails with a condition violation when a local stable curve does not span
/// the band (shrink `half_height`) or when no pull-back piece closes the
/// rectangle on the right; fails with an inconsistency when the divider
/// image is not a single level u-curve, which the band construction needs.
pub fn build_rectangle(m: &PiecewiseMap, cfg: &RenormConfig) -> Result<RenormRectangle> {
    if !(cfg.half_height.is_finite() && cfg.half_height > 0.0) {
        return Err(Error::invalid("band half-height must be positive"));
    }
    if !(cfg.x_max.is_finite()) {
        return Err(Error::invalid("sleeve truncation must be finite"));
    }

    let frame = VerticalFrame::new(m)?;
    let (iy_lo, iy_hi) = frame.divider_image().y_extent();
    if iy_hi - iy_lo > LEVEL_TOL {
        return Err(Error::ConditionViolation(format!(
            "divider image is not level (vertical wobble {}); the band construction needs a level fold axis",
            iy_hi - iy_lo
        )));
    }
    let axis_y = 0.5 * (iy_lo + iy_hi);
    let y_lo = axis_y - cfg.half_height;
    let y_hi = axis_y + cfg.half_height;

    let fp = m.fixed_points()?;
    let saddle_x = fp.x_fixed;
    let saddle_y = fp.y_fixed;

    let (stable_x_m, _) = local_manifolds(m, &saddle_x)?;
    let (stable_y_m, unstable_y_m) = local_manifolds(m, &saddle_y)?;
    let stable_x = closest_piece(&stable_x_m, saddle_x.point)?;
    let stable_y = closest_piece(&stable_y_m, saddle_y.point)?;
    let unstable_y = closest_piece(&unstable_y_m, saddle_y.point)?;

    let (sy_lo, sy_hi) = stable_y.param_range();
    if sy_lo > y_lo + 1e-9 || sy_hi < y_hi - 1e-9 {
        return Err(Error::ConditionViolation(format!(
            "left saddle's local stable curve spans [{sy_lo}, {sy_hi}] but the band needs [{y_lo}, {y_hi}]; shrink half_height"
        )));
    }
    let left = stable_y.sub_between_params(y_lo, y_hi)?;

    // Pull the *full* local stable curve back, not just the clipped face:
    // the preimage of the band can need source material beyond the band.
    let (lx_lo, _) = left.x_extent();
    if cfg.x_max <= lx_lo + 0.1 {
        return Err(Error::invalid(
            "sleeve truncation lies at or left of the left face",
        ));
    }
    let search = Rectangle::from_bbox(Vec2::new(lx_lo - 0.5, y_lo), Vec2::new(cfg.x_max, y_hi))?;
    let candidates = pullback(m, BranchTag::Plus, &stable_y, &search)?;
    let span_tol = SPAN_GRACE * (y_hi - y_lo);
    let mut spanning: Vec<&MonotoneCurve> = candidates
        .iter()
        .filter(|c| {
            let (r0, r1) = c.param_range();
            r0 <= y_lo + span_tol && r1 >= y_hi - span_tol
        })
        .collect();
    let right_full = match spanning.len() {
        0 => {
            return Err(Error::ConditionViolation(
                "no pull-back piece of the left saddle's stable curve spans the band; the rectangle cannot close on the right".into(),
            ))
        }
        1 => spanning.pop().expect("one piece"),
        n => {
            return Err(Error::inconsistent(format!(
                "{n} pull-back pieces span the band; the right face is ambiguous"
            )))
        }
    };
    let (r0, r1) = right_full.param_range();
    let right = right_full.sub_between_params(y_lo.max(r0), y_hi.min(r1))?;

    // Horizontal faces join the actual corners, so closure is exact even
    // when clipping stopped a hair short of the nominal band edge.
    let lower = horizontal_face(left.start(), right.start())?;
    let upper = horizontal_face(left.end(), right.end())?;
    let rect = Rectangle::new(left, right.clone(), lower, upper)?;

    let divider_seg = m.divider().sub_between_params(y_lo, y_hi)?;
    for k in 0..=16 {
        let t = y_lo + (y_hi - y_lo) * k as f64 / 16.0;
        let p = divider_seg.point_at_clamped(t);
        if !rect.contains_tol(p, 1e-6) {
            return Err(Error::ConditionViolation(format!(
                "divider point ({}, {}) lies outside the rectangle; the divider must cross it",
                p.x, p.y
            )));
        }
    }

    let mut fold_pieces = m.curve_image(&divider_seg)?;
    if fold_pieces.len() != 1 {
        return Err(Error::inconsistent(format!(
            "divider segment image split into {} pieces; expected a single fold arc",
            fold_pieces.len()
        )));
    }
    let fold = fold_pieces.pop().expect("one piece");
    if fold.orientation() != Orientation::U {
        return Err(Error::inconsistent("fold arc is not a u-curve"));
    }
    for p in [fold.start(), fold.end()] {
        if frame.height(p).abs() > 1e-7 {
            return Err(Error::inconsistent(
                "fold arc does not lie on the divider image",
            ));
        }
    }
    let u_left = fold.start();
    let u_right = fold.end();

    let cone_slopes = match synthesize_affine_cones(m)? {
        Some(cs) => (cs.summary.c_u, cs.summary.c_s),
        None => observed_cone_slopes(&saddle_x, &saddle_y),
    };

    Ok(RenormRectangle {
        rect,
        frame,
        axis_y,
        y_lo,
        y_hi,
        x_max: cfg.x_max,
        saddle_x,
        saddle_y,
        stable_x,
        stable_y,
        unstable_y,
        cone_slopes,
        divider_seg,
        fold,
        u_left,
        u_right,
        tol: cfg.tol,
    })
}

/// Fallback cone slopes when no affine certificate exists: twice the widest
/// eigendirection slopes, floored away from zero.
fn observed_cone_slopes(x: &SaddleData, y: &SaddleData) -> (f64, f64) {
    let mut c_u: f64 = 1e-3;
    let mut c_s: f64 = 1e-3;
    for s in [x, y] {
        let u = s.unstable_dir;
        if u.x.abs() > 1e-12 {
            c_u = c_u.max(2.0 * (u.y / u.x).abs());
        }
        let v = s.stable_dir;
        if v.y.abs() > 1e-12 {
            c_s = c_s.max(2.0 * (v.x / v.y).abs());
        }
    }
    (c_u, c_s)
}

impl RenormRectangle {
    pub fn rect(&self) -> &Rectangle {
        &self.rect
    }

    pub fn frame(&self) -> &VerticalFrame {
        &self.frame
    }

    /// Height of the divider-image axis the band is centred on.
    pub fn axis_y(&self) -> f64 {
        self.axis_y
    }

    /// Nominal band `(y_lo, y_hi)`.
    pub fn band(&self) -> (f64, f64) {
        (self.y_lo, self.y_hi)
    }

    /// Right edge of the truncated sleeve.
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn saddle_x(&self) -> &SaddleData {
        &self.saddle_x
    }

    pub fn saddle_y(&self) -> &SaddleData {
        &self.saddle_y
    }

    /// Full local stable curve through the right saddle.
    pub fn stable_x(&self) -> &MonotoneCurve {
        &self.stable_x
    }

    /// Full local stable curve through the left saddle (carrier of the left
    /// face).
    pub fn stable_y(&self) -> &MonotoneCurve {
        &self.stable_y
    }

    /// Local unstable curve through the left saddle.
    pub fn unstable_y(&self) -> &MonotoneCurve {
        &self.unstable_y
    }

    /// Slope half-widths `(c_u, c_s)` bounding u- and s-curves.
    pub fn cone_slopes(&self) -> (f64, f64) {
        self.cone_slopes
    }

    /// Ordering context built from the stored cone slopes.
    pub fn order_context(&self) -> Result<crate::geometry::OrderContext> {
        let (c_u, c_s) = self.cone_slopes;
        Ok(crate::geometry::OrderContext::new(
            UniversalConePair::from_slopes(c_u, c_s)?,
        ))
    }

    /// The divider segment crossing the rectangle.
    pub fn divider_seg(&self) -> &MonotoneCurve {
        &self.divider_seg
    }

    /// The fold arc: image of the divider segment, a u-curve on the
    /// divider-image axis.
    pub fn fold(&self) -> &MonotoneCurve {
        &self.fold
    }

    /// Geometric tolerance the rectangle was built and checked with.
    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Left endpoint of the fold arc. Pull-backs are well defined for
    /// s-curves meeting the fold axis only at or left of this point.
    pub fn u_left(&self) -> Vec2 {
        self.u_left
    }

    /// Right endpoint of the fold arc (the tip of the image hook).
    pub fn u_right(&self) -> Vec2 {
        self.u_right
    }

    /// x of the left face's carrier line at height `y`, extended beyond the
    /// band by the chord through the face endpoints.
    pub fn extended_left_x(&self, y: f64) -> f64 {
        let a = self.rect.left().start();
        let b = self.rect.left().end();
        if (b.y - a.y).abs() <= f64::EPSILON {
            return a.x;
        }
        a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y)
    }

    /// Membership in the truncated sleeve: inside the band, right of the
    /// extended left face, left of the truncation edge.
    pub fn contains_extended(&self, p: Vec2, tol: f64) -> bool {
        p.y >= self.y_lo - tol
            && p.y <= self.y_hi + tol
            && p.x >= self.extended_left_x(p.y) - tol
            && p.x <= self.x_max + tol
    }

    /// Membership in the *untruncated* sleeve (no right edge).
    fn in_sleeve(&self, p: Vec2, tol: f64) -> bool {
        p.y >= self.y_lo - tol
            && p.y <= self.y_hi + tol
            && p.x >= self.extended_left_x(p.y) - tol
    }

    /// The segment of the right saddle's local stable curve spanning the
    /// band. This is the curve whose piercing by the fold drives the whole
    /// return-map structure.
    pub fn beta1(&self) -> Result<MonotoneCurve> {
        let (r0, r1) = self.stable_x.param_range();
        if r0 > self.y_lo + 1e-9 || r1 < self.y_hi - 1e-9 {
            return Err(Error::ConditionViolation(format!(
                "right saddle's local stable curve spans [{r0}, {r1}] but the band needs [{}, {}]",
                self.y_lo, self.y_hi
            )));
        }
        let b = self.stable_x.sub_between_params(self.y_lo, self.y_hi)?;
        for k in 0..=16 {
            let t = self.y_lo + (self.y_hi - self.y_lo) * k as f64 / 16.0;
            let p = b.point_at_clamped(t);
            if !self.rect.contains_tol(p, 1e-6) {
                return Err(Error::ConditionViolation(format!(
                    "right saddle's stable segment leaves the rectangle at ({}, {})",
                    p.x, p.y
                )));
            }
        }
        Ok(b)
    }

    /// The *pre-turn line*: the left saddle's unstable carrier line from the
    /// left window edge up to the image `A` of its divider crossing.
    ///
    /// The left branch maps the carrier line into itself, so `A` lies on the
    /// same line; this is verified rather than assumed. Returns the line as
    /// a u-curve together with `A` and the divider crossing.
    pub fn pre_turn_unstable(&self, m: &PiecewiseMap) -> Result<(MonotoneCurve, Vec2, Vec2)> {
        let y = &self.saddle_y;
        let dir = y.unstable_dir;
        if dir.x.abs() <= 1e-9 {
            return Err(Error::invalid(
                "left saddle's unstable direction is vertical; no pre-turn line exists",
            ));
        }
        let slope = dir.y / dir.x;
        let (w_lo, w_hi) = m.window();
        let at = |x: f64| Vec2::new(x, y.point.y + slope * (x - y.point.x));
        let full = MonotoneCurve::segment(
            Orientation::U,
            at(w_lo.x),
            at(w_hi.x),
            slope.abs().max(1e-9) * 1.5,
        )?;
        let crossing = intersect_us(&full, m.divider())?.ok_or_else(|| {
            Error::ConditionViolation(
                "left saddle's unstable line does not cross the divider".into(),
            )
        })?;
        let a = m.eval(crossing);
        let on_line = (a.y - at(a.x).y).abs();
        if on_line > 1e-9 {
            return Err(Error::inconsistent(format!(
                "image of the divider crossing sits {on_line} off the unstable line; the turn is not flat"
            )));
        }
        if a.x <= crossing.x {
            return Err(Error::ConditionViolation(
                "image of the divider crossing does not advance rightward along the unstable line"
                    .into(),
            ));
        }
        let curve = MonotoneCurve::segment(
            Orientation::U,
            at(w_lo.x),
            Vec2::new(a.x, at(a.x).y),
            slope.abs().max(1e-9) * 1.5,
        )?;
        Ok((curve, a, crossing))
    }
}

/// Outcome of the sampled hypothesis checks on a built rectangle.
///
/// `upper_face_in_image_lower` and `upper_face_in_image_upper` record which
/// image half-plane the frame-upper face actually lies in; [`RectangleReport::pass`]
/// requires the *upper* placement, the one every downstream construction
/// relies on.
#[derive(Clone, Debug, Serialize)]
pub struct RectangleReport {
    pub frame_sign: f64,
    /// The left face maps into itself…
    pub left_face_forward_invariant: bool,
    /// …within this distance.
    pub left_face_image_dist: f64,
    /// Every sampled sleeve point that leaves the sleeve lands left of the
    /// extended left face.
    pub escapes_exit_left: bool,
    pub sleeve_samples: usize,
    pub escape_count: usize,
    /// Worst signed overshoot `x − extended_left_x(y)` over all escapes
    /// (≤ tol when escapes exit cleanly); `None` without escapes.
    pub worst_escape_overshoot: Option<f64>,
    /// Images of the truncation edge leave the window entirely, and to the
    /// left of the extended left face.
    pub truncation_exits_window: bool,
    pub left_face_in_minus: bool,
    pub right_face_in_plus: bool,
    pub lower_face_in_image_lower: bool,
    pub upper_face_in_image_lower: bool,
    pub upper_face_in_image_upper: bool,
    pub fold_in_plus: bool,
    pub fold_x_range: (f64, f64),
    /// The right saddle's stable curve spans the band inside the rectangle…
    pub stable_spans_band: bool,
    /// …without leaving the right half-plane.
    pub stable_in_plus: bool,
    /// The fold arc pokes right of that stable segment…
    pub fold_right_of_stable: bool,
    /// …by this margin.
    pub fold_stable_margin: f64,
    /// Crossings of each frame-lower face image piece with the stable
    /// segment (the hook should cross once per arm).
    pub lower_image_crossings: Vec<usize>,
    pub upper_image_crossings: Vec<usize>,
    /// Each face's two crossings straddle the fold axis.
    pub hook_wraps_fold_axis: bool,
    /// `Some(true)` when a supplied trapping region fits inside the
    /// rectangle.
    pub covers_trapping: Option<bool>,
}

impl RectangleReport {
    /// All checks hold (with the frame-upper face in the image-upper
    /// half-plane, and each face image crossing the stable segment exactly
    /// once per arm).
    pub fn pass(&self) -> bool {
        self.left_face_forward_invariant
            && self.escapes_exit_left
            && self.truncation_exits_window
            && self.left_face_in_minus
            && self.right_face_in_plus
            && self.lower_face_in_image_lower
            && self.upper_face_in_image_upper
            && self.fold_in_plus
            && self.stable_spans_band
            && self.stable_in_plus
            && self.fold_right_of_stable
            && self.lower_image_crossings == [1, 1]
            && self.upper_image_crossings == [1, 1]
            && self.hook_wraps_fold_axis
            && self.covers_trapping.unwrap_or(true)
    }
}

/// Samples a curve at `n + 1` evenly spaced parameters.
fn sampled_points(c: &MonotoneCurve, n: usize) -> Vec<Vec2> {
    let (lo, hi) = c.param_range();
    (0..=n)
        .map(|k| c.point_at_clamped(lo + (hi - lo) * k as f64 / n as f64))
        .collect()
}

/// Counts stable-segment crossings of one face-image piece: `0`, `1`, or
/// `2` standing for "more than one" when the crossing scan reports an
/// inconsistency.
fn crossing_count(piece: &MonotoneCurve, stable: &MonotoneCurve) -> Result<(usize, Option<Vec2>)> {
    if piece.orientation() != Orientation::U {
        return Err(Error::inconsistent(
            "face image piece is not a u-curve; the expanding cone is broken",
        ));
    }
    match intersect_us(piece, stable) {
        Ok(Some(p)) => Ok((1, Some(p))),
        Ok(None) => Ok((0, None)),
        Err(Error::Inconsistency(_)) => Ok((2, None)),
        Err(e) => Err(e),
    }
}

/// Runs all sampled hypothesis checks on a built rectangle.
///
/// `trapping` optionally supplies a trapping region that the rectangle is
/// expected to cover. Failed checks are reported, not raised; only broken
/// preconditions (e.g. a face image that is not a u-curve) error out.
pub fn verify_r_conditions(
    m: &PiecewiseMap,
    rr: &RenormRectangle,
    cfg: &RenormConfig,
    trapping: Option<&RegionPolygon>,
) -> Result<RectangleReport> {
    let tol = cfg.tol;
    let (y_lo, y_hi) = rr.band();
    let rect = rr.rect();
    let frame = rr.frame();

    // Left face maps into itself.
    let mut left_invariant = true;
    let mut left_dist = 0.0_f64;
    for p in sampled_points(rect.left(), 32) {
        let w = m.eval(p);
        let d = rect.left().closest_distance(w);
        left_dist = left_dist.max(d);
        if d > tol || w.y < y_lo - tol || w.y > y_hi + tol {
            left_invariant = false;
        }
    }

    // Escapes from the truncated sleeve exit left of the extended left face.
    let rows = cfg.samples.max(8);
    let cols = (2 * cfg.samples).max(16);
    let mut escapes_exit_left = true;
    let mut escape_count = 0usize;
    let mut sleeve_samples = 0usize;
    let mut worst: Option<f64> = None;
    for i in 0..=rows {
        let y = y_lo + (y_hi - y_lo) * i as f64 / rows as f64;
        let x0 = rr.extended_left_x(y);
        for j in 0..=cols {
            let x = x0 + (rr.x_max() - x0) * j as f64 / cols as f64;
            let w = m.eval(Vec2::new(x, y));
            sleeve_samples += 1;
            if rr.in_sleeve(w, tol) {
                continue;
            }
            escape_count += 1;
            let overshoot = w.x - rr.extended_left_x(w.y);
            worst = Some(worst.map_or(overshoot, |v: f64| v.max(overshoot)));
            if overshoot > tol {
                escapes_exit_left = false;
            }
        }
    }

    // The truncation edge leaves the window in one step.
    let (w_lo, w_hi) = m.window();
    let mut truncation_exits = true;
    for k in 0..=64 {
        let y = y_lo + (y_hi - y_lo) * k as f64 / 64.0;
        let w = m.eval(Vec2::new(rr.x_max(), y));
        let outside_window =
            w.x < w_lo.x - tol || w.x > w_hi.x + tol || w.y < w_lo.y - tol || w.y > w_hi.y + tol;
        if !outside_window || w.x > rr.extended_left_x(w.y) + tol {
            truncation_exits = false;
        }
    }

    let left_in_minus = sampled_points(rect.left(), 32)
        .iter()
        .all(|&p| m.signed_side(p) <= tol);
    let right_in_plus = sampled_points(rect.right(), 32)
        .iter()
        .all(|&p| m.signed_side(p) >= -tol);

    let lower_in_image_lower = sampled_points(frame.lower_face(rect), 32)
        .iter()
        .all(|&p| frame.height(p) <= tol);
    let upper_pts = sampled_points(frame.upper_face(rect), 32);
    let upper_in_image_lower = upper_pts.iter().all(|&p| frame.height(p) <= tol);
    let upper_in_image_upper = upper_pts.iter().all(|&p| frame.height(p) >= -tol);

    let fold_in_plus = sampled_points(rr.fold(), 32)
        .iter()
        .all(|&p| m.signed_side(p) >= -tol);
    let fold_x_range = rr.fold().x_extent();

    // The right saddle's stable segment and the fold piercing it.
    let (stable_spans, stable_in_plus, beta1) = match rr.beta1() {
        Ok(b) => {
            let in_plus = sampled_points(&b, 32)
                .iter()
                .all(|&p| m.signed_side(p) >= -tol);
            (true, in_plus, Some(b))
        }
        Err(Error::ConditionViolation(_)) => (false, false, None),
        Err(e) => return Err(e),
    };

    let mut fold_margin = f64::NEG_INFINITY;
    let mut lower_crossings = Vec::new();
    let mut upper_crossings = Vec::new();
    let mut hook_wraps = false;
    if let Some(b) = &beta1 {
        for p in sampled_points(rr.fold(), 32) {
            fold_margin = fold_margin.max(p.x - b.eval_clamped(p.y));
        }
        let mut wraps = true;
        for (face, out) in [
            (frame.lower_face(rect), &mut lower_crossings),
            (frame.upper_face(rect), &mut upper_crossings),
        ] {
            let mut heights = Vec::new();
            for piece in m.curve_image(face)? {
                let (count, at) = crossing_count(&piece, b)?;
                out.push(count);
                if let Some(p) = at {
                    heights.push(frame.height(p));
                }
            }
            // The hook wraps when its two arms pierce the stable segment on
            // opposite sides of the fold axis.
            wraps &= heights.len() == 2
                && heights.iter().any(|&h| h > tol)
                && heights.iter().any(|&h| h < -tol);
        }
        hook_wraps = wraps;
    }
    let fold_right_of_stable = fold_margin > 0.0;

    let covers_trapping = match trapping {
        None => None,
        Some(g) => {
            let spacing = (g.diam() / 256.0).max(1e-6);
            let mut pts = g.sample_boundary(spacing);
            let (lo, hi) = g.bbox();
            let n = cfg.samples.max(8);
            for i in 0..=n {
                for j in 0..=n {
                    let p = Vec2::new(
                        lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                        lo.y + (hi.y - lo.y) * j as f64 / n as f64,
                    );
                    if g.contains(p) {
                        pts.push(p);
                    }
                }
            }
            Some(pts.iter().all(|&p| rect.contains_tol(p, 1e-6)))
        }
    };

    Ok(RectangleReport {
        frame_sign: frame.sign(),
        left_face_forward_invariant: left_invariant,
        left_face_image_dist: left_dist,
        escapes_exit_left,
        sleeve_samples,
        escape_count,
        worst_escape_overshoot: worst,
        truncation_exits_window: truncation_exits,
        left_face_in_minus: left_in_minus,
        right_face_in_plus: right_in_plus,
        lower_face_in_image_lower: lower_in_image_lower,
        upper_face_in_image_lower: upper_in_image_lower,
        upper_face_in_image_upper: upper_in_image_upper,
        fold_in_plus,
        fold_x_range,
        stable_spans_band: stable_spans,
        stable_in_plus,
        fold_right_of_stable,
        fold_stable_margin: fold_margin,
        lower_image_crossings: lower_crossings,
        upper_image_crossings: upper_crossings,
        hook_wraps_fold_axis: hook_wraps,
        covers_trapping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;

    fn lozi_rect() -> (crate::maps::PiecewiseMap, RenormRectangle, RenormConfig) {
        let m = maps::lozi(1.9, 0.1).unwrap();
        let cfg = RenormConfig::defaults_for(&m);
        let rr = build_rectangle(&m, &cfg).unwrap();
        (m, rr, cfg)
    }

    fn bcnf_rect() -> (crate::maps::PiecewiseMap, RenormRectangle, RenormConfig) {
        let m = maps::bcnf(1.55, 0.1, -1.8, 0.1).unwrap();
        let cfg = RenormConfig::defaults_for(&m);
        let rr = build_rectangle(&m, &cfg).unwrap();
        (m, rr, cfg)
    }

    #[test]
    fn default_band_tracks_the_family() {
        let m = maps::lozi(1.9, 0.1).unwrap();
        assert_eq!(RenormConfig::defaults_for(&m).half_height, 0.15);
        let m = maps::bcnf(1.55, 0.1, -1.8, 0.1).unwrap();
        assert_eq!(RenormConfig::defaults_for(&m).half_height, 0.3);
    }

    #[test]
    fn standard_instance_faces_match_hand_values() {
        let (_, rr, _) = lozi_rect();
        // Left face on the stable line through (−1, −0.1) with dx/dy ≈ −0.5125.
        let left_mid = rr.rect().left().eval_clamped(0.0);
        assert!((left_mid - (-1.051_249_2)).abs() < 1e-6, "{left_mid}");
        // Right face: pull-back of the same line under the right branch.
        let right_mid = rr.rect().right().eval_clamped(0.0);
        assert!((right_mid - 1.109_53).abs() < 1e-3, "{right_mid}");
        // Fold arc spans the images of the band's divider endpoints.
        assert!((rr.u_left().x - 0.85).abs() < 1e-9);
        assert!((rr.u_right().x - 1.15).abs() < 1e-9);
        assert!(rr.u_left().y.abs() < 1e-12 && rr.u_right().y.abs() < 1e-12);
        assert_eq!(rr.frame().sign(), 1.0);
    }

    #[test]
    fn mirrored_instance_faces_match_hand_values() {
        let (_, rr, _) = bcnf_rect();
        let left_mid = rr.rect().left().eval_clamped(0.0);
        assert!((left_mid - (-2.072_3)).abs() < 1e-3, "{left_mid}");
        let right_mid = rr.rect().right().eval_clamped(0.0);
        assert!((right_mid - 1.645_18).abs() < 1e-3, "{right_mid}");
        assert!((rr.u_left().x - 0.7).abs() < 1e-9);
        assert!((rr.u_right().x - 1.3).abs() < 1e-9);
        assert_eq!(rr.frame().sign(), -1.0);
    }

    #[test]
    fn standard_instance_passes_all_checks() {
        let (m, rr, cfg) = lozi_rect();
        let report = verify_r_conditions(&m, &rr, &cfg, None).unwrap();
        assert!(report.pass(), "{report:?}");
        assert!(report.upper_face_in_image_upper);
        assert!(!report.upper_face_in_image_lower);
        assert!(report.escape_count > 0, "the hook must escape somewhere");
        assert!(report.fold_stable_margin > 0.5);
    }

    #[test]
    fn mirrored_instance_passes_all_checks() {
        let (m, rr, cfg) = bcnf_rect();
        let report = verify_r_conditions(&m, &rr, &cfg, None).unwrap();
        assert!(report.pass(), "{report:?}");
        assert!(!report.upper_face_in_image_lower);
    }

    #[test]
    fn stable_segment_matches_the_eigenline() {
        let (_, rr, _) = lozi_rect();
        let b = rr.beta1().unwrap();
        // x(0) on the stable line through (1/2.8, 0.1/2.8).
        let x0 = b.eval_clamped(0.0);
        assert!((x0 - 0.338_84).abs() < 1e-4, "{x0}");
    }

    #[test]
    fn pre_turn_line_reaches_the_turn_image() {
        let (m, rr, _) = lozi_rect();
        let (curve, a, crossing) = rr.pre_turn_unstable(&m).unwrap();
        assert!((crossing.x).abs() < 1e-9);
        assert!((crossing.y - (-0.048_750_8)).abs() < 1e-6, "{}", crossing.y);
        assert!((a.x - 0.951_249_2).abs() < 1e-6, "{}", a.x);
        assert!(a.y.abs() < 1e-9);
        assert_eq!(curve.end().x, a.x);

        let (m, rr, _) = bcnf_rect();
        let (_, a, crossing) = rr.pre_turn_unstable(&m).unwrap();
        assert!((crossing.y - 0.072_330_2).abs() < 1e-6, "{}", crossing.y);
        assert!((a.x - 1.072_330_2).abs() < 1e-6, "{}", a.x);
    }

    #[test]
    fn band_too_tall_is_rejected() {
        let m = maps::lozi(1.9, 0.1).unwrap();
        let cfg = RenormConfig {
            half_height: 4.9,
            ..RenormConfig::defaults_for(&m)
        };
        assert!(matches!(
            build_rectangle(&m, &cfg),
            Err(Error::ConditionViolation(_))
        ));
    }

    #[test]
    fn sleeve_membership_uses_the_extended_left_face() {
        let (_, rr, _) = lozi_rect();
        assert!(rr.contains_extended(Vec2::new(0.0, 0.0), 1e-9));
        assert!(rr.contains_extended(Vec2::new(3.0, 0.1), 1e-9));
        assert!(!rr.contains_extended(Vec2::new(-2.0, 0.0), 1e-9));
        assert!(!rr.contains_extended(Vec2::new(0.0, 0.2), 1e-9));
        assert!(!rr.contains_extended(Vec2::new(4.5, 0.0), 1e-9));
    }
}
