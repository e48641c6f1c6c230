//! The piecewise map kernel: two branches glued along a divider.
//!
//! A map here consists of two invertible C¹ branches `f_−`, `f_+` that agree
//! on a dividing `S` curve (for the built-in families, the y-axis). Points
//! left of the divider evaluate through the minus branch, points right of it
//! through the plus branch. The half-planes are written ℝ₋, ℝ₊; their
//! images ℝ¹₋, ℝ¹₊ are probed through branch-wise inverses.
//!
//! Built-in families:
//! - [`lozi`]: `(x, y) ↦ (1 + y − a|x|, bx)`;
//! - [`bcnf`]: the border-collision normal form
//!   `(x, y) ↦ (τ_i x + y + 1, −δ_i x)` with `i` chosen by the sign of `x`;
//! - [`piecewise_affine`]: arbitrary affine branches over the y-axis divider;
//! - [`rotation_map`]: a rigid rotation glued trivially to itself, used as a
//!   non-hyperbolic control case.

use crate::error::{Error, Result};
use crate::geometry::{Mat2, MonotoneCurve, Orientation, Vec2};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Which side of the divider a branch governs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchTag {
    Minus,
    Plus,
}

type PlaneFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
type JacobianFn = Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>;

/// One branch of a piecewise map.
#[derive(Clone)]
enum BranchKind {
    /// `z ↦ M z + c`, with the inverse precomputed.
    Affine {
        matrix: Mat2,
        offset: Vec2,
        inv_matrix: Mat2,
    },
    /// User-supplied closed forms; the inverse must be exact, since all
    /// pull-back constructions lean on it.
    Custom {
        forward: PlaneFn,
        jacobian: JacobianFn,
        inverse: PlaneFn,
    },
}

/// An invertible C¹ planar map with an explicit Jacobian and inverse.
#[derive(Clone)]
pub struct Branch {
    tag: BranchTag,
    kind: BranchKind,
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            BranchKind::Affine { matrix, offset, .. } => f
                .debug_struct("Branch")
                .field("tag", &self.tag)
                .field("matrix", matrix)
                .field("offset", offset)
                .finish(),
            BranchKind::Custom { .. } => f
                .debug_struct("Branch")
                .field("tag", &self.tag)
                .field("kind", &"custom")
                .finish(),
        }
    }
}

impl Branch {
    /// Affine branch `z ↦ matrix·z + offset`; the matrix must be invertible.
    pub fn affine(tag: BranchTag, matrix: Mat2, offset: Vec2) -> Result<Self> {
        if !matrix.is_finite() || !offset.is_finite() {
            return Err(Error::invalid("affine branch data must be finite"));
        }
        let inv_matrix = matrix.inverse().map_err(|_| {
            Error::invalid(format!(
                "affine branch matrix is singular (det = {})",
                matrix.det()
            ))
        })?;
        Ok(Branch {
            tag,
            kind: BranchKind::Affine {
                matrix,
                offset,
                inv_matrix,
            },
        })
    }

    /// Custom C¹ branch from closed forms. The caller vouches for
    /// `inverse(forward(z)) = z`; map constructors spot-check it.
    pub fn custom(
        tag: BranchTag,
        forward: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        jacobian: impl Fn(Vec2) -> Mat2 + Send + Sync + 'static,
        inverse: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    ) -> Self {
        Branch {
            tag,
            kind: BranchKind::Custom {
                forward: Arc::new(forward),
                jacobian: Arc::new(jacobian),
                inverse: Arc::new(inverse),
            },
        }
    }

    pub fn tag(&self) -> BranchTag {
        self.tag
    }

    /// The affine data `(matrix, offset)` when this branch is affine.
    pub fn as_affine(&self) -> Option<(Mat2, Vec2)> {
        match &self.kind {
            BranchKind::Affine { matrix, offset, .. } => Some((*matrix, *offset)),
            BranchKind::Custom { .. } => None,
        }
    }

    /// Forward evaluation.
    pub fn forward(&self, z: Vec2) -> Vec2 {
        match &self.kind {
            BranchKind::Affine { matrix, offset, .. } => matrix.mul_vec(z) + *offset,
            BranchKind::Custom { forward, .. } => forward(z),
        }
    }

    /// Jacobian at `z`.
    pub fn jacobian(&self, z: Vec2) -> Mat2 {
        match &self.kind {
            BranchKind::Affine { matrix, .. } => *matrix,
            BranchKind::Custom { jacobian, .. } => jacobian(z),
        }
    }

    /// Inverse evaluation (unrestricted; side checks happen in
    /// [`PiecewiseMap::inverse_branch`]).
    pub fn inverse(&self, w: Vec2) -> Vec2 {
        match &self.kind {
            BranchKind::Affine {
                offset, inv_matrix, ..
            } => inv_matrix.mul_vec(w - *offset),
            BranchKind::Custom { inverse, .. } => inverse(w),
        }
    }
}

/// Eigen data of a saddle fixed point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SaddleData {
    pub point: Vec2,
    /// Expanding multiplier, `|value| > 1`.
    pub unstable_value: f64,
    /// Unit eigenvector of the expanding multiplier.
    pub unstable_dir: Vec2,
    /// Contracting multiplier, `|value| < 1`.
    pub stable_value: f64,
    /// Unit eigenvector of the contracting multiplier.
    pub stable_dir: Vec2,
}

/// The two saddles of a gluing: `X` in the right half-plane and `Y` in the
/// left half-plane.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FixedPointData {
    pub x_fixed: SaddleData,
    pub y_fixed: SaddleData,
}

/// A piecewise map: two branches glued along a divider curve.
#[derive(Clone, Debug)]
pub struct PiecewiseMap {
    name: String,
    minus: Branch,
    plus: Branch,
    divider: MonotoneCurve,
    epsilon: i8,
    lambda_claimed: f64,
    params: Vec<(String, f64)>,
    window: (Vec2, Vec2),
}

/// Number of divider samples used by the construction-time gluing check.
const GLUING_SAMPLES: usize = 128;

/// Gluing agreement tolerance along the divider.
const GLUING_TOL: f64 = 1e-10;

impl PiecewiseMap {
    /// Builds and validates a gluing.
    ///
    /// Checks at construction: the divider is an `S` curve; the two branches
    /// agree on sampled divider points within `1e−10`; both Jacobian
    /// determinants keep one common sign on a sample grid, matching
    /// `epsilon` (negative determinant ⇔ `epsilon = −1`).
    pub fn new(
        name: impl Into<String>,
        minus: Branch,
        plus: Branch,
        divider: MonotoneCurve,
        lambda_claimed: f64,
        params: Vec<(String, f64)>,
        window: (Vec2, Vec2),
    ) -> Result<Self> {
        if divider.orientation() != Orientation::S {
            return Err(Error::invalid("divider must be an S curve"));
        }
        if minus.tag() != BranchTag::Minus || plus.tag() != BranchTag::Plus {
            return Err(Error::invalid("branch tags must match their roles"));
        }
        if !(window.0.is_finite() && window.1.is_finite())
            || window.0.x >= window.1.x
            || window.0.y >= window.1.y
        {
            return Err(Error::invalid("window corners must be ordered"));
        }
        let (y_lo, y_hi) = divider.param_range();
        let mut worst = 0.0_f64;
        for i in 0..GLUING_SAMPLES {
            let y = y_lo + (y_hi - y_lo) * (i as f64 / (GLUING_SAMPLES - 1) as f64);
            let z = divider.point_at_clamped(y);
            worst = worst.max(minus.forward(z).dist(plus.forward(z)));
        }
        if worst > GLUING_TOL {
            return Err(Error::ConditionViolation(format!(
                "branches disagree on the divider by up to {worst}"
            )));
        }
        let map = PiecewiseMap {
            name: name.into(),
            minus,
            plus,
            divider,
            epsilon: 0, // set below from the determinant sign
            lambda_claimed,
            params,
            window,
        };
        let sign = map.orientation_sign()?;
        Ok(PiecewiseMap {
            epsilon: sign,
            ..map
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn divider(&self) -> &MonotoneCurve {
        &self.divider
    }

    /// Orientation sign ε: `+1` preserving, `−1` reversing.
    pub fn epsilon(&self) -> i8 {
        self.epsilon
    }

    /// The a-priori expansion claim attached by the constructor; the cone
    /// verification recomputes a certified value independently.
    pub fn lambda_claimed(&self) -> f64 {
        self.lambda_claimed
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    /// The bounded working window all truncated curves live in.
    pub fn window(&self) -> (Vec2, Vec2) {
        self.window
    }

    pub fn branch(&self, tag: BranchTag) -> &Branch {
        match tag {
            BranchTag::Minus => &self.minus,
            BranchTag::Plus => &self.plus,
        }
    }

    /// Signed horizontal offset of `z` from the divider: negative in ℝ₋,
    /// positive in ℝ₊, zero on the divider.
    pub fn signed_side(&self, z: Vec2) -> f64 {
        z.x - self.divider.eval_clamped(z.y)
    }

    /// The branch governing `z` (divider points evaluate through either
    /// branch; they agree there).
    pub fn side(&self, z: Vec2) -> BranchTag {
        if self.signed_side(z) <= 0.0 {
            BranchTag::Minus
        } else {
            BranchTag::Plus
        }
    }

    /// Full map evaluation.
    pub fn eval(&self, z: Vec2) -> Vec2 {
        self.branch(self.side(z)).forward(z)
    }

    /// `n`-fold iteration.
    pub fn eval_n(&self, z: Vec2, n: usize) -> Vec2 {
        let mut w = z;
        for _ in 0..n {
            w = self.eval(w);
        }
        w
    }

    /// Pull-back through one branch: `f_σ⁻¹(w)` when that lands in the
    /// closed σ half-plane, else `None`.
    pub fn inverse_branch(&self, tag: BranchTag, w: Vec2) -> Option<Vec2> {
        let z = self.branch(tag).inverse(w);
        if !z.is_finite() {
            return None;
        }
        let side = self.signed_side(z);
        let ok = match tag {
            BranchTag::Minus => side <= 1e-12,
            BranchTag::Plus => side >= -1e-12,
        };
        ok.then_some(z)
    }

    /// Global inverse of the homeomorphism: the unique branch pull-back that
    /// lands in its own closed half-plane and maps forward to `w`. On the
    /// divider image both branches qualify; the minus one is returned.
    pub fn inverse(&self, w: Vec2) -> Option<(Vec2, BranchTag)> {
        for tag in [BranchTag::Minus, BranchTag::Plus] {
            if let Some(z) = self.inverse_branch(tag, w) {
                if self.eval(z).dist(w) <= 1e-9 * (1.0 + w.norm()) {
                    return Some((z, tag));
                }
            }
        }
        None
    }

    /// Splits a polyline at divider crossings. Crossing points are located
    /// by bisection to `1e−13` and appear in both adjacent pieces; points
    /// exactly on the divider likewise join both neighbours.
    pub fn split_at_divider(&self, samples: &[Vec2]) -> Vec<(BranchTag, Vec<Vec2>)> {
        let mut runs: Vec<(BranchTag, Vec<Vec2>)> = Vec::new();
        let mut current: Vec<Vec2> = Vec::new();
        let mut current_sign: i8 = 0;

        let flush =
            |current: &mut Vec<Vec2>, sign: i8, runs: &mut Vec<(BranchTag, Vec<Vec2>)>| {
                if current.len() >= 2 {
                    let tag = if sign > 0 {
                        BranchTag::Plus
                    } else {
                        BranchTag::Minus
                    };
                    runs.push((tag, std::mem::take(current)));
                } else {
                    current.clear();
                }
            };

        for (i, &p) in samples.iter().enumerate() {
            let s = self.signed_side(p);
            let sig: i8 = if s > 0.0 {
                1
            } else if s < 0.0 {
                -1
            } else {
                0
            };
            if current.is_empty() || sig == 0 || current_sign == 0 || sig == current_sign {
                current.push(p);
                if sig != 0 && current_sign == 0 {
                    current_sign = sig;
                }
                continue;
            }
            // Strict sign change: find the crossing on the segment.
            let prev = samples[i - 1];
            let crossing = if self.signed_side(prev) == 0.0 {
                prev
            } else {
                let mut lo = prev;
                let mut hi = p;
                for _ in 0..80 {
                    if lo.dist(hi) <= 1e-13 {
                        break;
                    }
                    let mid = Vec2::lerp(lo, hi, 0.5);
                    let sm = self.signed_side(mid);
                    if sm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (sm > 0.0) == (self.signed_side(lo) > 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Vec2::lerp(lo, hi, 0.5)
            };
            if crossing.dist(*current.last().expect("non-empty run")) > 1e-13 {
                current.push(crossing);
            }
            flush(&mut current, current_sign, &mut runs);
            current.push(crossing);
            if crossing.dist(p) > 1e-13 {
                current.push(p);
            }
            current_sign = sig;
        }
        flush(&mut current, current_sign, &mut runs);
        runs
    }

    /// Image of a curve, split exactly at divider crossings. Each output
    /// piece gets the orientation fitting it better (smaller max slope) and
    /// carries its observed max slope as the bound; revalidate against a
    /// cone bound with [`MonotoneCurve::validate_against`] as needed.
    pub fn curve_image(&self, c: &MonotoneCurve) -> Result<Vec<MonotoneCurve>> {
        let mut out = Vec::new();
        for (tag, pts) in self.split_at_divider(c.samples()) {
            let branch = self.branch(tag);
            let mapped: Vec<Vec2> = pts.iter().map(|&p| branch.forward(p)).collect();
            out.push(best_fit_curve(mapped)?);
        }
        Ok(out)
    }

    /// Like [`PiecewiseMap::curve_image`], but forces the orientation and a
    /// slope bound; a piece violating the bound is a condition violation.
    pub fn curve_image_checked(
        &self,
        c: &MonotoneCurve,
        orientation: Orientation,
        bound: f64,
    ) -> Result<Vec<MonotoneCurve>> {
        let mut out = Vec::new();
        for (tag, pts) in self.split_at_divider(c.samples()) {
            let branch = self.branch(tag);
            let mapped: Vec<Vec2> = pts.iter().map(|&p| branch.forward(p)).collect();
            let deduped = dedup_close(mapped);
            if deduped.len() < 2 {
                continue;
            }
            out.push(MonotoneCurve::from_samples(orientation, deduped, bound)?);
        }
        Ok(out)
    }

    /// Both saddle fixed points with eigen data, each solved on its own
    /// branch (closed form for affine branches, Newton otherwise) and
    /// checked to lie in the correct closed half-plane.
    pub fn fixed_points(&self) -> Result<FixedPointData> {
        let x_point = branch_fixed_point(&self.plus, self.window)?;
        let y_point = branch_fixed_point(&self.minus, self.window)?;
        let sx = self.signed_side(x_point);
        if sx < -1e-9 {
            return Err(Error::ConditionViolation(format!(
                "right-branch fixed point ({}, {}) lies left of the divider",
                x_point.x, x_point.y
            )));
        }
        let sy = self.signed_side(y_point);
        if sy > 1e-9 {
            return Err(Error::ConditionViolation(format!(
                "left-branch fixed point ({}, {}) lies right of the divider",
                y_point.x, y_point.y
            )));
        }
        for (name, p) in [("X", x_point), ("Y", y_point)] {
            let err = self.eval(p).dist(p);
            if err > 1e-10 {
                return Err(Error::inconsistent(format!(
                    "fixed point {name} fails f(z) = z by {err}"
                )));
            }
        }
        Ok(FixedPointData {
            x_fixed: saddle_data(&self.plus, x_point)?,
            y_fixed: saddle_data(&self.minus, y_point)?,
        })
    }

    /// The common sign of `det(df)` over both branches, sampled on a grid
    /// inside the window (points near the divider are attributed to their
    /// side's branch only). Mixed signs are a violation of the constant-
    /// orientation hypothesis.
    pub fn orientation_sign(&self) -> Result<i8> {
        let (lo, hi) = self.window;
        let n = 21;
        let mut sign: i8 = 0;
        for i in 0..n {
            for j in 0..n {
                let z = Vec2::new(
                    lo.x + (hi.x - lo.x) * (i as f64 / (n - 1) as f64),
                    lo.y + (hi.y - lo.y) * (j as f64 / (n - 1) as f64),
                );
                let side = self.signed_side(z);
                if side.abs() <= 1e-9 {
                    continue;
                }
                let branch = if side < 0.0 { &self.minus } else { &self.plus };
                let det = branch.jacobian(z).det();
                if det == 0.0 || !det.is_finite() {
                    return Err(Error::ConditionViolation(format!(
                        "Jacobian determinant {det} at ({}, {})",
                        z.x, z.y
                    )));
                }
                let s: i8 = if det > 0.0 { 1 } else { -1 };
                if sign == 0 {
                    sign = s;
                } else if sign != s {
                    return Err(Error::ConditionViolation(
                        "Jacobian determinant changes sign across the sample grid".into(),
                    ));
                }
            }
        }
        if sign == 0 {
            return Err(Error::invalid(
                "window too thin: no sample points off the divider",
            ));
        }
        Ok(sign)
    }
}

/// Drops consecutive points closer than `1e−13` (bisection duplicates).
fn dedup_close(pts: Vec<Vec2>) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().map_or(true, |q| q.dist(p) > 1e-13) {
            out.push(p);
        }
    }
    out
}

/// Builds a curve from mapped points, choosing the orientation under which
/// the polyline is a flatter graph.
fn best_fit_curve(pts: Vec<Vec2>) -> Result<MonotoneCurve> {
    let pts = dedup_close(pts);
    if pts.len() < 2 {
        return Err(Error::invalid(
            "image piece degenerated to fewer than 2 points",
        ));
    }
    let mut max_u: f64 = 0.0; // |Δy/Δx|
    let mut max_s: f64 = 0.0; // |Δx/Δy|
    let mut u_ok = true;
    let mut s_ok = true;
    // Direction signs must stay consistent for the graph to be monotone.
    let mut dx_sign = 0.0_f64;
    let mut dy_sign = 0.0_f64;
    for pair in pts.windows(2) {
        let d = pair[1] - pair[0];
        if d.x == 0.0 || (dx_sign != 0.0 && d.x.signum() != dx_sign) {
            u_ok = false;
        } else {
            dx_sign = d.x.signum();
            max_u = max_u.max((d.y / d.x).abs());
        }
        if d.y == 0.0 || (dy_sign != 0.0 && d.y.signum() != dy_sign) {
            s_ok = false;
        } else {
            dy_sign = d.y.signum();
            max_s = max_s.max((d.x / d.y).abs());
        }
    }
    let pick_u = match (u_ok, s_ok) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => max_u <= max_s,
        (false, false) => {
            return Err(Error::ConditionViolation(
                "image piece is not a monotone graph in either orientation".into(),
            ))
        }
    };
    if pick_u {
        MonotoneCurve::from_samples(Orientation::U, pts, max_u)
    } else {
        MonotoneCurve::from_samples(Orientation::S, pts, max_s)
    }
}

/// Fixed point of one branch: closed form when affine, Newton otherwise.
fn branch_fixed_point(branch: &Branch, window: (Vec2, Vec2)) -> Result<Vec2> {
    if let Some((m, c)) = branch.as_affine() {
        // (I − M) z = c
        let i_minus_m = Mat2::new(1.0 - m.a, -m.b, -m.c, 1.0 - m.d);
        let inv = i_minus_m.inverse().map_err(|_| {
            Error::ConditionViolation("branch has eigenvalue 1: fixed point degenerate".into())
        })?;
        return Ok(inv.mul_vec(c));
    }
    // Newton on g(z) = f(z) − z from a deterministic seed spread.
    let (lo, hi) = window;
    let seeds = [
        Vec2::lerp(lo, hi, 0.5),
        Vec2::lerp(lo, hi, 0.25),
        Vec2::lerp(lo, hi, 0.75),
        Vec2::new(lo.x * 0.5 + hi.x * 0.5, lo.y * 0.25 + hi.y * 0.75),
        Vec2::new(lo.x * 0.75 + hi.x * 0.25, lo.y * 0.5 + hi.y * 0.5),
    ];
    for seed in seeds {
        let mut z = seed;
        for _ in 0..100 {
            let g = branch.forward(z) - z;
            if g.norm() < 1e-13 {
                return Ok(z);
            }
            let j = branch.jacobian(z);
            let m = Mat2::new(j.a - 1.0, j.b, j.c, j.d - 1.0);
            let Ok(inv) = m.inverse() else { break };
            let step = inv.mul_vec(g);
            z = z - step;
            if !z.is_finite() {
                break;
            }
        }
        if z.is_finite() && (branch.forward(z) - z).norm() < 1e-12 {
            return Ok(z);
        }
    }
    Err(Error::ConditionViolation(
        "Newton failed to locate a branch fixed point".into(),
    ))
}

/// Eigen data at a fixed point; requires a genuine saddle.
fn saddle_data(branch: &Branch, point: Vec2) -> Result<SaddleData> {
    let j = branch.jacobian(point);
    let tr = j.a + j.d;
    let det = j.det();
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 {
        return Err(Error::ConditionViolation(format!(
            "fixed point at ({}, {}) has complex multipliers (disc = {disc})",
            point.x, point.y
        )));
    }
    let root = disc.sqrt();
    let l1 = 0.5 * (tr + root);
    let l2 = 0.5 * (tr - root);
    let (lu, ls) = if l1.abs() >= l2.abs() { (l1, l2) } else { (l2, l1) };
    if lu.abs() <= 1.0 || ls.abs() >= 1.0 {
        return Err(Error::ConditionViolation(format!(
            "fixed point at ({}, {}) is not a saddle: multipliers {lu}, {ls}",
            point.x, point.y
        )));
    }
    Ok(SaddleData {
        point,
        unstable_value: lu,
        unstable_dir: eigenvector(j, lu)?,
        stable_value: ls,
        stable_dir: eigenvector(j, ls)?,
    })
}

/// Unit eigenvector of a 2×2 matrix for eigenvalue `l`, normalized so its
/// larger component is positive (deterministic sign).
fn eigenvector(m: Mat2, l: f64) -> Result<Vec2> {
    // Rows of (M − l·I) are orthogonal to the eigenvector's dual; a robust
    // choice is whichever of (b, l − a), (l − d, c) has the larger norm.
    let v1 = Vec2::new(m.b, l - m.a);
    let v2 = Vec2::new(l - m.d, m.c);
    let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    let u = v.normalized().map_err(|_| {
        Error::inconsistent(format!("degenerate eigenvector for eigenvalue {l}"))
    })?;
    let flip = if u.x.abs() >= u.y.abs() {
        u.x < 0.0
    } else {
        u.y < 0.0
    };
    Ok(if flip { -u } else { u })
}

/// Vertical divider `x = 0` truncated to `y ∈ [−h, h]`.
fn vertical_divider(h: f64) -> MonotoneCurve {
    MonotoneCurve::segment(
        Orientation::S,
        Vec2::new(0.0, -h),
        Vec2::new(0.0, h),
        0.0,
    )
    .expect("vertical segment is a valid S curve")
    .into_truncated()
}

/// Conservative closed-form expansion claim for branches `[[m, 1], [k, 0]]`:
/// the common cone slope interval comes from `c² − |m|c + |k| ≤ 0` per
/// branch; at the smallest joint slope `c`, every branch expands horizontal
/// cone vectors by at least `(|m| − c)/√(1 + c²)`.
fn affine_lambda_estimate(branches: &[Mat2]) -> Option<f64> {
    let mut c_lo = 0.0_f64;
    let mut c_hi = f64::INFINITY;
    for m in branches {
        let a = m.a.abs();
        let k = m.c.abs();
        let disc = a * a - 4.0 * k;
        if disc < 0.0 {
            return None;
        }
        let r = disc.sqrt();
        c_lo = c_lo.max(0.5 * (a - r));
        c_hi = c_hi.min(0.5 * (a + r));
    }
    if c_lo > c_hi {
        return None;
    }
    let c = c_lo;
    let lambda = branches
        .iter()
        .map(|m| (m.a.abs() - c) / (1.0 + c * c).sqrt())
        .fold(f64::INFINITY, f64::min);
    (lambda > 1.0).then_some(lambda)
}

/// The Lozi family `(x, y) ↦ (1 + y − a|x|, bx)`; requires `b ≠ 0` for
/// invertibility.
pub fn lozi(a: f64, b: f64) -> Result<PiecewiseMap> {
    if !(a.is_finite() && b.is_finite()) || b == 0.0 {
        return Err(Error::invalid("lozi requires finite a and nonzero b"));
    }
    let m_minus = Mat2::new(a, 1.0, b, 0.0);
    let m_plus = Mat2::new(-a, 1.0, b, 0.0);
    let offset = Vec2::new(1.0, 0.0);
    let lambda = affine_lambda_estimate(&[m_minus, m_plus]).unwrap_or(1.0);
    PiecewiseMap::new(
        "lozi",
        Branch::affine(BranchTag::Minus, m_minus, offset)?,
        Branch::affine(BranchTag::Plus, m_plus, offset)?,
        vertical_divider(5.0),
        lambda,
        vec![("a".into(), a), ("b".into(), b)],
        (Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0)),
    )
}

/// The border-collision normal form `(x, y) ↦ (τ_i x + y + 1, −δ_i x)` with
/// `i` picked by the sign of `x`; requires `δ_L, δ_R ≠ 0`.
pub fn bcnf(tau_l: f64, delta_l: f64, tau_r: f64, delta_r: f64) -> Result<PiecewiseMap> {
    if ![tau_l, delta_l, tau_r, delta_r].iter().all(|v| v.is_finite())
        || delta_l == 0.0
        || delta_r == 0.0
    {
        return Err(Error::invalid(
            "bcnf requires finite parameters and nonzero determinants",
        ));
    }
    let m_minus = Mat2::new(tau_l, 1.0, -delta_l, 0.0);
    let m_plus = Mat2::new(tau_r, 1.0, -delta_r, 0.0);
    let offset = Vec2::new(1.0, 0.0);
    let lambda = affine_lambda_estimate(&[m_minus, m_plus]).unwrap_or(1.0);
    PiecewiseMap::new(
        "bcnf",
        Branch::affine(BranchTag::Minus, m_minus, offset)?,
        Branch::affine(BranchTag::Plus, m_plus, offset)?,
        vertical_divider(5.0),
        lambda,
        vec![
            ("tau_l".into(), tau_l),
            ("delta_l".into(), delta_l),
            ("tau_r".into(), tau_r),
            ("delta_r".into(), delta_r),
        ],
        (Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0)),
    )
}

/// Generic gluing of two affine branches along the y-axis.
pub fn piecewise_affine(
    minus: (Mat2, Vec2),
    plus: (Mat2, Vec2),
    window_half_size: f64,
) -> Result<PiecewiseMap> {
    if !window_half_size.is_finite() || window_half_size <= 0.0 {
        return Err(Error::invalid("window half-size must be positive"));
    }
    let lambda = affine_lambda_estimate(&[minus.0, plus.0]).unwrap_or(1.0);
    let w = window_half_size;
    PiecewiseMap::new(
        "affine",
        Branch::affine(BranchTag::Minus, minus.0, minus.1)?,
        Branch::affine(BranchTag::Plus, plus.0, plus.1)?,
        vertical_divider(w),
        lambda,
        vec![
            ("m11".into(), minus.0.a),
            ("m12".into(), minus.0.b),
            ("m21".into(), minus.0.c),
            ("m22".into(), minus.0.d),
            ("p11".into(), plus.0.a),
            ("p12".into(), plus.0.b),
            ("p21".into(), plus.0.c),
            ("p22".into(), plus.0.d),
        ],
        (Vec2::new(-w, -w), Vec2::new(w, w)),
    )
}

/// A rigid rotation glued trivially to itself: volume preserving and
/// non-hyperbolic, used as a control case that must fail the expanding
/// diagnostics.
pub fn rotation_map(angle: f64) -> Result<PiecewiseMap> {
    let (s, c) = angle.sin_cos();
    let m = Mat2::new(c, -s, s, c);
    piecewise_affine((m, Vec2::ZERO), (m, Vec2::ZERO), 5.0)
}

/// A named parameter family μ ↦ map, with a predicate for the degenerate
/// parameter locus where the cone fields collapse onto the axes.
#[derive(Clone)]
pub struct ParamFamily {
    name: String,
    param_names: Vec<String>,
    instantiate: Arc<dyn Fn(&[f64]) -> Result<PiecewiseMap> + Send + Sync>,
    degenerate: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
}

impl fmt::Debug for ParamFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamFamily")
            .field("name", &self.name)
            .field("param_names", &self.param_names)
            .finish()
    }
}

impl ParamFamily {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    /// Builds the map at parameter vector μ (deterministic).
    pub fn instantiate(&self, mu: &[f64]) -> Result<PiecewiseMap> {
        if mu.len() != self.param_names.len() {
            return Err(Error::invalid(format!(
                "family {} expects {} parameters, got {}",
                self.name,
                self.param_names.len(),
                mu.len()
            )));
        }
        (self.instantiate)(mu)
    }

    /// True when μ lies on the degenerate locus.
    pub fn is_degenerate(&self, mu: &[f64]) -> bool {
        (self.degenerate)(mu)
    }

    /// The Lozi family over `(a, b)`; degenerate when `b = 0`.
    pub fn lozi_family() -> ParamFamily {
        ParamFamily {
            name: "lozi".into(),
            param_names: vec!["a".into(), "b".into()],
            instantiate: Arc::new(|mu: &[f64]| lozi(mu[0], mu[1])),
            degenerate: Arc::new(|mu: &[f64]| mu[1].abs() < 1e-9),
        }
    }

    /// The border-collision family over `(τ_L, δ_L, τ_R, δ_R)`; degenerate
    /// when both determinants vanish.
    pub fn bcnf_family() -> ParamFamily {
        ParamFamily {
            name: "bcnf".into(),
            param_names: vec![
                "tau_l".into(),
                "delta_l".into(),
                "tau_r".into(),
                "delta_r".into(),
            ],
            instantiate: Arc::new(|mu: &[f64]| bcnf(mu[0], mu[1], mu[2], mu[3])),
            degenerate: Arc::new(|mu: &[f64]| mu[1].abs() < 1e-9 && mu[3].abs() < 1e-9),
        }
    }

    /// Looks a built-in family up by name.
    pub fn by_name(name: &str) -> Result<ParamFamily> {
        match name {
            "lozi" => Ok(ParamFamily::lozi_family()),
            "bcnf" => Ok(ParamFamily::bcnf_family()),
            other => Err(Error::Config(format!(
                "unknown family '{other}'; built-ins: lozi, bcnf"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_lozi() -> PiecewiseMap {
        lozi(1.9, 0.1).unwrap()
    }

    #[test]
    fn lozi_eval_known_points() {
        let m = std_lozi();
        assert!(m.eval(Vec2::ZERO).dist(Vec2::new(1.0, 0.0)) < 1e-15);
        assert!(m.eval(Vec2::new(1.0, 0.0)).dist(Vec2::new(-0.9, 0.1)) < 1e-15);
    }

    #[test]
    fn branches_agree_on_divider() {
        let m = std_lozi();
        for i in 0..1000 {
            let y = -5.0 + 10.0 * (i as f64 / 999.0);
            let z = Vec2::new(0.0, y);
            let d = m
                .branch(BranchTag::Minus)
                .forward(z)
                .dist(m.branch(BranchTag::Plus).forward(z));
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn inverse_branch_round_trip_and_rejection() {
        let m = std_lozi();
        // (0,0) is on the divider: its plus image pulls back through PLUS.
        let z = m.inverse_branch(BranchTag::Plus, Vec2::new(1.0, 0.0)).unwrap();
        assert!(z.dist(Vec2::ZERO) < 1e-12);
        // The plus preimage of f_+((−1, 0)) has x < 0: rejected.
        let w = m.branch(BranchTag::Plus).forward(Vec2::new(-1.0, 0.0));
        assert!(m.inverse_branch(BranchTag::Plus, w).is_none());
        // Deterministic spread of round trips on both sides.
        for i in 0..100 {
            let t = i as f64 / 99.0;
            let zp = Vec2::new(0.1 + 2.0 * t, -0.4 + 0.8 * t);
            let zm = Vec2::new(-0.1 - 2.0 * t, 0.4 - 0.8 * t);
            let back_p = m
                .inverse_branch(BranchTag::Plus, m.branch(BranchTag::Plus).forward(zp))
                .unwrap();
            let back_m = m
                .inverse_branch(BranchTag::Minus, m.branch(BranchTag::Minus).forward(zm))
                .unwrap();
            assert!(back_p.dist(zp) < 1e-9);
            assert!(back_m.dist(zm) < 1e-9);
        }
    }

    #[test]
    fn lozi_fixed_points_match_closed_form() {
        let fp = std_lozi().fixed_points().unwrap();
        let d = 1.0 + 1.9 - 0.1;
        assert!(fp.x_fixed.point.dist(Vec2::new(1.0 / d, 0.1 / d)) < 1e-12);
        assert!(fp.y_fixed.point.dist(Vec2::new(-1.0, -0.1)) < 1e-12);
        // Orientation is reversed along the unstable direction at X.
        assert!(fp.x_fixed.unstable_value < -1.0);
        assert!((fp.x_fixed.unstable_value + 1.9512492197250394).abs() < 1e-12);
        assert!((fp.y_fixed.unstable_value - 1.9512492197250394).abs() < 1e-12);
        assert!(fp.x_fixed.stable_value.abs() < 1.0);
        // Unstable direction at X has slope λ_s ≈ −0.0512 relative to x.
        let dir = fp.x_fixed.unstable_dir;
        assert!((dir.y / dir.x + 0.05124921972503931).abs() < 1e-12);
    }

    #[test]
    fn bcnf_fixed_points_match_closed_form() {
        let m = bcnf(1.55, 0.1, -1.8, 0.1).unwrap();
        let fp = m.fixed_points().unwrap();
        let xs = 1.0 / (1.0 + 1.8 + 0.1);
        let ys = 1.0 / (1.0 - 1.55 + 0.1);
        assert!(fp.x_fixed.point.dist(Vec2::new(xs, -0.1 * xs)) < 1e-12);
        assert!(fp.y_fixed.point.dist(Vec2::new(ys, -0.1 * ys)) < 1e-12);
        assert!(fp.x_fixed.unstable_value < -1.0);
        assert!((fp.y_fixed.unstable_value - 1.4825485849042455).abs() < 1e-9);
    }

    #[test]
    fn orientation_signs() {
        assert_eq!(std_lozi().epsilon(), -1);
        assert_eq!(bcnf(1.55, 0.1, -1.8, 0.1).unwrap().epsilon(), 1);
        assert_eq!(lozi(1.9, -0.1).unwrap().epsilon(), 1);
        assert_eq!(rotation_map(2.39996).unwrap().epsilon(), 1);
    }

    #[test]
    fn divider_maps_to_single_u_curve() {
        let m = std_lozi();
        let pieces = m.curve_image(m.divider()).unwrap();
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].orientation(), Orientation::U);
        // f(0, y) = (1 + y, 0): a horizontal segment.
        let (ylo, yhi) = pieces[0].y_extent();
        assert!(ylo.abs() < 1e-12 && yhi.abs() < 1e-12);
    }

    #[test]
    fn segment_inside_one_side_stays_whole() {
        let m = std_lozi();
        let c = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(0.2, 0.0),
            Vec2::new(0.8, 0.1),
            0.2,
        )
        .unwrap();
        let pieces = m.curve_image(&c).unwrap();
        assert_eq!(pieces.len(), 1);
    }

    #[test]
    fn crossing_segment_splits_at_divider() {
        let m = std_lozi();
        let c = MonotoneCurve::segment(
            Orientation::U,
            Vec2::new(-0.5, 0.2),
            Vec2::new(0.5, 0.2),
            0.0,
        )
        .unwrap();
        let pieces = m.curve_image(&c).unwrap();
        assert_eq!(pieces.len(), 2);
        // The pieces share the image of the crossing point (0, 0.2) → (1.2, 0).
        let shared = Vec2::new(1.2, 0.0);
        assert!(pieces[0].closest_distance(shared) < 1e-9);
        assert!(pieces[1].closest_distance(shared) < 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = bcnf(1.55, 0.1, -1.8, 0.1).unwrap();
        let h = 1e-6;
        for i in 0..100 {
            let t = i as f64 / 99.0;
            let z = Vec2::new(0.3 + t, -0.5 + t * 0.7);
            let b = m.branch(m.side(z));
            let j = b.jacobian(z);
            let fx = (b.forward(z + Vec2::new(h, 0.0)) - b.forward(z - Vec2::new(h, 0.0)))
                * (0.5 / h);
            let fy = (b.forward(z + Vec2::new(0.0, h)) - b.forward(z - Vec2::new(0.0, h)))
                * (0.5 / h);
            assert!((fx.x - j.a).abs() < 1e-6 * (1.0 + j.a.abs()));
            assert!((fx.y - j.c).abs() < 1e-6 * (1.0 + j.c.abs()));
            assert!((fy.x - j.b).abs() < 1e-6 * (1.0 + j.b.abs()));
            assert!((fy.y - j.d).abs() < 1e-6 * (1.0 + j.d.abs()));
        }
    }

    #[test]
    fn custom_branch_reproduces_affine() {
        let a = 1.9;
        let b = 0.1;
        let mk_custom = |sgn: f64, tag: BranchTag| {
            Branch::custom(
                tag,
                move |z: Vec2| Vec2::new(sgn * a * z.x + z.y + 1.0, b * z.x),
                move |_| Mat2::new(sgn * a, 1.0, b, 0.0),
                move |w: Vec2| Vec2::new(w.y / b, w.x - 1.0 - sgn * a * w.y / b),
            )
        };
        let custom = PiecewiseMap::new(
            "custom-lozi",
            mk_custom(1.0, BranchTag::Minus),
            mk_custom(-1.0, BranchTag::Plus),
            MonotoneCurve::segment(
                Orientation::S,
                Vec2::new(0.0, -5.0),
                Vec2::new(0.0, 5.0),
                0.0,
            )
            .unwrap()
            .into_truncated(),
            1.8,
            vec![],
            (Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0)),
        )
        .unwrap();
        let reference = std_lozi();
        for i in 0..200 {
            let t = i as f64 / 199.0;
            let z = Vec2::new(-2.0 + 4.0 * t, 1.0 - 2.0 * t);
            assert!(custom.eval(z).dist(reference.eval(z)) < 1e-12);
        }
        let fp = custom.fixed_points().unwrap();
        let d = 1.0 + a - b;
        assert!(fp.x_fixed.point.dist(Vec2::new(1.0 / d, b / d)) < 1e-9);
    }

    #[test]
    fn family_instantiation_is_deterministic_and_continuous() {
        let fam = ParamFamily::lozi_family();
        let m1 = fam.instantiate(&[1.9, 0.1]).unwrap();
        let m2 = fam.instantiate(&[1.9, 0.1]).unwrap();
        let m3 = fam.instantiate(&[1.9 + 1e-9, 0.1]).unwrap();
        let mut worst_same = 0.0_f64;
        let mut worst_near = 0.0_f64;
        for i in 0..20 {
            for j in 0..20 {
                let z = Vec2::new(-2.0 + 4.0 * i as f64 / 19.0, -2.0 + 4.0 * j as f64 / 19.0);
                worst_same = worst_same.max(m1.eval(z).dist(m2.eval(z)));
                worst_near = worst_near.max(m1.eval(z).dist(m3.eval(z)));
            }
        }
        assert_eq!(worst_same, 0.0);
        assert!(worst_near < 1e-8);
        assert!(fam.is_degenerate(&[1.9, 0.0]));
        assert!(!fam.is_degenerate(&[1.9, 0.1]));
    }

    #[test]
    fn degenerate_parameters_are_rejected() {
        assert!(lozi(1.9, 0.0).is_err());
        assert!(bcnf(1.55, 0.0, -1.8, 0.1).is_err());
        assert!(ParamFamily::by_name("henon").is_err());
    }
}
