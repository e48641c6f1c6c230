//! Pull-back ladders and the strip partition of the rectangle.
//!
//! Starting from the right saddle's stable segment `β₁`, two ladders of
//! s-curves are produced by branch pull-backs:
//!
//! * the **left ladder** `β₂, β₃, …` with `β_{m+1} = Π₋(β_m)`, marching
//!   monotonically left towards the left face;
//! * the **right ladder** `γ₁, γ₂, …` with `γ_m = Π₊(β_m)`, marching right
//!   towards the right face. `γ₁` coincides with `β₁` because the plus
//!   branch fixes the carrier line of `β₁`; it is recomputed and compared
//!   rather than assumed.
//!
//! Here `Π_σ(ω) = f_σ⁻¹(ω) ∩ R` is the branch pull-back clipped to the
//! rectangle, defined when `ω` stays clear of the fold arc's interior.
//!
//! The ladders carve the rectangle into the strips driving the return map:
//! `B` between `β₂` and `β₁` (straddling the divider), `C` right of `γ₁`,
//! and the cells `C_n` between `γ_{n−1}` and `γ_n` — points of `C_n` leave
//! `C` and wander left for `n − 1` steps before returning. Consistency of
//! each rung (its forward image lands back on the previous rung) is
//! certified by a sampled distance bound before anything downstream runs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    intersect_us, order_u, MonotoneCurve, PlaneObject, Rectangle, RelOrder, Strip, StripKind,
    Vec2,
};
use crate::manifolds::pullback;
use crate::maps::{BranchTag, PiecewiseMap};
use crate::renorm::rectangle::RenormRectangle;

/// Sampled bound certifying that a rung's forward image lies on the
/// previous rung.
const RUNG_CONSISTENCY_TOL: f64 = 1e-8;

/// Allowed mismatch between the recomputed first right rung and the stable
/// segment it must reproduce.
const FIRST_RUNG_TOL: f64 = 1e-8;

/// The ladders and strips, together with the rectangle they live in.
#[derive(Clone, Debug)]
pub struct RenormPartition {
    rr: RenormRectangle,
    /// `beta[k]` is the rung `β_{k+1}`; `beta[0]` is the stable segment.
    beta: Vec<MonotoneCurve>,
    /// `gamma[k]` is the rung `γ_{k+1} = Π₊(β_{k+1})`.
    gamma: Vec<MonotoneCurve>,
    b_strip: Strip,
    c_strip: Strip,
    d_strip: Strip,
    /// `c_parts[k]` is the cell `C_{k+2}` between `gamma[k]` and
    /// `gamma[k+1]`.
    c_parts: Vec<Strip>,
    depth: usize,
    hausdorff_worst: f64,
    gamma1_gap: f64,
}

/// Pulls `source` back through one branch and returns the single piece
/// spanning the band, clipped to it.
///
/// Fails when `source` meets the fold arc right of its left endpoint (the
/// pull-back would be multivalued), when no piece spans the band, or when
/// the spanning piece leaves the rectangle.
pub(crate) fn pull_span(
    m: &PiecewiseMap,
    rr: &RenormRectangle,
    tag: BranchTag,
    source: &MonotoneCurve,
    what: &str,
) -> Result<MonotoneCurve> {
    if let Some(p) = intersect_us(rr.fold(), source)? {
        if p.x > rr.u_left().x + rr.tol() {
            return Err(Error::ConditionViolation(format!(
                "{what} crosses the fold arc at x = {}; its pull-back is not single-valued",
                p.x
            )));
        }
    }
    let (y_lo, y_hi) = rr.band();
    let (bl, _) = rr.rect().bbox();
    let search =
        Rectangle::from_bbox(Vec2::new(bl.x - 0.25, y_lo), Vec2::new(rr.x_max(), y_hi))?;
    let pieces = pullback(m, tag, source, &search)?;
    let span_tol = 1e-4 * (y_hi - y_lo);
    let mut spanning: Vec<MonotoneCurve> = pieces
        .into_iter()
        .filter(|c| {
            let (r0, r1) = c.param_range();
            r0 <= y_lo + span_tol && r1 >= y_hi - span_tol
        })
        .collect();
    let piece = match spanning.len() {
        0 => {
            return Err(Error::ConditionViolation(format!(
                "no pull-back piece of {what} spans the band"
            )))
        }
        1 => spanning.pop().expect("one piece"),
        n => {
            return Err(Error::inconsistent(format!(
                "{n} pull-back pieces of {what} span the band"
            )))
        }
    };
    let (r0, r1) = piece.param_range();
    let clipped = piece.sub_between_params(y_lo.max(r0), y_hi.min(r1))?;
    for k in 0..=16 {
        let t = y_lo + (y_hi - y_lo) * k as f64 / 16.0;
        let p = clipped.point_at_clamped(t);
        if !rr.rect().contains_tol(p, 1e-6) {
            return Err(Error::ConditionViolation(format!(
                "pull-back of {what} leaves the rectangle at ({}, {})",
                p.x, p.y
            )));
        }
    }
    Ok(clipped)
}

/// Largest distance from the forward image of `rung` to `target`, sampled
/// on a refined copy. The image must stay on one branch (a rung never
/// straddles the divider).
fn rung_image_distance(
    m: &PiecewiseMap,
    rung: &MonotoneCurve,
    target: &MonotoneCurve,
    what: &str,
) -> Result<f64> {
    let (y_lo, y_hi) = rung.param_range();
    let refined = rung.refine(((y_hi - y_lo) / 128.0).max(1e-9))?;
    let pieces = m.curve_image(&refined)?;
    if pieces.len() != 1 {
        return Err(Error::inconsistent(format!(
            "image of {what} split into {} pieces; a ladder rung must stay on one branch",
            pieces.len()
        )));
    }
    let mut worst = 0.0_f64;
    for q in pieces[0].samples() {
        worst = worst.max(target.closest_distance(*q));
    }
    Ok(worst)
}

/// Builds the ladders to `depth` rungs and the strips between them.
///
/// `depth ≥ 2` rungs are required for the straddling strip to exist; the
/// cells `C₂ … C_depth` come out as `depth − 1` strips. Order along the
/// ladders, rung consistency, and the straddling of the divider are all
/// verified here, so a successfully built partition is safe to consume.
pub fn build_partition(
    m: &PiecewiseMap,
    rr: &RenormRectangle,
    depth: usize,
) -> Result<RenormPartition> {
    if !(2..=32).contains(&depth) {
        return Err(Error::invalid("ladder depth must be between 2 and 32"));
    }
    let ctx = rr.order_context()?;
    let rect = rr.rect().clone();

    let beta1 = rr.beta1()?;
    let mut beta = vec![beta1];
    for k in 1..depth {
        let prev = beta.last().expect("nonempty ladder");
        let next = pull_span(m, rr, BranchTag::Minus, prev, &format!("left rung {}", k + 1))?;
        match order_u(
            &PlaneObject::Curve(&next),
            &PlaneObject::Curve(prev),
            &ctx,
        )? {
            RelOrder::Left => {}
            other => {
                return Err(Error::inconsistent(format!(
                    "left rung {} is {other:?} of its predecessor; the ladder must march left",
                    k + 1
                )))
            }
        }
        if order_u(
            &PlaneObject::Curve(rect.left()),
            &PlaneObject::Curve(&next),
            &ctx,
        )? != RelOrder::Left
        {
            return Err(Error::inconsistent(format!(
                "left rung {} is not strictly right of the left face",
                k + 1
            )));
        }
        beta.push(next);
    }

    let mut gamma = Vec::with_capacity(depth);
    for (k, b) in beta.iter().enumerate() {
        let g = pull_span(m, rr, BranchTag::Plus, b, &format!("right rung {}", k + 1))?;
        if let Some(prev) = gamma.last() {
            match order_u(&PlaneObject::Curve(prev), &PlaneObject::Curve(&g), &ctx)? {
                RelOrder::Left => {}
                other => {
                    return Err(Error::inconsistent(format!(
                        "right rung {} is {other:?} of its predecessor; the ladder must march right",
                        k + 1
                    )))
                }
            }
        }
        if order_u(
            &PlaneObject::Curve(&g),
            &PlaneObject::Curve(rect.right()),
            &ctx,
        )? != RelOrder::Left
        {
            return Err(Error::inconsistent(format!(
                "right rung {} is not strictly left of the right face",
                k + 1
            )));
        }
        gamma.push(g);
    }

    // The recomputed first right rung must reproduce the stable segment.
    let mut gamma1_gap = 0.0_f64;
    {
        let (y_lo, y_hi) = rr.band();
        for k in 0..=64 {
            let t = y_lo + (y_hi - y_lo) * k as f64 / 64.0;
            gamma1_gap =
                gamma1_gap.max((gamma[0].eval_clamped(t) - beta[0].eval_clamped(t)).abs());
        }
        if gamma1_gap > FIRST_RUNG_TOL {
            return Err(Error::inconsistent(format!(
                "plus pull-back of the stable segment misses it by {gamma1_gap}; the right branch should fix its carrier line"
            )));
        }
    }

    // The strip between the first two left rungs must straddle the divider.
    for (a, b, what) in [
        (&beta[1], rr.divider_seg(), "second left rung | divider"),
        (rr.divider_seg(), &beta[0], "divider | stable segment"),
    ] {
        if order_u(&PlaneObject::Curve(a), &PlaneObject::Curve(b), &ctx)? != RelOrder::Left {
            return Err(Error::inconsistent(format!(
                "straddling strip is out of order at {what}"
            )));
        }
    }

    // Rung consistency: forward images land back on the previous rung.
    let mut hausdorff_worst = 0.0_f64;
    for k in 1..depth {
        let d = rung_image_distance(m, &beta[k], &beta[k - 1], &format!("left rung {}", k + 1))?;
        hausdorff_worst = hausdorff_worst.max(d);
    }
    for k in 0..depth {
        let d = rung_image_distance(m, &gamma[k], &beta[k], &format!("right rung {}", k + 1))?;
        hausdorff_worst = hausdorff_worst.max(d);
    }
    if hausdorff_worst > RUNG_CONSISTENCY_TOL {
        return Err(Error::ConditionViolation(format!(
            "a ladder rung's forward image misses its source rung by {hausdorff_worst}"
        )));
    }

    let b_strip = Strip::new(
        rect.clone(),
        beta[1].clone(),
        beta[0].clone(),
        StripKind::SStrip,
    )?;
    let c_strip = Strip::new(
        rect.clone(),
        gamma[0].clone(),
        rect.right().clone(),
        StripKind::SStrip,
    )?;
    let d_strip = Strip::new(
        rect.clone(),
        rect.left().clone(),
        rect.right().clone(),
        StripKind::SStrip,
    )?;
    let mut c_parts = Vec::with_capacity(depth - 1);
    for k in 0..depth - 1 {
        c_parts.push(Strip::new(
            rect.clone(),
            gamma[k].clone(),
            gamma[k + 1].clone(),
            StripKind::SStrip,
        )?);
    }

    Ok(RenormPartition {
        rr: rr.clone(),
        beta,
        gamma,
        b_strip,
        c_strip,
        d_strip,
        c_parts,
        depth,
        hausdorff_worst,
        gamma1_gap,
    })
}

impl RenormPartition {
    pub fn rectangle(&self) -> &RenormRectangle {
        &self.rr
    }

    /// Left rungs; `beta()[k]` is `β_{k+1}`, so `beta()[0]` is the stable
    /// segment.
    pub fn beta(&self) -> &[MonotoneCurve] {
        &self.beta
    }

    /// Right rungs; `gamma()[k]` is `γ_{k+1}`.
    pub fn gamma(&self) -> &[MonotoneCurve] {
        &self.gamma
    }

    /// Strip between the first two left rungs; it straddles the divider.
    pub fn b_strip(&self) -> &Strip {
        &self.b_strip
    }

    /// Strip right of the stable segment; the union of the cells.
    pub fn c_strip(&self) -> &Strip {
        &self.c_strip
    }

    /// The whole rectangle as a strip.
    pub fn d_strip(&self) -> &Strip {
        &self.d_strip
    }

    /// Return cells; `c_parts()[k]` is `C_{k+2}`.
    pub fn c_parts(&self) -> &[Strip] {
        &self.c_parts
    }

    /// Number of rungs in each ladder.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// The cell with return time `n` (so `n ≥ 2`), while the ladder is deep
    /// enough to bound it.
    pub fn cell_strip(&self, n: usize) -> Result<&Strip> {
        if n < 2 || n > self.depth {
            return Err(Error::invalid(format!(
                "cell index {n} outside the built range 2..={}",
                self.depth
            )));
        }
        Ok(&self.c_parts[n - 2])
    }

    /// Worst sampled distance from a rung's forward image to its source.
    pub fn hausdorff_worst(&self) -> f64 {
        self.hausdorff_worst
    }

    /// Sampled gap between the recomputed first right rung and the stable
    /// segment.
    pub fn gamma1_gap(&self) -> f64 {
        self.gamma1_gap
    }

    /// Serializable summary of the ladder positions at the fold-axis
    /// height, for reports.
    pub fn summary(&self) -> PartitionSummary {
        let axis = self.rr.axis_y();
        PartitionSummary {
            depth: self.depth,
            beta_at_axis: self.beta.iter().map(|c| c.eval_clamped(axis)).collect(),
            gamma_at_axis: self.gamma.iter().map(|c| c.eval_clamped(axis)).collect(),
            hausdorff_worst: self.hausdorff_worst,
            gamma1_gap: self.gamma1_gap,
        }
    }
}

/// Ladder positions at the fold-axis height, for reports.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionSummary {
    pub depth: usize,
    pub beta_at_axis: Vec<f64>,
    pub gamma_at_axis: Vec<f64>,
    pub hausdorff_worst: f64,
    pub gamma1_gap: f64,
}
