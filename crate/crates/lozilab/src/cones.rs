//! Invariant cone fields: synthesis for affine branches, and sampled
//! verification of invariance, expansion, and volume contraction.
//!
//! The expanding field assigns to each point a cone about the x-axis that
//! the differential maps strictly into the field at the image point while
//! stretching every member vector by at least λ (Euclidean norm). The
//! contracting field is the transposed notion for the inverse map. For
//! branches in the normal form `[[m, 1], [k, 0]]` an exact slope interval
//! exists in closed form: a slope-`c` cone about the x-axis is invariant
//! and expanding precisely when `c² − |m|c + |k| ≤ 0`, and on the smallest
//! root the certified expansion factor is `|m| − c` exactly.

use crate::error::{Error, Result};
use crate::geometry::{Cone, Mat2, UniversalConePair, Vec2};
use crate::maps::{BranchTag, PiecewiseMap};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Which direction a cone field governs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeFieldKind {
    Unstable,
    Stable,
}

/// Point-dependent cone assignment.
#[derive(Clone)]
enum Assignment {
    Constant(Cone),
    Fn(Arc<dyn Fn(Vec2) -> Cone + Send + Sync>),
}

/// A cone field: an assignment of cones contained in one universal cone.
#[derive(Clone)]
pub struct ConeField {
    kind: ConeFieldKind,
    universal: UniversalConePair,
    assignment: Assignment,
}

impl fmt::Debug for ConeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("ConeField");
        d.field("kind", &self.kind);
        match &self.assignment {
            Assignment::Constant(c) => d.field("constant", c),
            Assignment::Fn(_) => d.field("assignment", &"fn"),
        };
        d.finish()
    }
}

impl ConeField {
    /// Constant field; the cone must be contained in the matching universal
    /// cone (checked through its boundary rays).
    pub fn constant(
        kind: ConeFieldKind,
        cone: Cone,
        universal: UniversalConePair,
    ) -> Result<Self> {
        let bound = match kind {
            ConeFieldKind::Unstable => universal.unstable(),
            ConeFieldKind::Stable => universal.stable(),
        };
        for ray in cone.boundary_rays() {
            if !bound.contains_relaxed(ray, 1e-12)? {
                return Err(Error::invalid(
                    "assigned cone is not contained in its universal cone",
                ));
            }
        }
        Ok(ConeField {
            kind,
            universal,
            assignment: Assignment::Constant(cone),
        })
    }

    /// Point-dependent field. Containment in the universal cone is the
    /// caller's responsibility (spot-checked by the verification routines).
    pub fn from_fn(
        kind: ConeFieldKind,
        universal: UniversalConePair,
        assignment: impl Fn(Vec2) -> Cone + Send + Sync + 'static,
    ) -> Self {
        ConeField {
            kind,
            universal,
            assignment: Assignment::Fn(Arc::new(assignment)),
        }
    }

    pub fn kind(&self) -> ConeFieldKind {
        self.kind
    }

    pub fn universal_bound(&self) -> &UniversalConePair {
        &self.universal
    }

    /// The cone assigned at `z`.
    pub fn at(&self, z: Vec2) -> Cone {
        match &self.assignment {
            Assignment::Constant(c) => *c,
            Assignment::Fn(f) => f(z),
        }
    }

    /// The constant cone when the field is constant.
    pub fn as_constant(&self) -> Option<Cone> {
        match &self.assignment {
            Assignment::Constant(c) => Some(*c),
            Assignment::Fn(_) => None,
        }
    }
}

/// Verification report for cone invariance and expansion sampling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    /// Infimum over samples and probed directions of the expansion ratio
    /// (forward on the expanding field, inverse on the contracting field).
    pub lambda_estimate: f64,
    /// Largest |det df| seen over the samples.
    pub det_max: f64,
    /// Sample points at which a probed direction escaped the image cone.
    pub invariance_failures: Vec<Vec2>,
    /// Number of points sampled (excluding skipped ones).
    pub samples: usize,
    /// Samples discarded for sitting on the divider (no single-branch
    /// differential there).
    pub skipped: usize,
    /// The expansion target, when one was supplied.
    pub lambda_target: Option<f64>,
    /// True when no invariance failures occurred and the target (if any)
    /// is met.
    pub pass: bool,
}

/// Report of the volume-contraction check `|det df| < 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeReport {
    pub det_max: f64,
    pub det_min: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Summary of a cone synthesis, closed-form when available.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthesisSummary {
    /// Feasible slope interval for the expanding cone about the x-axis.
    pub c_lo: f64,
    pub c_hi: f64,
    /// Chosen expanding-cone slope (the smallest feasible, maximizing λ).
    pub c_u: f64,
    /// Chosen contracting-cone slope about the y-axis.
    pub c_s: f64,
    /// Exact certified expansion factor at `c_u` (Euclidean infimum over
    /// the cone).
    pub lambda_certified: f64,
    /// The coarser bound `min_branches (|m| − c_u)/√(1 + c_u²)`, which
    /// discards the second row.
    pub lambda_conservative: f64,
    /// True when the feasible interval collapses to slope 0: the cones have
    /// degenerated onto the axes (determinant boundary).
    pub degenerate: bool,
    /// True when the closed-form normal-form path produced the result;
    /// false for the sampled fallback.
    pub closed_form: bool,
}

/// A synthesized pair of constant cone fields plus its summary.
#[derive(Clone, Debug)]
pub struct ConeSynthesis {
    pub unstable: ConeField,
    pub stable: ConeField,
    pub summary: SynthesisSummary,
}

/// Directions probed inside a cone: both boundary rays, the axis, and for
/// non-affine branches a fan of interior rays.
fn probe_directions(cone: &Cone, fan: usize) -> Vec<Vec2> {
    let mut dirs = vec![cone.axis()];
    let s = cone.slope();
    if s > 0.0 {
        dirs.extend(cone.boundary_rays());
        for i in 1..=fan {
            let t = s * (2.0 * (i as f64 / (fan + 1) as f64) - 1.0);
            if let Ok(d) = cone.ray_at(t) {
                dirs.push(d);
            }
        }
    }
    dirs
}

/// Draws `n` points uniformly from the rectangle `region` with a seeded
/// generator; reproducible across runs.
fn sample_points(region: (Vec2, Vec2), n: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = region;
    (0..n)
        .map(|_| {
            Vec2::new(
                lo.x + (hi.x - lo.x) * rng.gen::<f64>(),
                lo.y + (hi.y - lo.y) * rng.gen::<f64>(),
            )
        })
        .collect()
}

/// Slack granted when testing membership of images of boundary rays, which
/// sit exactly on the target cone's boundary in exact arithmetic.
const INVARIANCE_SLACK: f64 = 1e-12;

/// How far from the divider a sample must be to attribute a differential.
const DIVIDER_SKIP: f64 = 1e-9;

/// Checks cone-field invariance at sampled points: expanding cones map
/// forward into the field at the image, contracting cones map through the
/// inverse differential into the field at the preimage. Also accumulates
/// the expansion infimum and determinant maximum en route.
pub fn verify_invariance(
    m: &PiecewiseMap,
    cf_u: &ConeField,
    cf_s: &ConeField,
    n_samples: usize,
    seed: u64,
) -> Result<HyperbolicityReport> {
    verify_in_region(m, cf_u, cf_s, None, m.window(), n_samples, seed, true)
}

/// As [`verify_invariance`] over an explicit rectangle.
pub fn verify_invariance_in(
    m: &PiecewiseMap,
    cf_u: &ConeField,
    cf_s: &ConeField,
    region: (Vec2, Vec2),
    n_samples: usize,
    seed: u64,
) -> Result<HyperbolicityReport> {
    verify_in_region(m, cf_u, cf_s, None, region, n_samples, seed, true)
}

/// Measures the expansion infimum over sampled points and cone directions
/// and compares it against `lambda_target`. Invariance failures are not
/// counted against the verdict here (use [`verify_invariance`] for that);
/// only the expansion target decides `pass`.
pub fn verify_expansion(
    m: &PiecewiseMap,
    cf_u: &ConeField,
    cf_s: &ConeField,
    lambda_target: f64,
    n_samples: usize,
    seed: u64,
) -> Result<HyperbolicityReport> {
    verify_in_region(
        m,
        cf_u,
        cf_s,
        Some(lambda_target),
        m.window(),
        n_samples,
        seed,
        false,
    )
}

#[allow(clippy::too_many_arguments)]
fn verify_in_region(
    m: &PiecewiseMap,
    cf_u: &ConeField,
    cf_s: &ConeField,
    lambda_target: Option<f64>,
    region: (Vec2, Vec2),
    n_samples: usize,
    seed: u64,
    invariance_gates: bool,
) -> Result<HyperbolicityReport> {
    if cf_u.kind() != ConeFieldKind::Unstable || cf_s.kind() != ConeFieldKind::Stable {
        return Err(Error::invalid(
            "verify expects an unstable field then a stable field",
        ));
    }
    let mut lambda_est = f64::INFINITY;
    let mut det_max = 0.0_f64;
    let mut failures = Vec::new();
    let mut used = 0usize;
    let mut skipped = 0usize;

    for z in sample_points(region, n_samples, seed) {
        if m.signed_side(z).abs() <= DIVIDER_SKIP {
            skipped += 1;
            continue;
        }
        used += 1;
        let tag = m.side(z);
        let branch = m.branch(tag);
        let fan = if branch.as_affine().is_some() { 0 } else { 16 };
        let j = branch.jacobian(z);
        det_max = det_max.max(j.det().abs());

        // Forward invariance and expansion of the expanding field.
        let image_cone = cf_u.at(m.eval(z));
        let mut bad = false;
        for w in probe_directions(&cf_u.at(z), fan) {
            let w1 = j.mul_vec(w);
            lambda_est = lambda_est.min(w1.norm() / w.norm());
            if !image_cone.contains_relaxed(w1, INVARIANCE_SLACK)? {
                bad = true;
            }
        }

        // Inverse invariance and expansion of the contracting field.
        if let Some((p, ptag)) = m.inverse(z) {
            if m.signed_side(p).abs() > DIVIDER_SKIP {
                let jp = m.branch(ptag).jacobian(p);
                if let Ok(jp_inv) = jp.inverse() {
                    let pre_cone = cf_s.at(p);
                    for w in probe_directions(&cf_s.at(z), fan) {
                        let w1 = jp_inv.mul_vec(w);
                        lambda_est = lambda_est.min(w1.norm() / w.norm());
                        if !pre_cone.contains_relaxed(w1, INVARIANCE_SLACK)? {
                            bad = true;
                        }
                    }
                }
            }
        }
        if bad {
            failures.push(z);
        }
    }

    let target_ok = lambda_target.map_or(true, |t| lambda_est >= t);
    let pass = target_ok && (!invariance_gates || failures.is_empty());
    Ok(HyperbolicityReport {
        lambda_estimate: lambda_est,
        det_max,
        invariance_failures: failures,
        samples: used,
        skipped,
        lambda_target,
        pass,
    })
}

/// Checks `|det df| < 1` over sampled points on both branches.
pub fn check_volume_contraction(
    m: &PiecewiseMap,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeReport> {
    let mut det_max = f64::NEG_INFINITY;
    let mut det_min = f64::INFINITY;
    let mut used = 0usize;
    for z in sample_points(m.window(), n_samples, seed) {
        if m.signed_side(z).abs() <= DIVIDER_SKIP {
            continue;
        }
        let d = m.branch(m.side(z)).jacobian(z).det().abs();
        det_max = det_max.max(d);
        det_min = det_min.min(d);
        used += 1;
    }
    if used == 0 {
        return Err(Error::invalid("no usable samples for the volume check"));
    }
    Ok(VolumeReport {
        det_max,
        det_min,
        samples: used,
        pass: det_max < 1.0,
    })
}

/// Exact Euclidean infimum of `‖M w‖/‖w‖` over the slope-`c` cone about the
/// x-axis, for `M = [[±m, 1], [k, 0]]` in normal form: attained on the
/// boundary ray, giving `√((|m| − c)² + k²)/√(1 + c²)`.
fn normal_form_ray_ratio(m_abs: f64, k: f64, c: f64) -> f64 {
    (((m_abs - c) * (m_abs - c)) + k * k).sqrt() / (1.0 + c * c).sqrt()
}

/// True when the matrix is in the normal form `[[m, 1], [k, 0]]`.
fn is_normal_form(m: Mat2) -> bool {
    (m.b - 1.0).abs() <= 1e-12 && m.d.abs() <= 1e-12
}

/// Synthesizes constant expanding/contracting cone fields for a map with
/// affine branches. Returns `None` when no invariant slope interval exists
/// (e.g. rotations). The universal pair coincides with the chosen cones.
pub fn synthesize_affine_cones(m: &PiecewiseMap) -> Result<Option<ConeSynthesis>> {
    let Some((m_minus, _)) = m.branch(BranchTag::Minus).as_affine() else {
        return Err(Error::invalid(
            "cone synthesis requires affine branches",
        ));
    };
    let Some((m_plus, _)) = m.branch(BranchTag::Plus).as_affine() else {
        return Err(Error::invalid(
            "cone synthesis requires affine branches",
        ));
    };
    let mats = [m_minus, m_plus];
    if mats.iter().all(|mm| is_normal_form(*mm)) {
        Ok(synthesize_normal_form(&mats))
    } else {
        Ok(synthesize_sampled(&mats))
    }
}

/// Closed-form synthesis for normal-form branches.
fn synthesize_normal_form(mats: &[Mat2; 2]) -> Option<ConeSynthesis> {
    let mut c_lo = 0.0_f64;
    let mut c_hi = f64::INFINITY;
    for mm in mats {
        let a = mm.a.abs();
        let k = mm.c.abs();
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
    let c_u = c_lo;
    // The contracting slope interval about the y-axis is the reciprocal
    // image of the expanding one: its smallest feasible slope is 1/c_hi.
    let c_s = 1.0 / c_hi;
    let degenerate = c_u < 1e-12;
    let lambda_certified = mats
        .iter()
        .map(|mm| normal_form_ray_ratio(mm.a.abs(), mm.c.abs(), c_u))
        .fold(f64::INFINITY, f64::min);
    let lambda_conservative = mats
        .iter()
        .map(|mm| (mm.a.abs() - c_u) / (1.0 + c_u * c_u).sqrt())
        .fold(f64::INFINITY, f64::min);
    build_constant_fields(
        c_u,
        c_s,
        SynthesisSummary {
            c_lo,
            c_hi,
            c_u,
            c_s,
            lambda_certified,
            lambda_conservative,
            degenerate,
            closed_form: true,
        },
    )
}

/// Sampled fallback for affine branches outside the normal form: scans a
/// slope grid for the widest invariant expanding interval, probing each
/// candidate cone with a direction fan under both branch matrices.
fn synthesize_sampled(mats: &[Mat2; 2]) -> Option<ConeSynthesis> {
    let fan = 33;
    let feasible_u = |c: f64| -> Option<f64> {
        let mut lambda = f64::INFINITY;
        for mm in mats {
            for i in 0..=fan {
                let t = c * (2.0 * (i as f64 / fan as f64) - 1.0);
                let w = Vec2::new(1.0, t);
                let w1 = mm.mul_vec(w);
                // Image slope must stay within the cone.
                if w1.x.abs() <= c * w1.y.abs() * (1.0 - 1e-12) && c > 0.0 {
                    return None;
                }
                if w1.y.abs() > c * w1.x.abs() * (1.0 + 1e-12) {
                    return None;
                }
                lambda = lambda.min(w1.norm() / w.norm());
            }
        }
        Some(lambda)
    };
    let mut best: Option<(f64, f64)> = None; // (c, lambda)
    for i in 0..400 {
        // Log-spaced candidate slopes from 1e−4 to ~10.
        let c = 1e-4 * (10.0_f64 / 1e-4).powf(i as f64 / 399.0);
        if let Some(lambda) = feasible_u(c) {
            if lambda > 1.0 && best.map_or(true, |(_, bl)| lambda > bl) {
                best = Some((c, lambda));
            }
        }
    }
    let (c_u, lambda) = best?;
    // Contracting side: the inverse matrices must keep slope-c_s cones
    // about the y-axis invariant.
    let invs = [mats[0].inverse().ok()?, mats[1].inverse().ok()?];
    let feasible_s = |c: f64| -> bool {
        for mm in &invs {
            for i in 0..=fan {
                let t = c * (2.0 * (i as f64 / fan as f64) - 1.0);
                let w = Vec2::new(t, 1.0);
                let w1 = mm.mul_vec(w);
                if w1.x.abs() > c * w1.y.abs() * (1.0 + 1e-12) {
                    return false;
                }
            }
        }
        true
    };
    let mut c_s = None;
    for i in 0..400 {
        let c = 1e-4 * (10.0_f64 / 1e-4).powf(i as f64 / 399.0);
        if c * c_u < 1.0 && feasible_s(c) {
            c_s = Some(c);
            break;
        }
    }
    let c_s = c_s?;
    build_constant_fields(
        c_u,
        c_s,
        SynthesisSummary {
            c_lo: c_u,
            c_hi: c_u,
            c_u,
            c_s,
            lambda_certified: lambda,
            lambda_conservative: lambda,
            degenerate: false,
            closed_form: false,
        },
    )
}

fn build_constant_fields(c_u: f64, c_s: f64, summary: SynthesisSummary) -> Option<ConeSynthesis> {
    let universal = UniversalConePair::from_slopes(c_u, c_s).ok()?;
    let cone_u = Cone::from_slope(Vec2::new(1.0, 0.0), c_u).ok()?;
    let cone_s = Cone::from_slope(Vec2::new(0.0, 1.0), c_s).ok()?;
    let unstable = ConeField::constant(ConeFieldKind::Unstable, cone_u, universal).ok()?;
    let stable = ConeField::constant(ConeFieldKind::Stable, cone_s, universal).ok()?;
    Some(ConeSynthesis {
        unstable,
        stable,
        summary,
    })
}
