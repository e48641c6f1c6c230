//! Signed distances between the escaping tail and the turning manifold.
//!
//! The strip right of the first rung empties leftward: its image is a wide
//! flat rectangle `K₂` spanning from the contracting saddle's stable curve
//! on the far left to the first rung, and each further image, with the
//! just-returned cell removed, is another such rectangle `K_m` one step
//! thinner. In closed form `K_m` is the `(m−1)`-fold image of the sub-strip
//! right of `γ_{m−1}`, so its horizontal faces are smooth iterates of the
//! sub-strip's faces and never fold.
//!
//! Each rung `β_i` crosses both faces of every `K_m` and also the turning
//! segment of the contracting saddle's unstable curve. The table entry
//! `θ_{i,m}` is the arc length along `β_i` from that crossing to the nearer
//! face of `K_m`, signed positive when the rectangle sits frame-above the
//! unstable curve. Three laws are checked: each diagonal step contracts the
//! distance by at least the expansion rate, the sign flips exactly with the
//! orientation of the map, and the first-rung signs follow the power law
//! `sgn θ_{1,m} = ε^{m−2}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{intersect_us, MonotoneCurve, Vec2};
use crate::maps::PiecewiseMap;
use crate::renorm::partition::RenormPartition;

/// Relative slack allowed on the contraction inequality.
const CONTRACTION_SLACK: f64 = 1e-6;

/// A face endpoint claimed to sit on a rung may miss it by this much.
const FACE_ON_RUNG_TOL: f64 = 1e-6;

/// One signed distance entry.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThetaEntry {
    /// Rung index the distance is measured along.
    pub i: usize,
    /// Rectangle index.
    pub m: usize,
    /// Signed arc length; positive means the rectangle is frame-above the
    /// unstable curve.
    pub value: f64,
}

/// The verified table of signed distances.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaTable {
    pub i_max: usize,
    pub m_max: usize,
    /// Expansion rate used by the contraction check.
    pub lambda: f64,
    /// Orientation sign of the map.
    pub epsilon: f64,
    pub entries: Vec<ThetaEntry>,
    /// Worst ratio `|θ_{i,m}| λ / |θ_{i+1,m−1}|` over the table (≤ 1 means
    /// every diagonal step contracted as required).
    pub contraction_worst: f64,
    pub contraction_ok: bool,
    /// Distances shrink strictly with `m` along every rung.
    pub monotone_ok: bool,
}

impl ThetaTable {
    /// The entry for rung `i` and rectangle `m`, if computed.
    pub fn get(&self, i: usize, m: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.i == i && e.m == m)
            .map(|e| e.value)
    }

    /// All checks passed. Sign-law violations never reach a table: they
    /// abort construction instead.
    pub fn pass(&self) -> bool {
        self.contraction_ok && self.monotone_ok
    }
}

/// Iterates a curve through `steps` smooth images, insisting it never
/// touches the divider on the way.
fn iterate_smooth(
    m: &PiecewiseMap,
    curve: &MonotoneCurve,
    steps: usize,
    what: &str,
) -> Result<MonotoneCurve> {
    let mut cur = curve.clone();
    for step in 1..=steps {
        let mut pieces = m.curve_image(&cur)?;
        if pieces.len() != 1 {
            return Err(Error::inconsistent(format!(
                "{what} split into {} pieces at step {step}; it must stay clear of the divider",
                pieces.len()
            )));
        }
        cur = pieces.pop().expect("one piece");
    }
    Ok(cur)
}

/// The horizontal faces of the rectangle `K_m`, as iterated face curves.
/// Returned in host order: the image of the lower host face first.
fn k_faces(
    m: &PiecewiseMap,
    part: &RenormPartition,
    level: usize,
) -> Result<(MonotoneCurve, MonotoneCurve)> {
    let rr = part.rectangle();
    let rect = rr.rect();
    let inner = &part.gamma()[level - 2];
    let (y_lo, y_hi) = rr.band();
    let mut out = Vec::with_capacity(2);
    for (face, y) in [(rect.lower(), y_lo), (rect.upper(), y_hi)] {
        let xa = inner.eval_clamped(y);
        let xb = rect.right().eval_clamped(y);
        let seg = face.sub_between_params(xa.min(xb), xa.max(xb))?;
        let seg = seg.refine(((xb - xa).abs() / 48.0).max(1e-9))?;
        out.push(iterate_smooth(
            m,
            &seg,
            level - 1,
            &format!("face of the level-{level} escape rectangle"),
        )?);
    }
    let upper = out.pop().expect("two faces");
    let lower = out.pop().expect("two faces");
    Ok((lower, upper))
}

/// Crossing of an iterated face with a rung. Falls back to the face
/// endpoint when the crossing sits exactly there (the faces terminate on
/// the first rung).
fn face_rung_crossing(face: &MonotoneCurve, rung: &MonotoneCurve, what: &str) -> Result<Vec2> {
    if let Some(p) = intersect_us(face, rung)? {
        return Ok(p);
    }
    let (t0, t1) = face.param_range();
    for p in [face.point_at_clamped(t0), face.point_at_clamped(t1)] {
        if rung.closest_distance(p) <= FACE_ON_RUNG_TOL {
            return Ok(p);
        }
    }
    Err(Error::ConditionViolation(format!(
        "{what} does not cross the rung it must span"
    )))
}

/// Builds and verifies the signed-distance table for `i ≤ i_max`,
/// `2 ≤ m ≤ m_max`, `i + m ≤` partition depth.
///
/// The sign laws are enforced hard: any entry whose sign disagrees with the
/// orientation recursion or the first-rung power law aborts with an error.
/// Contraction and monotonicity results are recorded in the table.
pub fn verify_theta(
    m: &PiecewiseMap,
    part: &RenormPartition,
    i_max: usize,
    m_max: usize,
) -> Result<ThetaTable> {
    if i_max < 1 || m_max < 2 {
        return Err(Error::invalid(
            "signed-distance table needs i_max ≥ 1 and m_max ≥ 2",
        ));
    }
    if i_max + 2 > part.depth() || m_max + 1 > part.depth() {
        return Err(Error::invalid(format!(
            "table caps ({i_max}, {m_max}) need a partition deeper than {}",
            part.depth()
        )));
    }
    let rr = part.rectangle();
    let phi = rr.frame().sign();
    let epsilon = f64::from(m.epsilon());
    let lambda = m.lambda_claimed();
    let (turn, _, _) = rr.pre_turn_unstable(m)?;

    // Crossings of the unstable turning segment with each rung.
    let mut w: Vec<Vec2> = Vec::new();
    for i in 1..=i_max {
        let rung = &part.beta()[i - 1];
        let p = intersect_us(&turn, rung)?.ok_or_else(|| {
            Error::ConditionViolation(format!(
                "unstable turning segment misses rung {i}; it must cross every rung"
            ))
        })?;
        w.push(p);
    }

    let mut entries: Vec<ThetaEntry> = Vec::new();
    for level in 2..=m_max {
        let (face_lo, face_hi) = k_faces(m, part, level)?;
        for i in 1..=i_max {
            if i + level > part.depth() {
                continue;
            }
            let rung = &part.beta()[i - 1];
            let q_lo = face_rung_crossing(&face_lo, rung, "iterated lower face")?;
            let q_hi = face_rung_crossing(&face_hi, rung, "iterated upper face")?;
            let wi = w[i - 1];
            let (d_lo, d_hi) = (q_lo.y - wi.y, q_hi.y - wi.y);
            if d_lo == 0.0 || d_hi == 0.0 || d_lo.signum() != d_hi.signum() {
                return Err(Error::ConditionViolation(format!(
                    "escape rectangle {level} straddles the unstable curve on rung {i}"
                )));
            }
            let q_near = if d_lo.abs() <= d_hi.abs() { q_lo } else { q_hi };
            let arc = rung.arc_length_between(wi.y.min(q_near.y), wi.y.max(q_near.y))?;
            let tau = phi * (q_near.y - wi.y).signum();
            entries.push(ThetaEntry {
                i,
                m: level,
                value: tau * arc,
            });
        }
    }

    let lookup = |i: usize, mm: usize| -> Option<f64> {
        entries
            .iter()
            .find(|e| e.i == i && e.m == mm)
            .map(|e| e.value)
    };

    // Hard sign laws.
    for e in &entries {
        if e.value == 0.0 {
            return Err(Error::ConditionViolation(format!(
                "signed distance θ_{{{},{}}} vanishes",
                e.i, e.m
            )));
        }
        if let Some(prev) = lookup(e.i + 1, e.m - 1) {
            if e.value.signum() != epsilon * prev.signum() {
                return Err(Error::ConditionViolation(format!(
                    "sign of θ_{{{},{}}} breaks the orientation recursion",
                    e.i, e.m
                )));
            }
        }
        if e.i == 1 {
            let want = if epsilon < 0.0 && e.m % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            if e.value.signum() != want {
                return Err(Error::ConditionViolation(format!(
                    "sign of θ_{{1,{}}} breaks the first-rung power law",
                    e.m
                )));
            }
        }
    }

    // Contraction across diagonal steps.
    let mut contraction_worst = 0.0_f64;
    for e in &entries {
        if let Some(prev) = lookup(e.i + 1, e.m - 1) {
            contraction_worst = contraction_worst.max(e.value.abs() * lambda / prev.abs());
        }
    }
    let contraction_ok = contraction_worst <= 1.0 + CONTRACTION_SLACK;

    // Strict decrease along each rung.
    let mut monotone_ok = true;
    for i in 1..=i_max {
        let mut prev: Option<f64> = None;
        for level in 2..=m_max {
            if let Some(v) = lookup(i, level) {
                if let Some(p) = prev {
                    monotone_ok &= v.abs() < p;
                }
                prev = Some(v.abs());
            }
        }
    }

    Ok(ThetaTable {
        i_max,
        m_max,
        lambda,
        epsilon,
        entries,
        contraction_worst,
        contraction_ok,
        monotone_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;
    use crate::renorm::partition::build_partition;
    use crate::renorm::rectangle::{build_rectangle, RenormConfig};

    fn table(m: &PiecewiseMap, depth: usize, i_max: usize, m_max: usize) -> ThetaTable {
        let cfg = RenormConfig::defaults_for(m);
        let rr = build_rectangle(m, &cfg).unwrap();
        let part = build_partition(m, &rr, depth).unwrap();
        verify_theta(m, &part, i_max, m_max).unwrap()
    }

    #[test]
    fn standard_distances_match_hand_values() {
        let m = maps::lozi(1.9, 0.1).unwrap();
        let t = table(&m, 8, 3, 5);
        assert!(t.pass());
        // Along the first rung: the first rectangle crosses at arc distance
        // 0.05843·√(1+0.5125²) above the turning point, the next one below.
        let t12 = t.get(1, 2).unwrap();
        assert!((t12 - 0.065654).abs() < 1e-4, "theta_12 = {t12}");
        let t13 = t.get(1, 3).unwrap();
        assert!((t13 + 0.0079454).abs() < 5e-4, "theta_13 = {t13}");
    }

    #[test]
    fn standard_first_rung_signs_alternate() {
        let m = maps::lozi(1.9, 0.1).unwrap();
        let t = table(&m, 9, 2, 7);
        for level in 2..=7 {
            let v = t.get(1, level).unwrap();
            let want = if level % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(v.signum(), want, "level {level}");
        }
    }

    #[test]
    fn mirrored_distances_keep_constant_sign() {
        let m = maps::bcnf(1.55, 0.1, -1.8, 0.1).unwrap();
        let t = table(&m, 8, 3, 5);
        assert!(t.pass());
        let t12 = t.get(1, 2).unwrap();
        assert!((t12 - 0.0751753).abs() < 1e-4, "theta_12 = {t12}");
        for e in &t.entries {
            assert!(e.value > 0.0, "theta_{{{},{}}} = {}", e.i, e.m, e.value);
        }
    }

    #[test]
    fn contraction_is_much_stronger_than_required() {
        let m = maps::lozi(1.9, 0.1).unwrap();
        let t = table(&m, 9, 3, 6);
        assert!(t.contraction_ok);
        // The true per-step factor is the stable rate ≈ 0.051, far below
        // the required 1/λ ≈ 0.54.
        assert!(t.contraction_worst < 0.2, "worst = {}", t.contraction_worst);
    }

    #[test]
    fn caps_are_validated() {
        let m = maps::lozi(1.9, 0.1).unwrap();
        let cfg = RenormConfig::defaults_for(&m);
        let rr = build_rectangle(&m, &cfg).unwrap();
        let part = build_partition(&m, &rr, 5).unwrap();
        assert!(verify_theta(&m, &part, 0, 4).is_err());
        assert!(verify_theta(&m, &part, 1, 1).is_err());
        assert!(verify_theta(&m, &part, 4, 4).is_err());
    }
}
