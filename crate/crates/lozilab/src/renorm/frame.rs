//! Vertical orientation frame induced by the divider image.
//!
//! The image of the divider under the map is an infinite u-curve that
//! separates the plane into the images of the two half-planes. Which
//! Euclidean side the image of the *left* half-plane occupies depends on the
//! instance (it flips under vertical mirroring), so every "upper/lower"
//! predicate downstream is phrased relative to this frame: *frame-lower*
//! always means "on the same side as the image of the left half-plane".

use crate::error::{Error, Result};
use crate::geometry::{MonotoneCurve, Rectangle, Vec2};
use crate::maps::PiecewiseMap;
use serde::{Deserialize, Serialize};

/// Orientation frame: the divider image together with the sign that maps
/// Euclidean height above it onto frame height.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerticalFrame {
    sign: f64,
    divider_image: MonotoneCurve,
}

impl VerticalFrame {
    /// Computes the divider image and probes points just left of the divider
    /// to decide which Euclidean side their images fall on. Probes whose
    /// images leave the computed stretch of the divider image are skipped;
    /// the remaining probes must agree.
    pub fn new(m: &PiecewiseMap) -> Result<Self> {
        let pieces = m.curve_image(m.divider())?;
        if pieces.len() != 1 {
            return Err(Error::inconsistent(
                "divider image folded; expected a single u-curve",
            ));
        }
        let divider_image = pieces.into_iter().next().expect("one piece");

        let (p_lo, p_hi) = m.divider().param_range();
        let (w_lo, w_hi) = m.window();
        let offset = 0.02 * (w_hi.x - w_lo.x).abs().max(1.0);
        let (ix_lo, ix_hi) = divider_image.x_extent();

        let mut sign = 0.0_f64;
        let mut probes = 0usize;
        for k in 1..=9 {
            let t = k as f64 / 10.0;
            let y = p_lo + t * (p_hi - p_lo);
            let z = Vec2::new(m.divider().eval_clamped(y) - offset, y);
            let w = m.eval(z);
            if !w.is_finite() || w.x < ix_lo - 1e-9 || w.x > ix_hi + 1e-9 {
                continue;
            }
            let h = w.y - divider_image.eval_clamped(w.x);
            if h.abs() <= 1e-12 {
                continue;
            }
            let s = h.signum();
            if probes > 0 && s != sign {
                return Err(Error::ConditionViolation(
                    "images of the left half-plane straddle the divider image".into(),
                ));
            }
            sign = s;
            probes += 1;
        }
        if probes == 0 {
            return Err(Error::inconsistent(
                "no probe image landed on the computed divider image stretch",
            ));
        }
        // Frame-lower must be the side taken by images of the left
        // half-plane: if those images lie Euclidean-below (h < 0), Euclidean
        // height already is frame height.
        Ok(Self {
            sign: -sign,
            divider_image,
        })
    }

    /// `+1.0` when frame height equals Euclidean height above the divider
    /// image, `-1.0` when the instance is vertically mirrored.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// The divider image, a u-curve.
    pub fn divider_image(&self) -> &MonotoneCurve {
        &self.divider_image
    }

    /// Signed frame height of a point: negative in the frame-lower
    /// half-plane (the image of the left half-plane), positive in the
    /// frame-upper one.
    pub fn height(&self, p: Vec2) -> f64 {
        self.sign * (p.y - self.divider_image.eval_clamped(p.x))
    }

    /// The face of `rect` with the smaller frame height.
    pub fn lower_face<'a>(&self, rect: &'a Rectangle) -> &'a MonotoneCurve {
        if self.sign > 0.0 {
            rect.lower()
        } else {
            rect.upper()
        }
    }

    /// The face of `rect` with the larger frame height.
    pub fn upper_face<'a>(&self, rect: &'a Rectangle) -> &'a MonotoneCurve {
        if self.sign > 0.0 {
            rect.upper()
        } else {
            rect.lower()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;

    #[test]
    fn standard_instance_is_unmirrored() {
        let m = maps::lozi(1.9, 0.1).unwrap();
        let frame = VerticalFrame::new(&m).unwrap();
        assert_eq!(frame.sign(), 1.0);
        // f(-0.5, 0) = (0.05, -0.05): left half-plane maps below the axis.
        assert!(frame.height(Vec2::new(0.05, -0.05)) < 0.0);
        assert!(frame.height(Vec2::new(0.05, 0.05)) > 0.0);
    }

    #[test]
    fn negative_shear_flips_the_frame() {
        let m = maps::bcnf(1.55, 0.1, -1.8, 0.1).unwrap();
        let frame = VerticalFrame::new(&m).unwrap();
        assert_eq!(frame.sign(), -1.0);
        // f(-0.5, 0) = (0.225, 0.05): left half-plane maps above the axis,
        // so Euclidean-upper is frame-lower.
        assert!(frame.height(Vec2::new(0.225, 0.05)) < 0.0);
        assert!(frame.height(Vec2::new(0.225, -0.05)) > 0.0);
    }

    #[test]
    fn mirrored_orientation_preserving_instance() {
        let m = maps::lozi(1.9, -0.1).unwrap();
        let frame = VerticalFrame::new(&m).unwrap();
        assert_eq!(frame.sign(), -1.0);
    }

    #[test]
    fn faces_follow_the_frame() {
        let m = maps::bcnf(1.55, 0.1, -1.8, 0.1).unwrap();
        let frame = VerticalFrame::new(&m).unwrap();
        let rect = Rectangle::from_bbox(Vec2::new(-1.0, -0.3), Vec2::new(1.0, 0.3)).unwrap();
        // Mirrored frame: the Euclidean upper face is frame-lower.
        let lo = frame.lower_face(&rect);
        assert!(lo.start().y > 0.0);
        let hi = frame.upper_face(&rect);
        assert!(hi.start().y < 0.0);
    }
}
