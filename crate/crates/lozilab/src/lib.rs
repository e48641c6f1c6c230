//! Verified numerics for a family of planar homeomorphisms glued from two
//! smooth pieces along a dividing line, in the style of the Lozi map.
//!
//! The crate provides:
//!
//! - [`geometry`]: cones, slope-bounded monotone curves, curvilinear
//!   rectangles and strips, orderings along expanding/contracting
//!   directions, clipping, and spatial indexing;
//! - [`maps`]: the piecewise map type with branch evaluation, branch-wise
//!   inverses, curve images, fixed points, and the built-in families
//!   (Lozi, border-collision normal form, general piecewise-affine);
//! - [`cones`]: synthesis and verification of invariant expanding and
//!   contracting cone fields with certified expansion factors;
//! - [`manifolds`]: local stable/unstable manifolds at the two saddle fixed
//!   points, manifold growth by iteration and pull-back, and density
//!   diagnostics of the stable manifold;
//! - [`renorm`]: the first-return partition of a distinguished rectangle,
//!   return-time verification, signed ordering and contraction of the
//!   return strips, and classification of tangency configurations;
//! - [`attractor`]: trapping regions, box-cover iteration, Hausdorff
//!   comparison of the attractor with the closure of the unstable manifold,
//!   box transition graphs, and basin sampling;
//! - [`scan`]: parameter-space classification, grid scans, tangency-curve
//!   continuation, and artifact emission.
//!
//! Everything is deterministic: random sampling goes through explicitly
//! seeded generators, and all reported numbers are reproducible from the
//! recorded configuration.

pub mod attractor;
pub mod cones;
pub mod error;
pub mod geometry;
pub mod manifolds;
pub mod maps;
pub mod renorm;
pub mod scan;

pub use error::{Error, Result};
