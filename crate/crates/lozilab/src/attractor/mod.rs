//! Attractor-side machinery: polygonal regions, box covers on a fixed
//! lattice, trapping-region verification and construction, and the
//! diagnostics built on top of them (region iteration, Hausdorff comparison
//! against the unstable manifold, transition-graph mixing checks, basin
//! sampling, and the eventually-inside neighborhood construction).
//!
//! Two representations carry all of it and cross-validate each other:
//! [`RegionPolygon`] is an exact boundary description (an outer loop plus
//! holes), while [`Grid`] box unions are conservative covers whose set
//! operations are cheap and whose traced outlines feed back into polygons.

pub mod dynamics;
pub mod grid;
pub mod region;

pub use dynamics::{
    attractor_cover, basin_fraction, construct_v, find_trapping_region,
    hausdorff_attractor_vs_unstable, iterate_region, mixing_matrix, region_image,
    unstable_turn_triangle, verify_trapping, BasinEstimate, HausdorffReport, MixingReport,
    MixingVerdict, NeighborhoodV, RegionIteration, TrappedRegion, TrappingReport,
    TrappingVerdict, TOUCH_TOL,
};
pub use grid::{AttractorApprox, BoxId, Grid};
pub use region::RegionPolygon;
