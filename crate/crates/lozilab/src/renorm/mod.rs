//! First-return renormalization of a distinguished rectangle.
//!
//! The construction proceeds in stages, each of which is verified
//! numerically before the next stage consumes it:
//!
//! 1. [`frame`] fixes a vertical orientation: the image of the divider is a
//!    u-curve that splits the plane into the images of the two half-planes,
//!    and the *frame* records which Euclidean side corresponds to the image
//!    of the left half-plane. All "upper/lower half-plane" predicates in
//!    this module are evaluated in that frame, so vertically mirrored
//!    instances are handled uniformly.
//! 2. [`rectangle`] builds the distinguished rectangle `R`: its left face is
//!    a segment of the stable manifold of the left saddle `Y`, its right
//!    face is the plus-branch pull-back of that segment, and its horizontal
//!    faces are straight. [`rectangle::verify_r_conditions`] checks the
//!    geometric entry conditions (forward images escape only across the
//!    extended left face, face half-plane positions, the stable manifold of
//!    the right saddle `X` spanning the rectangle, and the fold geometry).
//! 3. [`partition`] pulls the s-curve `β₁ = W^s_loc(X) ∩ R` back through
//!    the two branches, producing the ladders `β_m`, `γ_m` and the strips
//!    `B`, `C`, `D` together with the return cells `C_n`; consistency of
//!    the ladder under the forward map is certified by a sampled Hausdorff
//!    bound.
//! 4. [`return_map`] computes the first-return data on each cell: the
//!    splitting curve `S_n`, its image `T_n` on the divider image, the
//!    folded image strips `U_n`, and per-cell return-time certificates.
//!    [`return_map::verify_ordering`] checks the horizontal order of the
//!    `{U_n}` against the signed model `−(λ⁻¹ε)^{n−1}` and the orientation
//!    flip of their boundary curves.
//! 5. [`theta`] measures the signed arc distances `θ_{i,m}` between the
//!    forward strips `K_m` and the unstable manifold of `Y` along each
//!    `β_i`, and checks the contraction and sign recursions they satisfy.
//! 6. [`triangle`] builds the triangle model `H₀` spanned by the first turn
//!    of the unstable manifold of `Y` and its stable intersection with
//!    `W^s(X)`, iterates it into a finite union of towers, and clips the
//!    return cells to it.
//! 7. [`tangency`] classifies the behaviour of the clipped return map near
//!    a tangency of the first turn with a pull-back curve `γ_i`, locates
//!    such tangencies along one-parameter segments, and measures the
//!    diameter of the forward image of the towers' slice along the divider
//!    image.

pub mod frame;
pub mod partition;
pub mod rectangle;
pub mod return_map;
pub mod theta;

pub use frame::VerticalFrame;
pub use partition::{build_partition, PartitionSummary, RenormPartition};
pub use return_map::{
    first_return, verify_ordering, CellCertificate, OrderingReport, ReturnCell,
    ReturnCellSummary, ReturnMapData,
};
pub use theta::{verify_theta, ThetaEntry, ThetaTable};
pub use rectangle::{
    build_rectangle, verify_r_conditions, RectangleReport, RenormConfig, RenormRectangle,
};
