//! Contours, quadrature grids, adaptive tensor-product integration,
//! compensated summation and dense LU determinants.

mod contour;
mod gauss;
mod integrate;
mod linalg;
mod sum;

pub use contour::{Contour, ContourCircle, Orientation, PiecewiseContour, QuadGrid, Segment};
pub use gauss::gauss_legendre;
pub use integrate::{circle_nodes, integrate_nd, integrate_nd_vec, Dim, Estimate, QuadOptions, VecEstimate};
pub use linalg::{det_complex, det_real};
pub use sum::{pairwise_sum, NeumaierSum};
