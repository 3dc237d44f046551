//! Integer-order Bessel functions and the Airy kernel.

mod airy;
mod bessel;

pub use airy::{airy_kernel, airy_kernel_matrix, AiryQuadrature};
pub use bessel::{bessel_i, bessel_j, bessel_pair_sum, BesselSeries};
