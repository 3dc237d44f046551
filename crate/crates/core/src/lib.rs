//! Numerics for the domain-wall dynamics of the XXZ spin-1/2 chain.
//!
//! The crate is organised bottom-up: [`numerics`] and [`special`] supply
//! quadrature, linear algebra and special functions; [`ed`] is the exact
//! finite-window reference; [`bethe`], [`ikccp`] and [`onepoint`] implement
//! the contour-integral formulas; [`freefermion`] covers the Δ = 0 case and
//! [`deformation`] the deformed-contour series and asymptotic ingredients.

pub mod bethe;
pub mod deformation;
pub mod ed;
pub mod error;
pub mod freefermion;
pub mod ikccp;
pub mod model;
pub mod numerics;
pub mod onepoint;
pub mod special;

pub use error::{Error, Result};
pub use model::{ModelParams, ParticleConfig};
pub use num_complex::Complex64 as C64;
