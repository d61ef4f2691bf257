//! Model geometry of degenerating hyperbolic surfaces.
//!
//! Collars and cusps carry the exact hyperbolic density; weight-p sections on
//! them are acted on by Maass operators and the Green operator `(box + 1)^{-1}`.
//! Model families of Beltrami and quadratic differentials feed the
//! Weil-Petersson, Ricci and perturbed Ricci metrics and their curvatures.

pub mod collar;
pub mod comparison;
pub mod config;
pub mod error;
pub mod family;
pub mod metrics;
pub mod numerics;
pub mod report;
pub mod sections;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
