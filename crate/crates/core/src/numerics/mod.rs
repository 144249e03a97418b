//! Dense small-dimension linear algebra and the seeded random source.

mod linalg;
mod matrix;
mod rng;

pub use linalg::{operator_norm, solve_linear, spd_factor};
pub use matrix::{DenseMatrix, DenseVector};
pub use rng::{gaussian_vector, RngStream};

pub(crate) use matrix::dist_sq;
pub(crate) use rng::gaussian_into;
