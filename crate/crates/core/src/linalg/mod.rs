//! Dense linear algebra used by the transforms: matrices, circulant
//! convolution, SVD and the rectangular log-determinant.

mod cholesky;
mod conv;
mod logdet;
mod matrix;
mod svd;

pub use cholesky::{cholesky, cholesky_solve};
pub use conv::{circular_conv1d, kernel_offset, toeplitz_from_signal};
pub use logdet::{logdet_grad, logdet_rect, logdet_with_grad, sigma_min, SIGMA_FLOOR};
pub use matrix::{dot, Matrix};
pub use svd::{svd, SvdResult};
