//! Numerical building blocks shared by the estimators and bias machinery.

pub mod diff;
pub mod format;
pub mod matrix;
pub mod quadrature;
pub mod rng;
pub mod sum;

pub use diff::{central_grad, central_jacobian, StepRule};
pub use format::{fmt9, format_sig, SIG_DIGITS};
pub use matrix::{solve_spd, Cholesky, Matrix, Tensor3};
pub use quadrature::{expect_quadrature, expect_quadrature_vec, integrate_unit_exponential, GaussLaguerre};
pub use rng::{RngStream, StreamRng};
pub use sum::NeumaierSum;
