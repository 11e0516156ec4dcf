//! Dense real/complex linear algebra: storage, products, Householder least
//! squares, and the matrix functionals consumed by the bound constants.

mod matrix;
mod qr;
mod spectral;
mod support;

pub use matrix::DenseMatrix;
pub use qr::{least_squares, least_squares_with_tol, QrFactor, DEFAULT_RANK_TOL};
pub use spectral::{
    coherence, hermitian_eigenvalues, operator_norm, ric_surrogate, shifted_gram_norm,
    singular_values, RicEstimate, RicMode, MAX_EXACT_SUPPORTS,
};
pub use support::{embed, SupportSet};
