pub mod autodiff;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod scalar;
pub mod solvers;
pub mod sortops;

pub use error::{Error, Result};
