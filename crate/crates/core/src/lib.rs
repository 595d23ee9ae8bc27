//! Forward and inverse spectral theory for CMV operators with matrix-valued
//! Verblunsky coefficients.

pub mod error;
pub mod greens;
pub mod inverse;
pub mod laurent;
pub mod linalg;
pub mod series;
pub mod spectral;
pub mod weyl;
pub mod verblunsky;

pub use error::{CmvError, Result};
pub use linalg::{ComplexMatrix, C64};
