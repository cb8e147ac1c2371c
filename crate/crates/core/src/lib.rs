pub mod boundary;
pub mod error;
pub mod exponents;
pub mod extension;
pub mod fem;
pub mod manufactured;
pub mod field;
pub mod mesh;
pub mod norms;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
