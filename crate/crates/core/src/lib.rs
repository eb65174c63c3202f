//! Symbolic model-operator calculus and numerical checks for the near-diagonal
//! expansion of Bergman kernels of high tensor powers of a positive line bundle.

pub mod calculus;
pub mod error;
pub mod expansion;
pub mod fit;
pub mod manifolds;
pub mod quadrature;
pub mod sweep;
pub mod tensor;

pub use error::{Error, Result};
