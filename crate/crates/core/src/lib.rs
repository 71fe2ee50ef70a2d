pub mod cube;
pub mod error;
pub mod evaluate;
pub mod gc;
pub mod priors;
pub mod sampler;
pub mod tensor;
pub mod var;

pub use cube::LagCube;
pub use error::{Error, Result};
pub use tensor::{Matrix, Tensor3, TuckerFactors, Vector};
