//! Bias-free convolutional denoisers and the tools to check and exploit
//! their exact local linearity.

pub mod analysis;
pub mod cli;
pub mod conv;
pub mod error;
pub mod io;
pub mod model;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use model::{Arch, Mode, Model, ModelConfig};
pub use rng::Rng;
pub use tensor::{Real, Tensor};
