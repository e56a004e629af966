pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod preprocess;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::Rng;
