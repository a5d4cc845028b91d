pub mod asf;
pub mod binarization;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fmt;
pub mod geometry;
pub mod labelgen;
pub mod loss;
pub mod map;
pub mod postprocess;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
