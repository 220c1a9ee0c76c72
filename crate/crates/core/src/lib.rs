pub mod error;
pub mod likelihood;
pub mod model;
pub mod posterior;
pub mod prior;
pub mod sampler;
pub mod simgen;
pub mod trace;

pub use error::{Error, Result};
