pub mod bounds;
pub mod error;
pub mod graph;
pub mod harness;
pub mod matchers;
pub mod sampling;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
