pub mod bayes;
pub mod error;
pub mod experiment;
pub mod fgnn;
pub mod graph;
pub mod nn;
pub mod secret;
pub mod seed;
pub mod sgnn;

pub use error::{Error, Result};
