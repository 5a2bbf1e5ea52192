pub mod data;
pub mod detect;
pub mod error;
pub mod eval;
pub mod graph;
pub mod news;
pub mod nn;
pub mod sampler;
pub mod users;

pub use error::{Error, Result};
