pub mod bounds;
pub mod checker;
pub mod cli;
pub mod constraint;
pub mod error;
pub mod experiment;
pub mod field;
mod flow;
pub mod oracle;
pub mod pattern;
pub mod seed;

pub use error::{Error, Result};
