pub mod error;
pub mod geom;
pub mod nn;
pub mod cli;
pub mod config;
pub mod contactgen;
pub mod control;
pub mod encoder;
pub mod patches;
pub mod percept;
pub mod policyhead;
pub mod poses;
pub mod reward;

pub use error::{Error, Result};
