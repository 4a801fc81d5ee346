pub mod cli;
pub mod dualconn;
pub mod error;
pub mod harness;
pub mod io;
pub mod lstm;
pub mod mobility;
pub mod predictor;
pub mod radio;
pub mod seed;

pub use error::{Error, Result};
