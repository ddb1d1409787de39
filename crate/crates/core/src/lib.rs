pub mod cli;
pub mod error;
pub mod eval;
pub mod inference;
pub mod intent;
pub mod log_store;
pub mod models;
pub mod simulator;

pub use error::{Error, ErrorKind, Result};
