pub mod cli;
pub mod error;
pub mod estimates;
pub mod fields;
pub mod harness;
pub mod initdata;
pub mod kernel;
pub mod transport;

pub use error::{Error, Result};
