pub mod control;
pub mod error;
pub mod explorer;
pub mod geometry;
pub mod gpis;
pub mod harness;
pub mod io;
pub mod sensing;

pub use error::{Error, Result};
