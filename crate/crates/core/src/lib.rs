pub mod bessel;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod forward;
pub mod greens;
pub mod inversion;
pub mod model;
pub mod series;

pub use error::{Error, Result};
