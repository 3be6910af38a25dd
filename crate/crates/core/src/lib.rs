pub mod ensemble;
pub mod error;
pub mod graph;
pub mod histogram;
pub mod rmt;
pub mod scattering;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
