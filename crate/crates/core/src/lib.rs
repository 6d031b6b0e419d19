pub mod analysis;
pub mod augment;
pub mod config;
pub mod corpus;
pub mod decode;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod model;
pub mod sweep;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
