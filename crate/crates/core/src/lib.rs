//! Online mirror descent over block-norm geometries.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod instances;
pub mod meta;
pub mod mirror_maps;
pub mod omd;
pub mod plot;
pub mod projection;
pub mod scalar;

pub use error::{Error, Result};
