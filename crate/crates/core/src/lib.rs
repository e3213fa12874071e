//! Noise-filtered correlation structure and linear-response analysis of
//! monthly production, shipments and inventory index panels.

pub mod cycles;
pub mod error;
pub mod genuine;
pub mod nullmodel;
pub mod panel;
pub mod response;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
