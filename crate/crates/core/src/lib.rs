//! Secrecy-outage simulation for fluid reconfigurable intelligent surfaces.

pub mod beamphase;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod qlearn;
pub mod secrecy;
pub mod specfun;

pub use error::{Error, Result};
