//! Robust segmented analog broadcast for wireless federated learning.
//!
//! The crate simulates a multi-antenna base station that broadcasts a global
//! model to single-antenna devices by splitting it into segments and sending
//! all segments over the same channel uses with per-segment beamformers.

pub mod baselines;
pub mod beamformer;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod fl;
pub mod linalg;
pub mod rng;
pub mod segab;

pub use error::{Error, Result};
