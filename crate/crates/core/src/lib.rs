//! Hyper-parameter search driven by the low-rank structure of convolutional
//! weights observed during the first few epochs of training.

pub mod error;
pub mod evbmf;
pub mod harness;
pub mod metrics;
mod minimize;
pub mod search;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
