//! Sequence labeling with linear-chain neural CRFs, RNN transducers and
//! globally normalized neural CRF transducers.

pub mod cli;
pub mod data;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod models;
pub mod numerics;
pub mod par;

pub use error::{Error, Result};
