//! Intrinsic tokenizer evaluation: byte-level BPE, rank-frequency metrics,
//! rank correlations, pairwise outcome prediction and Bradley-Terry ranking.

// index loops read closer to the maths in the solvers
#![allow(clippy::needless_range_loop)]

pub mod bpe;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod predictor;
pub mod ranking;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
