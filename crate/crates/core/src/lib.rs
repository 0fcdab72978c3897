//! Multimodal instruction fusion runtime with simulated perception engines.

pub mod clock;
pub mod config;
pub mod bench;
pub mod engines;
pub mod fusion;
pub mod lexicon;
pub mod scene;
pub mod seed;
pub mod syncq;
pub mod tracegen;
pub mod types;
