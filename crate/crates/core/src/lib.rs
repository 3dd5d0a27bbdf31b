pub mod augment;
pub mod config;
pub mod backbone;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod study;
pub mod tta;

pub use error::{Error, Result};
