pub mod baselines;
pub mod circuits;
pub mod cli;
pub mod error;
pub mod expressibility;
pub mod linalg;
pub mod pauli;
pub mod plot;
pub mod problems;
pub mod simulator;
pub mod strategy1;
pub mod strategy2;

pub use error::{Error, Result};
