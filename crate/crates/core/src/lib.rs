//! Large deviations and smile asymptotics for rough stochastic volatility
//! models driven by fractional Ornstein-Uhlenbeck volatility.

pub mod error;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use kernels::{Hurst, KernelSpec};
pub mod cli;
pub mod config;
pub mod model;
pub mod rates;
pub mod smile;
pub mod verify;
