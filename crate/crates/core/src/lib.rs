//! Outage analysis of SC, EGC and MRC diversity receivers over equally
//! correlated lognormal fading.

pub mod asymptotics;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod curve;
pub mod error;
pub mod montecarlo;
pub mod oracles;
pub mod quadrature;
pub mod special_fn;

pub use error::{Error, Result};
