//! Stochastic-gradient Langevin dynamics laboratory: models, subsampling,
//! gradient estimators, the Euler-Maruyama sampler, analytic oracles for the
//! Gaussian toy model, a Metropolis-Hastings reference sampler, and the
//! experiment drivers behind the `sgldlab` CLI.

pub mod estimators;
pub mod experiments;
pub mod gradient;
pub mod mh;
pub mod models;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod scalar;

/// Concrete scalar used by the samplers and models.
pub type Real = f64;
