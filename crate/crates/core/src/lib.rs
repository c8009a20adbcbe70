//! Exact and Monte Carlo Gibbs computations for the Gaussian random field
//! Ising model, with numerical checks of its overlap identities and bounds.

pub mod disorder;
pub mod error;
pub mod gibbs;
pub mod lattice;
pub mod mcmc;
pub mod observables;
pub mod runner;
pub mod verify;

pub use error::{Result, RfimError};
