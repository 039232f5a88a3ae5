//! Gradient-free global optimisation of stochastic black-box simulators with
//! conditional generative surrogates and a Wasserstein uncertainty score.

pub mod acquisition;
pub mod bench;
pub mod blackbox;
pub mod design;
pub mod error;
pub mod neural;
pub mod optimizer;
pub mod statdist;
pub mod surrogate;

pub use error::{Error, Result};
