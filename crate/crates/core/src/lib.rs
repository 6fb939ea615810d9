//! Distance dependent Indian buffet process.
//!
//! The prior over binary feature matrices lives in [`prior`] and
//! [`features`], with distances and decay functions in [`geometry`]. The
//! collapsed linear-Gaussian likelihood is in [`likelihood`], the Gibbs and
//! Metropolis sampler in [`mcmc`], and exact and Monte Carlo feature-sharing
//! results (including the dependent hierarchical beta process) in [`theory`].
//! [`verify`] holds the statistical checks behind the `verify` command.

pub mod error;
pub mod features;
pub mod geometry;
pub mod prior;
pub mod random;
pub mod likelihood;
pub mod mcmc;
pub mod stats;
pub mod theory;
pub mod io;
pub mod synthetic;
pub mod verify;
pub mod config;
pub mod commands;
