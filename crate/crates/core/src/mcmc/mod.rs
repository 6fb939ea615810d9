//! Posterior inference for the dd-IBP linear-Gaussian model.
//!
//! A sweep updates, in order: `alpha` (conjugate Gibbs), every link of
//! every owned dish (Gibbs), dish ownership (Metropolis with the prior as
//! proposal), the noise scales (log-space random walk) and the missing
//! cells of `X`.

mod chain;
mod config;
mod sampler;

pub use chain::{read_json_lines, run_chain, Checkpoint, ChainOutput, JsonLinesSink, RecordSink, SampleRecord};
pub use config::{GammaPrior, McmcConfig, OwnershipScan, UpdateFlags};
pub use sampler::{
    ln_gamma_density, ln_noise_hyperprior, AcceptanceCounts, ChainState, Sampler, NOISE_HYPERPRIOR_LOG_SD,
};

#[cfg(test)]
mod tests;
