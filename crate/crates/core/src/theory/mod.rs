//! Feature-sharing theory: exact reachability oracles, the Poisson rates
//! and large-mass limits of `R_i` and `R_ij` under the dd-IBP, a truncated
//! dependent hierarchical beta process for comparison, and a direct IBP
//! sampler used as an independent baseline.

mod dhbp;
mod ibp;
mod reach;
mod sharing;
mod sweep;

use rayon::prelude::*;

use crate::random::{stream, ChainRng};

pub use dhbp::{
    dhbp_limit_fractions, dhbp_truncated_fractions, same_group_probability, sample_dhbp, sample_dhbp_grouped,
    DhbpDraw, DhbpParams, DEFAULT_K_TRUNC,
};
pub use ibp::ibp_baseline_sample;
pub use reach::{reach_probs_exact, reach_probs_mc, ReachEstimate, ReachProbs, ENUMERATION_LIMIT};
pub use sharing::{
    ddibp_limit_fractions, ddibp_sharing_rates, fraction_summary, sharing_stats, simulate_ddibp_sharing,
    SharingMoments, SharingRates, SharingStats,
};
pub use sweep::{sharing_pmf_sweep, two_point_proximity, PmfTable, SweepModel};

/// Runs `f(d, rng_d)` for `d in 0..draws` in parallel, where `rng_d` is
/// stream `d` under `seed`. Output order and values do not depend on the
/// thread schedule.
pub fn parallel_draws<T, F>(draws: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChainRng) -> T + Sync,
{
    (0..draws)
        .into_par_iter()
        .map(|d| f(d, &mut stream(seed, d as u64)))
        .collect()
}
