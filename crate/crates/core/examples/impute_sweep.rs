//! Reconstructs masked cells of a synthetic series with several decay rates;
//! `beta = 0` on sequential distances is the IBP.

use ddibp::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use ddibp::likelihood::conditional_mean_missing;
use ddibp::mcmc::{McmcConfig, OwnershipScan, Sampler};
use ddibp::random::seeded;
use ddibp::synthetic::{autocorrelated_series, mask_random_cells, masked_mse, SeriesSpec};

fn main() -> ddibp::error::Result<()> {
    let data = autocorrelated_series(&SeriesSpec::default(), 8)?;
    let masked = mask_random_cells(&data.x, 10, 2, &mut seeded(9))?;
    let d = DistanceMatrix::sequential_absolute_difference(&data.times)?;
    for beta in [0.0, 0.5, 1.0, 2.0] {
        let a = ProximityMatrix::build(&d, &DecayFunction::Exponential { beta })?;
        let config = McmcConfig {
            iterations: 600,
            seed: 1,
            ownership: OwnershipScan::PerCustomer,
            ..McmcConfig::default()
        };
        let out = Sampler::new(a, config)?.run(Some(masked.clone()))?;
        let x = out.map.data.as_ref().expect("chain ran with data");
        let filled = conditional_mean_missing(x, &out.map.z, &out.map.noise)?;
        println!("beta {beta:>3}: squared reconstruction error {:.3}", masked_mse(&filled, data.x.values()));
    }
    Ok(())
}
