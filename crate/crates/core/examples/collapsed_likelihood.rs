//! Collapsed linear-Gaussian likelihood of a few candidate feature matrices
//! for the same data, and the weight posterior of the best one.

use ddibp::features::FeatureMatrix;
use ddibp::likelihood::{collapsed_loglik, weight_posterior, NoiseParams};
use ddibp::synthetic::{autocorrelated_series, SeriesSpec};

fn main() -> ddibp::error::Result<()> {
    let spec = SeriesSpec {
        n: 20,
        k: 3,
        ..SeriesSpec::default()
    };
    let data = autocorrelated_series(&spec, 5)?;
    let np = NoiseParams::new(spec.noise_sd, spec.weight_sd)?;
    let empty = FeatureMatrix::zeros(spec.n, 0);
    let first = FeatureMatrix::from_columns(spec.n, &[data.z.column(0).to_vec()]);
    for (name, z) in [("no features", &empty), ("first true feature", &first), ("true features", &data.z)] {
        println!("{name:>20}: log P(X | Z) = {:.2}", collapsed_loglik(&data.x, z, &np)?);
    }
    let post = weight_posterior(&data.x, &data.z, &np)?;
    println!("posterior mean weights:\n{:.2}", post.mean);
    println!("true weights:\n{:.2}", data.weights);
    Ok(())
}
