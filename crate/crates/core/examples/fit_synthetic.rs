//! Fits the dd-IBP linear-Gaussian model to a synthetic series and compares
//! the MAP features with the generating ones.

use ddibp::geometry::{DecayFunction, DistanceMatrix};
use ddibp::mcmc::{run_chain, McmcConfig, OwnershipScan};
use ddibp::synthetic::{autocorrelated_series, SeriesSpec};

fn main() -> ddibp::error::Result<()> {
    let spec = SeriesSpec::default();
    let data = autocorrelated_series(&spec, 11)?;
    let config = McmcConfig {
        iterations: 500,
        seed: 4,
        ownership: OwnershipScan::PerCustomer,
        ..McmcConfig::default()
    };
    let out = run_chain(
        Some(data.x.clone()),
        &DistanceMatrix::sequential_absolute_difference(&data.times)?,
        &DecayFunction::Exponential { beta: 1.0 },
        &config,
    )?;
    let trace = out.trace();
    println!(
        "log joint {:.1} -> {:.1}, MAP {:.1} at sweep {:?}",
        trace[0],
        trace[trace.len() - 1],
        out.map.log_joint,
        out.map_iteration
    );
    println!(
        "sigma_x {:.3} (true {}), sigma_w {:.3} (true {})",
        out.map.noise.sigma_x, spec.noise_sd, out.map.noise.sigma_w, spec.weight_sd
    );
    let show = |z: &ddibp::features::FeatureMatrix| {
        for c in 0..z.n_cols() {
            let s: String = z.column(c).iter().map(|&b| if b { '#' } else { '.' }).collect();
            println!("  {s}");
        }
    };
    println!("true features (one line per feature, time runs left to right):");
    show(&data.z);
    println!("MAP features:");
    show(&out.map.z.restrict_active());
    Ok(())
}
