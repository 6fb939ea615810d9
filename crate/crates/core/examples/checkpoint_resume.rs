//! Saves a chain checkpoint, resumes it, and shows that the continuation
//! matches an uninterrupted run.

use ddibp::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use ddibp::mcmc::{Checkpoint, McmcConfig, Sampler};
use ddibp::synthetic::{autocorrelated_series, SeriesSpec};

fn main() -> ddibp::error::Result<()> {
    let spec = SeriesSpec {
        n: 15,
        ..SeriesSpec::default()
    };
    let data = autocorrelated_series(&spec, 2)?;
    let a = ProximityMatrix::build(
        &DistanceMatrix::absolute_difference(&data.times)?,
        &DecayFunction::Exponential { beta: 1.0 },
    )?;
    let config = |iterations| McmcConfig {
        iterations,
        seed: 6,
        ..McmcConfig::default()
    };
    let whole = Sampler::new(a.clone(), config(60))?.run(Some(data.x.clone()))?;
    let first = Sampler::new(a.clone(), config(30))?.run(Some(data.x))?;
    let dir = std::env::temp_dir().join("ddibp-checkpoint-example.json");
    first.checkpoint().save(&dir)?;
    let restored = Checkpoint::load(&dir)?;
    let rest = Sampler::new(a, config(60))?.resume(restored, 30, &mut Vec::new())?;
    let joined: Vec<f64> = first.trace().into_iter().chain(rest.trace()).collect();
    println!("uninterrupted final log joint {:.6}", whole.trace()[59]);
    println!("resumed       final log joint {:.6}", joined[59]);
    println!("identical traces: {}", joined == whole.trace());
    std::fs::remove_file(dir)?;
    Ok(())
}
