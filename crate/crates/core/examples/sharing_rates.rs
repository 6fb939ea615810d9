//! Exact feature-sharing rates of a small dd-IBP and the fractions they
//! imply as the mass grows, checked against simulation.

use ddibp::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use ddibp::theory::{
    ddibp_limit_fractions, ddibp_sharing_rates, fraction_summary, reach_probs_exact, simulate_ddibp_sharing,
};

fn print(name: &str, m: &[Vec<f64>]) {
    println!("{name}");
    for row in m {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:7.3}")).collect();
        println!("  {}", cells.join(""));
    }
}

fn main() -> ddibp::error::Result<()> {
    let a = ProximityMatrix::build(
        &DistanceMatrix::absolute_difference(&[0.0, 0.5, 1.5, 3.0])?,
        &DecayFunction::Exponential { beta: 1.0 },
    )?;
    let probs = reach_probs_exact(&a)?;
    let rates = ddibp_sharing_rates(&a, 3.0, &probs);
    print("Poisson rates of R_ij at alpha = 3", &rates.rate_ij);
    print("limit of R_ij / R_i", &ddibp_limit_fractions(&a, &probs));
    let stats = simulate_ddibp_sharing(&a, 2000.0, 50, 1)?;
    let (mean, sd) = fraction_summary(&stats);
    print("simulated R_ij / R_i at alpha = 2000 (mean of 50 draws)", &mean);
    print("across-draw sd", &sd);
    Ok(())
}
