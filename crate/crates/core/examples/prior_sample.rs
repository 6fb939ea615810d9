//! Draws one feature matrix from the dd-IBP prior over ten time points and
//! prints it with the dish owners.

use ddibp::features::compute_feature_matrix;
use ddibp::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use ddibp::prior::{log_prior, sample_prior};
use ddibp::random::seeded;

fn main() -> ddibp::error::Result<()> {
    let times: Vec<f64> = (0..10).map(f64::from).collect();
    let a = ProximityMatrix::build(
        &DistanceMatrix::absolute_difference(&times)?,
        &DecayFunction::Exponential { beta: 1.0 },
    )?;
    let mut rng = seeded(3);
    let state = sample_prior(&a, 2.0, &mut rng)?;
    let z = compute_feature_matrix(&state);
    println!("{} dishes, owners {:?}", state.k(), state.owners());
    for row in z.rows() {
        let cells: String = row.iter().map(|&b| if b { '#' } else { '.' }).collect();
        println!("  {cells}");
    }
    println!("log prior {:.3}", log_prior(&state, &a, 2.0)?);
    Ok(())
}
