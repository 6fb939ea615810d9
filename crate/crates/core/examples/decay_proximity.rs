//! The four decay functions and the proximity matrices they induce.

use ddibp::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};

fn main() -> ddibp::error::Result<()> {
    let decays = [
        DecayFunction::Constant,
        DecayFunction::Exponential { beta: 0.8 },
        DecayFunction::Logistic { beta: 3.0, nu: 1.5 },
        DecayFunction::Window { nu: 1.0 },
    ];
    for f in &decays {
        let values: Vec<String> = [0.0, 0.5, 1.0, 2.0, 4.0, f64::INFINITY]
            .iter()
            .map(|&d| f.eval(d).map(|v| format!("{v:.3}")))
            .collect::<Result<_, _>>()?;
        println!("{f:?}: f(0, 0.5, 1, 2, 4, inf) = {}", values.join(" "));
    }
    let covariate = [0.0, 0.4, 1.1, 3.0];
    for d in [
        DistanceMatrix::absolute_difference(&covariate)?,
        DistanceMatrix::sequential_absolute_difference(&covariate)?,
    ] {
        let a = ProximityMatrix::build(&d, &DecayFunction::Exponential { beta: 0.8 })?;
        println!("sequential = {}", d.is_sequential());
        for row in a.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
            println!("  {}", cells.join(" "));
        }
    }
    Ok(())
}
