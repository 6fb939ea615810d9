//! Runs the fast exact checks and prints the report as CSV.

use ddibp::verify::quick_checks;

fn main() -> ddibp::error::Result<()> {
    let report = quick_checks(1, 0.0)?;
    report.write_csv(&mut std::io::stdout())?;
    let perturbed = quick_checks(1, 0.05)?;
    println!("with rates perturbed by 5%: {} checks fail", perturbed.failures().count());
    Ok(())
}
