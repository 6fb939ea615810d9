//! Builds a run from a configuration text, executes it and lists the files
//! written, as the command-line tool does.

use ddibp::commands::run_command;
use ddibp::config::{Command, RunConfig};

fn main() -> ddibp::error::Result<()> {
    let out = std::env::temp_dir().join("ddibp-config-example");
    let text = format!(
        "model = ddibp\ndecay = exponential:0.5\nprior.mass = 3\nsimulate.customers = 12\nsimulate.draws = 3\nmcmc.seed = 7\noutput.dir = {}\n",
        out.display()
    );
    let config = RunConfig::from_text(Command::Simulate, &text)?;
    println!("config sha256 {}", config.hash());
    let outcome = run_command(&config)?;
    for f in &outcome.files {
        println!("wrote {}", outcome.output_dir.join(f).display());
    }
    for note in &outcome.notes {
        println!("{note}");
    }
    Ok(())
}
