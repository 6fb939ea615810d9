use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddibp::commands::run_command;
use ddibp::config::{Command, RunConfig};
use ddibp::error::Error;

#[derive(Parser)]
#[command(name = "ddibp", version, about = "Distance dependent Indian buffet process toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Draw feature matrices from the prior
    Simulate(Opts),
    /// Fit the linear-Gaussian model by MCMC
    Fit(Opts),
    /// Impute missing cells, optionally over several decay rates
    Impute(Opts),
    /// Run the numerical verification suite
    Verify(Opts),
    /// Feature-sharing rates, limits and two-customer PMFs
    Sharing(Opts),
}

#[derive(Args)]
struct Opts {
    /// Configuration file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` override; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default: $DDIBP_OUT, then ./ddibp-out)
    #[arg(long)]
    out: Option<String>,
    /// Data table with a header row; empty cells are missing
    #[arg(long)]
    data: Option<String>,
    /// Fully observed data for imputation error reports
    #[arg(long)]
    truth: Option<String>,
    /// Distance matrix CSV, or covariate table with --column
    #[arg(long)]
    distances: Option<String>,
    /// Covariate column used to build distances
    #[arg(long)]
    column: Option<String>,
    /// `absolute` or `sequential` covariate distances
    #[arg(long)]
    distance_kind: Option<String>,
    /// `constant`, `exponential:B`, `logistic:B,NU` or `window:NU`
    #[arg(long)]
    decay: Option<String>,
    /// Exponential decay rate
    #[arg(long)]
    beta: Option<String>,
    /// Comma-separated decay rates for an imputation sweep
    #[arg(long)]
    betas: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Hold alpha at this value
    #[arg(long)]
    fix_alpha: Option<String>,
    /// Resample missing cells during the chain
    #[arg(long)]
    impute: bool,
    /// `ddibp`, `ibp` or `dhbp`
    #[arg(long)]
    model: Option<String>,
    /// alpha (dd-IBP, IBP) or gamma (dHBP)
    #[arg(long)]
    mass: Option<String>,
    /// Standardize data columns
    #[arg(long)]
    zscore: bool,
    /// Only the fast enumeration checks
    #[arg(long)]
    quick: bool,
    /// Scale every analytic rate in `verify` by `1 + P`; the checks should fail
    #[arg(long, value_name = "P")]
    perturb: Option<String>,
    /// `joint` or `per_customer` ownership proposals
    #[arg(long)]
    ownership: Option<String>,
}

fn build_config(command: Command, o: &Opts) -> Result<RunConfig, Error> {
    let mut c = match &o.config {
        Some(p) => RunConfig::load(command, p)?,
        None => RunConfig::new(command),
    };
    let mut pairs: Vec<(&str, String)> = Vec::new();
    let mut opt = |key: &'static str, v: &Option<String>| {
        if let Some(v) = v {
            pairs.push((key, v.clone()));
        }
    };
    opt("output.dir", &o.out);
    opt("data.path", &o.data);
    opt("data.truth", &o.truth);
    opt("distances.path", &o.distances);
    opt("distances.column", &o.column);
    opt("distances.kind", &o.distance_kind);
    opt("decay", &o.decay);
    opt("decay.beta", &o.beta);
    opt("impute.betas", &o.betas);
    opt("mcmc.iterations", &o.iterations);
    opt("mcmc.burn_in", &o.burn_in);
    opt(if command == Command::Verify { "verify.seed" } else { "mcmc.seed" }, &o.seed);
    opt("verify.perturbation", &o.perturb);
    opt("mcmc.ownership", &o.ownership);
    opt("mcmc.initial_alpha", &o.fix_alpha);
    opt("model", &o.model);
    opt("prior.mass", &o.mass);
    if o.fix_alpha.is_some() {
        pairs.push(("mcmc.update.alpha", "false".into()));
    }
    if o.impute {
        pairs.push(("mcmc.update.missing", "true".into()));
    }
    if o.zscore {
        pairs.push(("data.zscore", "true".into()));
    }
    if o.quick {
        pairs.push(("verify.quick", "true".into()));
    }
    for (k, v) in pairs {
        c.set(k, &v)?;
    }
    for kv in &o.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            key: kv.clone(),
            reason: "expected KEY=VALUE".into(),
        })?;
        c.set(k.trim(), v.trim())?;
    }
    Ok(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match &cli.command {
        Sub::Simulate(o) => (Command::Simulate, o),
        Sub::Fit(o) => (Command::Fit, o),
        Sub::Impute(o) => (Command::Impute, o),
        Sub::Verify(o) => (Command::Verify, o),
        Sub::Sharing(o) => (Command::Sharing, o),
    };
    let config = match build_config(command, opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run_command(&config) {
        Ok(outcome) => {
            if let Some(report) = &outcome.report {
                for c in &report.checks {
                    println!("{c}");
                }
            }
            for n in &outcome.notes {
                eprintln!("{n}");
            }
            eprintln!("outputs written to {}", outcome.output_dir.display());
            match &outcome.report {
                Some(r) if !r.all_passed() => ExitCode::from(2),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
