//! Run configuration as a flat list of dotted `key = value` pairs.
//!
//! A configuration file holds one pair per line; blank lines and lines
//! starting with `#` are ignored. Later assignments override earlier ones,
//! which is how command-line flags are layered over a file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{DecayFunction, DistanceMatrix};
use crate::io;
use crate::mcmc::{McmcConfig, OwnershipScan};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "DDIBP_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Impute,
    Verify,
    Sharing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Ddibp,
    Ibp,
    Dhbp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    AbsoluteDifference,
    SequentialAbsoluteDifference,
}

/// Where distances come from. With no source, customers are ordered by
/// index with sequential distances `i - j`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceBuilder {
    Index,
    Matrix(PathBuf),
    Covariate {
        path: PathBuf,
        column: String,
        kind: DistanceKind,
    },
}

impl DistanceBuilder {
    /// `n` is the customer count used by [`DistanceBuilder::Index`].
    pub fn build(&self, n: usize) -> Result<DistanceMatrix> {
        match self {
            DistanceBuilder::Index => Ok(DistanceMatrix::sequential_index(n)),
            DistanceBuilder::Matrix(path) => DistanceMatrix::new(io::read_matrix(path)?),
            DistanceBuilder::Covariate { path, column, kind } => {
                let values = io::read_covariate(path, column)?;
                match kind {
                    DistanceKind::AbsoluteDifference => DistanceMatrix::absolute_difference(&values),
                    DistanceKind::SequentialAbsoluteDifference => DistanceMatrix::sequential_absolute_difference(&values),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Model,
    pub output_dir: Option<PathBuf>,
    pub data: Option<PathBuf>,
    /// Fully observed version of `data`, for imputation error reports.
    pub truth: Option<PathBuf>,
    pub zscore: bool,
    pub distances: DistanceBuilder,
    pub decay: DecayFunction,
    pub mcmc: McmcConfig,
    /// `alpha` for prior simulation and sharing analytics, `gamma` for the dHBP.
    pub mass: f64,
    pub c0: f64,
    pub c1: f64,
    pub k_trunc: usize,
    /// Customer count when simulating without distances.
    pub customers: usize,
    pub draws: usize,
    /// Decay rates of an imputation sweep; empty means one run with `decay`.
    pub impute_betas: Vec<f64>,
    pub sharing_grid: Vec<f64>,
    /// dHBP draws per grid point of a sharing sweep.
    pub sharing_draws: usize,
    pub quick: bool,
    pub perturbation: f64,
    /// Seed of the verification suite, separate from `mcmc.seed`.
    pub verify_seed: u64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            model: Model::Ddibp,
            output_dir: None,
            data: None,
            truth: None,
            zscore: false,
            distances: DistanceBuilder::Index,
            decay: DecayFunction::Exponential { beta: 1.0 },
            mcmc: McmcConfig::default(),
            mass: 5.0,
            c0: 10.0,
            c1: 1.0,
            k_trunc: crate::theory::DEFAULT_K_TRUNC,
            customers: 10,
            draws: 4,
            impute_betas: Vec::new(),
            sharing_grid: (0..=20).map(|i| f64::from(i) / 20.0).collect(),
            sharing_draws: 2000,
            quick: false,
            perturbation: 0.0,
            verify_seed: 2,
        }
    }

    /// Output directory: `output.dir`, else `$DDIBP_OUT`, else `ddibp-out`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("ddibp-out"))
    }

    /// Applies every pair of a configuration text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, raw) in text.lines().enumerate() {
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (key, value) = l.split_once('=').ok_or(Error::Parse {
                line: line + 1,
                reason: format!("expected `key = value`, found `{l}`"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(command: Command, text: &str) -> Result<Self> {
        let mut c = Self::new(command);
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(command: Command, path: &Path) -> Result<Self> {
        Self::from_text(command, &std::fs::read_to_string(path)?)
    }

    /// Sets one dotted key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |reason: String| Error::Config {
            key: key.to_string(),
            reason,
        };
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config {
                key: key.into(),
                reason: format!("`{v}` is not a valid number"),
            })
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config {
                    key: key.into(),
                    reason: format!("expected true or false, found `{v}`"),
                }),
            }
        }
        fn path(v: &str) -> Option<PathBuf> {
            (!v.is_empty()).then(|| PathBuf::from(v))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        match key {
            "model" => {
                self.model = match value {
                    "ddibp" => Model::Ddibp,
                    "ibp" => Model::Ibp,
                    "dhbp" => Model::Dhbp,
                    _ => return Err(bad(format!("unknown model `{value}`"))),
                }
            }
            "output.dir" => self.output_dir = path(value),
            "data.path" => self.data = path(value),
            "data.truth" => self.truth = path(value),
            "data.zscore" => self.zscore = flag(key, value)?,
            "distances.source" => {
                self.distances = match value {
                    "index" => DistanceBuilder::Index,
                    "matrix" => DistanceBuilder::Matrix(PathBuf::new()),
                    "covariate" => DistanceBuilder::Covariate {
                        path: PathBuf::new(),
                        column: String::new(),
                        kind: DistanceKind::SequentialAbsoluteDifference,
                    },
                    _ => return Err(bad(format!("unknown distance source `{value}`"))),
                }
            }
            "distances.path" => match &mut self.distances {
                DistanceBuilder::Matrix(p) | DistanceBuilder::Covariate { path: p, .. } => *p = PathBuf::from(value),
                DistanceBuilder::Index => self.distances = DistanceBuilder::Matrix(PathBuf::from(value)),
            },
            "distances.column" | "distances.kind" => {
                if !matches!(self.distances, DistanceBuilder::Covariate { .. }) {
                    let path = match &self.distances {
                        DistanceBuilder::Matrix(p) => p.clone(),
                        _ => PathBuf::new(),
                    };
                    self.distances = DistanceBuilder::Covariate {
                        path,
                        column: String::new(),
                        kind: DistanceKind::SequentialAbsoluteDifference,
                    };
                }
                if let DistanceBuilder::Covariate { column, kind, .. } = &mut self.distances {
                    if key == "distances.column" {
                        *column = value.to_string();
                    } else {
                        *kind = match value {
                            "absolute" => DistanceKind::AbsoluteDifference,
                            "sequential" => DistanceKind::SequentialAbsoluteDifference,
                            _ => return Err(bad(format!("unknown distance kind `{value}`"))),
                        };
                    }
                }
            }
            "decay" => self.decay = parse_decay(value).map_err(|e| bad(e.to_string()))?,
            "decay.beta" => {
                let b: f64 = num(key, value)?;
                self.decay = match self.decay {
                    DecayFunction::Logistic { nu, .. } => DecayFunction::Logistic { beta: b, nu },
                    _ => DecayFunction::Exponential { beta: b },
                }
            }
            "mcmc.iterations" => self.mcmc.iterations = num(key, value)?,
            "mcmc.burn_in" => self.mcmc.burn_in = num(key, value)?,
            "mcmc.seed" => self.mcmc.seed = num(key, value)?,
            "mcmc.alpha_shape" => self.mcmc.alpha_prior.shape = num(key, value)?,
            "mcmc.alpha_rate" => self.mcmc.alpha_prior.rate = num(key, value)?,
            "mcmc.noise_proposal_scale" => self.mcmc.noise_proposal_scale = num(key, value)?,
            "mcmc.initial_alpha" => {
                self.mcmc.initial_alpha = if value.is_empty() { None } else { Some(num(key, value)?) }
            }
            "mcmc.initial_sigma_x" => self.mcmc.initial_noise.sigma_x = num(key, value)?,
            "mcmc.initial_sigma_w" => self.mcmc.initial_noise.sigma_w = num(key, value)?,
            "mcmc.update.alpha" => self.mcmc.update.alpha = flag(key, value)?,
            "mcmc.update.noise" => self.mcmc.update.noise = flag(key, value)?,
            "mcmc.update.missing" => self.mcmc.update.missing = flag(key, value)?,
            "mcmc.record_features" => self.mcmc.record_features = flag(key, value)?,
            "mcmc.ownership" => {
                self.mcmc.ownership = match value {
                    "joint" => OwnershipScan::Joint,
                    "per_customer" => OwnershipScan::PerCustomer,
                    _ => return Err(bad(format!("expected `joint` or `per_customer`, found `{value}`"))),
                }
            }
            "prior.mass" => self.mass = num(key, value)?,
            "dhbp.c0" => self.c0 = num(key, value)?,
            "dhbp.c1" => self.c1 = num(key, value)?,
            "dhbp.k_trunc" => self.k_trunc = num(key, value)?,
            "simulate.customers" => self.customers = num(key, value)?,
            "simulate.draws" => self.draws = num(key, value)?,
            "impute.betas" => self.impute_betas = list(key, value)?,
            "sharing.grid" => self.sharing_grid = list(key, value)?,
            "sharing.draws" => self.sharing_draws = num(key, value)?,
            "verify.quick" => self.quick = flag(key, value)?,
            "verify.perturbation" => self.perturbation = num(key, value)?,
            "verify.seed" => self.verify_seed = num(key, value)?,
            _ => return Err(bad("unknown key".into())),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order that
    /// [`RunConfig::apply_text`] reads back to an equal configuration.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let p = |o: &Option<PathBuf>| o.as_ref().map_or(String::new(), |p| p.display().to_string());
        let join = |v: &[f64]| v.iter().map(|x| io::format_float(*x)).collect::<Vec<_>>().join(",");
        let f = |x: f64| io::format_float(x);
        let mut out = vec![
            (
                "model",
                match self.model {
                    Model::Ddibp => "ddibp",
                    Model::Ibp => "ibp",
                    Model::Dhbp => "dhbp",
                }
                .to_string(),
            ),
            ("output.dir", p(&self.output_dir)),
            ("data.path", p(&self.data)),
            ("data.truth", p(&self.truth)),
            ("data.zscore", self.zscore.to_string()),
        ];
        match &self.distances {
            DistanceBuilder::Index => out.push(("distances.source", "index".into())),
            DistanceBuilder::Matrix(path) => {
                out.push(("distances.source", "matrix".into()));
                out.push(("distances.path", path.display().to_string()));
            }
            DistanceBuilder::Covariate { path, column, kind } => {
                out.push(("distances.source", "covariate".into()));
                out.push(("distances.path", path.display().to_string()));
                out.push(("distances.column", column.clone()));
                out.push((
                    "distances.kind",
                    match kind {
                        DistanceKind::AbsoluteDifference => "absolute",
                        DistanceKind::SequentialAbsoluteDifference => "sequential",
                    }
                    .into(),
                ));
            }
        }
        let m = &self.mcmc;
        out.extend([
            ("decay", format_decay(&self.decay)),
            ("mcmc.iterations", m.iterations.to_string()),
            ("mcmc.burn_in", m.burn_in.to_string()),
            ("mcmc.seed", m.seed.to_string()),
            ("mcmc.alpha_shape", f(m.alpha_prior.shape)),
            ("mcmc.alpha_rate", f(m.alpha_prior.rate)),
            ("mcmc.noise_proposal_scale", f(m.noise_proposal_scale)),
            ("mcmc.initial_alpha", m.initial_alpha.map_or(String::new(), f)),
            ("mcmc.initial_sigma_x", f(m.initial_noise.sigma_x)),
            ("mcmc.initial_sigma_w", f(m.initial_noise.sigma_w)),
            ("mcmc.update.alpha", m.update.alpha.to_string()),
            ("mcmc.update.noise", m.update.noise.to_string()),
            ("mcmc.update.missing", m.update.missing.to_string()),
            ("mcmc.record_features", m.record_features.to_string()),
            (
                "mcmc.ownership",
                match m.ownership {
                    OwnershipScan::Joint => "joint",
                    OwnershipScan::PerCustomer => "per_customer",
                }
                .into(),
            ),
            ("prior.mass", f(self.mass)),
            ("dhbp.c0", f(self.c0)),
            ("dhbp.c1", f(self.c1)),
            ("dhbp.k_trunc", self.k_trunc.to_string()),
            ("simulate.customers", self.customers.to_string()),
            ("simulate.draws", self.draws.to_string()),
            ("impute.betas", join(&self.impute_betas)),
            ("sharing.grid", join(&self.sharing_grid)),
            ("sharing.draws", self.sharing_draws.to_string()),
            ("verify.quick", self.quick.to_string()),
            ("verify.perturbation", f(self.perturbation)),
            ("verify.seed", self.verify_seed.to_string()),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// [`RunConfig::to_text`] without the output directory, which does not
    /// influence results.
    pub fn reproducible_text(&self) -> String {
        self.pairs()
            .iter()
            .filter(|(k, _)| *k != "output.dir")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of [`RunConfig::reproducible_text`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.reproducible_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks ranges and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Error::Config {
            key: key.into(),
            reason,
        };
        self.decay.validate().map_err(|e| bad("decay", e.to_string()))?;
        self.mcmc.validate().map_err(|e| match e {
            Error::Config { key, reason } => bad(&format!("mcmc.{key}"), reason),
            other => other,
        })?;
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(bad("prior.mass", format!("must be positive, got {}", self.mass)));
        }
        if !(self.c0 > 0.0 && self.c1 > 0.0) {
            return Err(bad("dhbp.c0", "concentrations must be positive".into()));
        }
        if self.k_trunc == 0 {
            return Err(bad("dhbp.k_trunc", "must be at least 1".into()));
        }
        if !(self.perturbation > -1.0 && self.perturbation.is_finite()) {
            return Err(bad("verify.perturbation", "must exceed -1".into()));
        }
        if self.impute_betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(bad("impute.betas", "decay rates must be finite and nonnegative".into()));
        }
        if self.sharing_grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(bad("sharing.grid", "proximities must be finite and nonnegative".into()));
        }
        let exists = |key: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(bad(key, format!("file `{}` does not exist", p.display())))
            }
        };
        if let Some(d) = &self.data {
            exists("data.path", d)?;
        }
        if let Some(t) = &self.truth {
            exists("data.truth", t)?;
        }
        match &self.distances {
            DistanceBuilder::Index => {}
            DistanceBuilder::Matrix(p) => exists("distances.path", p)?,
            DistanceBuilder::Covariate { path, column, .. } => {
                exists("distances.path", path)?;
                if column.is_empty() {
                    return Err(bad("distances.column", "a covariate column is required".into()));
                }
            }
        }
        if matches!(self.command, Command::Fit | Command::Impute) && self.data.is_none() {
            return Err(bad("data.path", "this command needs a data file".into()));
        }
        Ok(())
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// `constant`, `exponential:BETA`, `logistic:BETA,NU` or `window:NU`.
pub fn parse_decay(spec: &str) -> Result<DecayFunction> {
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    let nums: Vec<f64> = args
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| crate::error::domain(format!("bad decay parameters in `{spec}`")))?;
    let f = match (kind.trim(), nums.as_slice()) {
        ("constant", []) => DecayFunction::Constant,
        ("exponential", [beta]) => DecayFunction::Exponential { beta: *beta },
        ("logistic", [beta, nu]) => DecayFunction::Logistic { beta: *beta, nu: *nu },
        ("window", [nu]) => DecayFunction::Window { nu: *nu },
        _ => return Err(crate::error::domain(format!("unrecognized decay `{spec}`"))),
    };
    f.validate()?;
    Ok(f)
}

pub fn format_decay(f: &DecayFunction) -> String {
    let g = io::format_float;
    match *f {
        DecayFunction::Constant => "constant".into(),
        DecayFunction::Exponential { beta } => format!("exponential:{}", g(beta)),
        DecayFunction::Logistic { beta, nu } => format!("logistic:{},{}", g(beta), g(nu)),
        DecayFunction::Window { nu } => format!("window:{}", g(nu)),
    }
}
