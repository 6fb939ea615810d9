//! The five experiment commands. Each validates its configuration, writes
//! its outputs under the output directory and finishes with `config.txt`
//! and `manifest.txt` (config hash, seed, version, and a SHA-256 for every
//! file written).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{format_decay, Command, Model, RunConfig};
use crate::error::{Error, Result};
use crate::features::{compute_feature_matrix, FeatureMatrix};
use crate::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use crate::io;
use crate::likelihood::{conditional_mean_missing, DataMatrix};
use crate::mcmc::{ChainOutput, JsonLinesSink, McmcConfig, Sampler};
use crate::prior::sample_prior;
use crate::random::stream;
use crate::theory::{
    ddibp_limit_fractions, ddibp_sharing_rates, fraction_summary, ibp_baseline_sample, reach_probs_exact,
    reach_probs_mc, sample_dhbp, sharing_pmf_sweep, sharing_stats, DhbpParams, ReachProbs, SharingStats,
    SweepModel,
};
use crate::verify::{ddibp_fraction_limit, full_suite, quick_checks, Report, SuiteSettings};

/// Version string recorded in manifests.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Draws used when reachability probabilities are too costly to enumerate.
const REACH_MC_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub output_dir: PathBuf,
    /// Paths relative to `output_dir`, in the order written.
    pub files: Vec<PathBuf>,
    /// Human-readable notes for the terminal.
    pub notes: Vec<String>,
    /// Set by `verify`.
    pub report: Option<Report>,
}

/// Collects the files of one run so the manifest can list them.
struct Outputs {
    root: PathBuf,
    files: Vec<PathBuf>,
    notes: Vec<String>,
}

impl Outputs {
    fn new(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            files: Vec::new(),
            notes: Vec::new(),
        })
    }

    fn write(&mut self, name: impl AsRef<Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let rel = name.as_ref().to_path_buf();
        let path = self.root.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(rel);
        Ok(())
    }

    fn finish(mut self, config: &RunConfig, report: Option<Report>) -> Result<CommandOutcome> {
        let text = config.reproducible_text();
        self.write("config.txt", |w| Ok(w.write_all(text.as_bytes())?))?;
        let seed = match config.command {
            Command::Verify => config.verify_seed,
            _ => config.mcmc.seed,
        };
        let mut manifest = format!("config_sha256 = {}\nseed = {seed}\nversion = {VERSION}\n", config.hash());
        for f in &self.files {
            let digest = Sha256::digest(fs::read(self.root.join(f))?);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            manifest.push_str(&format!("file {} = {hex}\n", f.display()));
        }
        self.write("manifest.txt", |w| Ok(w.write_all(manifest.as_bytes())?))?;
        Ok(CommandOutcome {
            output_dir: self.root,
            files: self.files,
            notes: self.notes,
            report,
        })
    }
}

fn write_heatmap(w: &mut dyn Write, m: &[Vec<f64>]) -> Result<()> {
    let mut zeroed = m.to_vec();
    for (i, row) in zeroed.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    io::write_matrix(w, &zeroed)
}

fn proximity_for(config: &RunConfig, n: Option<usize>) -> Result<ProximityMatrix> {
    let d = config.distances.build(n.unwrap_or(config.customers))?;
    if let Some(n) = n {
        if d.n() != n {
            return Err(Error::Dimension(format!(
                "data has {n} rows but the distances describe {} customers",
                d.n()
            )));
        }
    }
    ProximityMatrix::build(&d, &config.decay)
}

fn load_data(config: &RunConfig) -> Result<(Vec<String>, DataMatrix)> {
    let path = config.data.as_ref().ok_or_else(|| Error::Config {
        key: "data.path".into(),
        reason: "this command needs a data file".into(),
    })?;
    let (names, data) = io::read_data_table(path)?;
    Ok((names, if config.zscore { data.z_scored() } else { data }))
}

fn write_chain_files(out: &mut Outputs, dir: &Path, chain: &ChainOutput) -> Result<()> {
    let map_z = chain.map.z.restrict_active();
    out.write(dir.join("map_z.csv"), |w| io::write_features(w, &map_z))?;
    out.write(dir.join("trace.csv"), |w| {
        writeln!(w, "iteration,log_joint,k,alpha,sigma_x,sigma_w")?;
        for r in &chain.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iteration,
                io::format_float(r.log_joint),
                r.k,
                io::format_float(r.alpha),
                io::format_float(r.sigma_x),
                io::format_float(r.sigma_w)
            )?;
        }
        Ok(())
    })?;
    let map = &chain.map;
    out.write(dir.join("map_params.csv"), |w| {
        writeln!(w, "iteration,log_joint,k,alpha,sigma_x,sigma_w")?;
        let it = chain.map_iteration.map_or("initial".to_string(), |i| i.to_string());
        writeln!(
            w,
            "{it},{},{},{},{},{}",
            io::format_float(map.log_joint),
            map_z.n_cols(),
            io::format_float(map.alpha),
            io::format_float(map.noise.sigma_x),
            io::format_float(map.noise.sigma_w)
        )?;
        Ok(())
    })?;
    let stats = sharing_stats(&map_z);
    out.write(dir.join("sharing.csv"), |w| io::write_matrix(w, &stats.heatmap()))?;
    Ok(())
}

/// Runs one chain, streaming its records to `<dir>/samples.jsonl`.
fn run_logged(out: &mut Outputs, dir: &Path, a: ProximityMatrix, mcmc: &McmcConfig, data: DataMatrix) -> Result<ChainOutput> {
    let sampler = Sampler::new(a, mcmc.clone())?;
    let mut result = None;
    out.write(dir.join("samples.jsonl"), |w| {
        let mut sink = JsonLinesSink::new(w);
        result = Some(sampler.run_with_sink(Some(data), &mut sink)?);
        Ok(())
    })?;
    let chain = result.expect("chain ran");
    write_chain_files(out, dir, &chain)?;
    let kept = &chain.records[mcmc.burn_in.min(chain.records.len())..];
    if !kept.is_empty() {
        let mean_k = kept.iter().map(|r| r.k as f64).sum::<f64>() / kept.len() as f64;
        out.notes.push(format!(
            "{}: MAP log joint {:.3}, mean K after burn-in {mean_k:.2}, ownership acceptance {:.3}, noise acceptance {:.3}",
            if dir.as_os_str().is_empty() { "chain".to_string() } else { dir.display().to_string() },
            chain.map.log_joint,
            chain.acceptance.ownership_rate(),
            chain.acceptance.noise_rate()
        ));
    }
    Ok(chain)
}

/// Prior draws of the configured model: one `z_<draw>.csv` per draw, a
/// `samples.jsonl` line per draw and the mean sharing heatmap.
pub fn cmd_simulate(config: &RunConfig) -> Result<CommandOutcome> {
    config.validate()?;
    let mut out = Outputs::new(config.resolved_output_dir())?;
    let seed = config.mcmc.seed;
    let proximity = match config.model {
        Model::Ibp => None,
        _ => Some(proximity_for(config, None)?),
    };
    let n = proximity.as_ref().map_or(config.customers, ProximityMatrix::n);
    let dhbp = match (&proximity, config.model) {
        (Some(a), Model::Dhbp) => Some(DhbpParams::new(config.mass, config.c0, config.c1, config.k_trunc, a.clone())?),
        _ => None,
    };
    let mut all: Vec<SharingStats> = Vec::with_capacity(config.draws);
    let mut lines = Vec::with_capacity(config.draws);
    let width = config.draws.max(1).to_string().len().max(3);
    for d in 0..config.draws {
        let mut rng = stream(seed, d as u64);
        let z: FeatureMatrix = match config.model {
            Model::Ddibp => compute_feature_matrix(&sample_prior(proximity.as_ref().expect("proximity"), config.mass, &mut rng)?),
            Model::Ibp => ibp_baseline_sample(config.mass, n, &mut rng)?,
            Model::Dhbp => sample_dhbp(dhbp.as_ref().expect("dhbp parameters"), &mut rng),
        };
        out.write(format!("z_{d:0width$}.csv"), |w| io::write_features(w, &z))?;
        let s = sharing_stats(&z);
        lines.push(json!({ "draw": d, "k": z.n_cols(), "r": s.r }).to_string());
        all.push(s);
    }
    out.write("samples.jsonl", |w| {
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    if !all.is_empty() {
        let (mean, _) = fraction_summary(&all);
        out.write("sharing.csv", |w| write_heatmap(w, &mean))?;
    }
    out.notes.push(format!("{} draws of {n} customers", config.draws));
    out.finish(config, None)
}

/// MCMC fit: sample log, MAP features and hyperparameters, trace.
pub fn cmd_fit(config: &RunConfig) -> Result<CommandOutcome> {
    config.validate()?;
    let (_, data) = load_data(config)?;
    let a = proximity_for(config, Some(data.n()))?;
    let mut out = Outputs::new(config.resolved_output_dir())?;
    run_logged(&mut out, Path::new(""), a, &config.mcmc, data)?;
    out.finish(config, None)
}

/// Imputes masked cells from the MAP sample, once per decay setting.
pub fn cmd_impute(config: &RunConfig) -> Result<CommandOutcome> {
    config.validate()?;
    let (names, data) = load_data(config)?;
    let mut out = Outputs::new(config.resolved_output_dir())?;
    if !data.has_missing() {
        out.notes
            .push("warning: the data has no missing cells; imputation leaves it unchanged".into());
    }
    let truth = match &config.truth {
        Some(p) => {
            let (_, t) = io::read_data_table(p)?;
            if t.has_missing() || t.n() != data.n() || t.m() != data.m() {
                return Err(Error::Dimension(
                    "ground truth must be fully observed with the same shape as the data".into(),
                ));
            }
            Some(if config.zscore { t.z_scored() } else { t })
        }
        None => None,
    };
    let runs: Vec<(String, DecayFunction, PathBuf)> = if config.impute_betas.is_empty() {
        vec![(format_decay(&config.decay), config.decay, PathBuf::new())]
    } else {
        config
            .impute_betas
            .iter()
            .map(|&beta| {
                let label = io::format_float(beta);
                (label.clone(), DecayFunction::Exponential { beta }, PathBuf::from(format!("beta_{label}")))
            })
            .collect()
    };
    let d = config.distances.build(data.n())?;
    if d.n() != data.n() {
        return Err(Error::Dimension(format!(
            "data has {} rows but the distances describe {} customers",
            data.n(),
            d.n()
        )));
    }
    let mut errors = Vec::new();
    let mut residuals = Vec::new();
    for (label, decay, dir) in &runs {
        let a = ProximityMatrix::build(&d, decay)?;
        let chain = run_logged(&mut out, dir, a, &config.mcmc, data.clone())?;
        let map = &chain.map;
        let filled = conditional_mean_missing(map.data.as_ref().expect("data"), &map.z, &map.noise)?;
        out.write(dir.join("imputed.csv"), |w| io::write_data_table(w, &names, &filled, true))?;
        if let Some(t) = &truth {
            let cells = filled.missing_cells();
            let mut sq = 0.0;
            for &(i, j) in &cells {
                let (tv, iv) = (t.values()[(i, j)], filled.values()[(i, j)]);
                sq += (iv - tv).powi(2);
                residuals.push(format!(
                    "{label},{i},{j},{},{},{}",
                    io::format_float(tv),
                    io::format_float(iv),
                    io::format_float(iv - tv)
                ));
            }
            let mse = if cells.is_empty() { 0.0 } else { sq / cells.len() as f64 };
            errors.push(format!("{label},{},{}", io::format_float(mse), cells.len()));
            out.notes.push(format!("decay {label}: mean squared error {mse:.5} over {} cells", cells.len()));
        }
    }
    if truth.is_some() {
        out.write("errors.csv", |w| {
            writeln!(w, "decay,mse,cells")?;
            errors.iter().try_for_each(|l| writeln!(w, "{l}"))?;
            Ok(())
        })?;
        out.write("residuals.csv", |w| {
            writeln!(w, "decay,row,column,truth,imputed,residual")?;
            residuals.iter().try_for_each(|l| writeln!(w, "{l}"))?;
            Ok(())
        })?;
    }
    out.finish(config, None)
}

/// Runs the verification suite and writes `verify.csv` plus heatmaps of
/// large-mass dd-IBP sharing fractions.
pub fn cmd_verify(config: &RunConfig) -> Result<CommandOutcome> {
    config.validate()?;
    let mut out = Outputs::new(config.resolved_output_dir())?;
    let seed = config.verify_seed;
    let report = if config.quick {
        quick_checks(seed, config.perturbation)?
    } else {
        let settings = SuiteSettings {
            seed,
            perturbation: config.perturbation,
            ..SuiteSettings::default()
        };
        let report = full_suite(&settings)?;
        let limit = ddibp_fraction_limit(1000.0, 4, seed)?;
        out.write("ddibp_limit.csv", |w| write_heatmap(w, &limit.limit))?;
        out.write("ddibp_limit_mean.csv", |w| write_heatmap(w, &limit.mean))?;
        report
    };
    let table = sharing_pmf_sweep(&SweepModel::Ddibp, &config.sharing_grid, 15.0, 0, seed)?;
    out.write("ddibp_pmf.csv", |w| write_pmf(w, &table.grid, &table.mean_r, &table.pmf))?;
    out.write("verify.csv", |w| report.write_csv(w))?;
    let failed = report.failures().count();
    out.notes.push(format!("{} checks, {failed} failed", report.checks.len()));
    out.finish(config, Some(report))
}

fn write_pmf(w: &mut dyn Write, grid: &[f64], mean_r: &[f64], pmf: &[Vec<f64>]) -> Result<()> {
    let width = pmf.first().map_or(0, Vec::len);
    let head: Vec<String> = (0..width).map(|r| format!("p{r}")).collect();
    writeln!(w, "proximity,mean_r,{}", head.join(","))?;
    for ((a, m), row) in grid.iter().zip(mean_r).zip(pmf) {
        let vals: Vec<String> = row.iter().map(|&p| io::format_float(p)).collect();
        writeln!(w, "{},{},{}", io::format_float(*a), io::format_float(*m), vals.join(","))?;
    }
    Ok(())
}

/// Sharing analytics of the configured proximity: Poisson rates, limit
/// fractions, and the two-customer PMF sweep of the chosen model.
pub fn cmd_sharing(config: &RunConfig) -> Result<CommandOutcome> {
    config.validate()?;
    let mut out = Outputs::new(config.resolved_output_dir())?;
    let a = match config.model {
        Model::Ibp => ProximityMatrix::build(&DistanceMatrix::sequential_index(config.customers), &DecayFunction::Constant)?,
        _ => proximity_for(config, None)?,
    };
    let probs: ReachProbs = match reach_probs_exact(&a) {
        Ok(p) => p,
        Err(Error::TooLarge { .. }) => {
            out.notes.push(format!(
                "reachability estimated from {REACH_MC_DRAWS} Monte-Carlo draws"
            ));
            reach_probs_mc(&a, REACH_MC_DRAWS, config.mcmc.seed)?.probs
        }
        Err(e) => return Err(e),
    };
    let rates = ddibp_sharing_rates(&a, config.mass, &probs);
    out.write("rates.csv", |w| {
        writeln!(w, "i,j,rate")?;
        for i in 0..a.n() {
            for j in 0..a.n() {
                writeln!(w, "{i},{j},{}", io::format_float(rates.rate_ij[i][j]))?;
            }
        }
        Ok(())
    })?;
    let limit = ddibp_limit_fractions(&a, &probs);
    out.write("sharing.csv", |w| write_heatmap(w, &limit))?;
    let model = match config.model {
        Model::Dhbp => SweepModel::Dhbp {
            c0: config.c0,
            c1: config.c1,
            k_trunc: config.k_trunc,
        },
        _ => SweepModel::Ddibp,
    };
    let table = sharing_pmf_sweep(&model, &config.sharing_grid, config.mass, config.sharing_draws, config.mcmc.seed)?;
    out.write("pmf.csv", |w| write_pmf(w, &table.grid, &table.mean_r, &table.pmf))?;
    out.finish(config, None)
}

pub fn run_command(config: &RunConfig) -> Result<CommandOutcome> {
    match config.command {
        Command::Simulate => cmd_simulate(config),
        Command::Fit => cmd_fit(config),
        Command::Impute => cmd_impute(config),
        Command::Verify => cmd_verify(config),
        Command::Sharing => cmd_sharing(config),
    }
}
