//! Numerical verification suite. Each check compares a simulated or
//! computed statistic with a bound and yields one [`CheckResult`].

mod checks;
mod quick;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use crate::mcmc::{McmcConfig, OwnershipScan};
use crate::synthetic::SeriesSpec;

pub use checks::*;
pub use quick::quick_checks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// Passes when `statistic <= bound`.
    AtMost,
    /// Passes when `statistic >= bound`.
    AtLeast,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub statistic: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl CheckResult {
    pub fn at_most(name: impl Into<String>, statistic: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            relation: Relation::AtMost,
            bound,
            passed: statistic <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, statistic: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            relation: Relation::AtLeast,
            bound,
            passed: statistic >= bound,
        }
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

impl fmt::Display for CheckResult {
    /// `name,statistic,relation,bound,verdict`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.name,
            crate::io::format_float(self.statistic),
            self.relation.symbol(),
            crate::io::format_float(self.bound),
            self.verdict()
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn extend(&mut self, checks: impl IntoIterator<Item = CheckResult>) {
        self.checks.extend(checks);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "name,statistic,relation,bound,verdict")?;
        for c in &self.checks {
            writeln!(out, "{c}")?;
        }
        Ok(())
    }
}

/// Sample sizes of the full suite. The defaults fit the documented
/// runtime budget; `perturbation` scales every analytic rate by
/// `1 + perturbation` to test that the checks can fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSettings {
    pub seed: u64,
    pub perturbation: f64,
    pub rate_instances: usize,
    pub rate_draws: usize,
    pub limit_draws: usize,
    pub dhbp_k_trunc: usize,
    pub dhbp_draws: usize,
    pub likelihood_instances: usize,
    pub geweke_sweeps: usize,
    pub conjugacy_draws: usize,
    pub symmetry_pairs: usize,
    pub impute_masks: usize,
    /// Sweeps per chain in the imputation and trace checks.
    pub chain_iterations: usize,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self {
            seed: 2,
            perturbation: 0.0,
            rate_instances: 5,
            rate_draws: 100_000,
            limit_draws: 20,
            dhbp_k_trunc: 200_000,
            dhbp_draws: 200,
            likelihood_instances: 100,
            geweke_sweeps: 100_000,
            conjugacy_draws: 100_000,
            symmetry_pairs: 100,
            impute_masks: 10,
            chain_iterations: 1500,
        }
    }
}

/// Every check: rates, limits, likelihood, sampler correctness, symmetry,
/// imputation and trace shape.
pub fn full_suite(s: &SuiteSettings) -> Result<Report> {
    let mut report = Report::default();
    report.extend(quick_checks(s.seed, s.perturbation)?.checks);
    report.extend(sharing_rate_match(s.rate_instances, s.rate_draws, s.seed, s.perturbation)?);
    report.extend(ibp_reduction(10, 2.0, s.rate_draws, s.seed, s.perturbation)?);
    report.extend(ddibp_fraction_limit(1000.0, s.limit_draws, s.seed)?.checks);
    report.extend(dhbp_limit(1000.0, 10.0, 1.0, s.dhbp_k_trunc, s.dhbp_draws, s.seed)?.checks);
    report.extend(likelihood_oracle(s.likelihood_instances, 5, 200_000, s.seed)?);
    report.extend(geweke_flat(s.geweke_sweeps, s.seed)?);
    report.extend(alpha_conjugacy(s.conjugacy_draws, s.seed)?);
    report.extend(prior_symmetry(s.symmetry_pairs, 4, s.seed)?);
    let chain = inference_config(s.chain_iterations);
    let series = SeriesSpec::default();
    report.extend(imputation_directional(&series, &[0.5, 1.0, 2.0], s.impute_masks, &chain, s.seed)?.checks);
    report.extend(trace_sanity(&series, &chain, s.seed)?.1);
    Ok(report)
}

/// Sampler settings of the inference checks: default priors with the
/// per-customer ownership scan.
pub fn inference_config(iterations: usize) -> McmcConfig {
    McmcConfig {
        iterations,
        ownership: OwnershipScan::PerCustomer,
        ..McmcConfig::default()
    }
}

/// Eight customers at times `0..8` with sequential distances and
/// exponential decay `beta = 1`, the instance behind the limit checks.
pub fn limit_instance() -> ProximityMatrix {
    let times: Vec<f64> = (0..8).map(f64::from).collect();
    ProximityMatrix::build(
        &DistanceMatrix::sequential_absolute_difference(&times).expect("finite times"),
        &DecayFunction::Exponential { beta: 1.0 },
    )
    .expect("valid proximity")
}
