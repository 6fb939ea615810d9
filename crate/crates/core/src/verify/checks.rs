use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{domain, Result};
use crate::features::{compute_feature_matrix, FeatureMatrix};
use crate::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use crate::likelihood::{collapsed_loglik, conditional_mean_missing, DataMatrix, NoiseParams};
use crate::mcmc::{AcceptanceCounts, ChainState, McmcConfig, Sampler, UpdateFlags};
use crate::prior::{log_prior, permute_state, sample_prior, PriorState};
use crate::random::{gamma, seeded, standard_normal, stream};
use crate::stats;
use crate::synthetic::{autocorrelated_series, mask_random_cells, masked_mse, SeriesSpec};
use crate::theory::{
    ddibp_limit_fractions, ddibp_sharing_rates, dhbp_limit_fractions, dhbp_truncated_fractions, fraction_summary,
    ibp_baseline_sample, parallel_draws, reach_probs_exact, same_group_probability, sample_dhbp_grouped,
    sharing_stats, simulate_ddibp_sharing, DhbpParams, SharingMoments,
};
use crate::verify::{limit_instance, CheckResult};

/// `|estimate - target| / se`, infinite when a nonzero gap has no spread.
fn z_score(estimate: f64, target: f64, se: f64) -> f64 {
    let gap = (estimate - target).abs();
    if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Random exponential-decay instance with `n in {3, 4, 5}` customers and
/// `alpha in [0.5, 5]`.
pub fn random_rate_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<(ProximityMatrix, f64)> {
    let n = rng.random_range(3..=5);
    let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let beta = rng.random_range(0.2..2.0);
    let a = ProximityMatrix::build(
        &DistanceMatrix::absolute_difference(&times)?,
        &DecayFunction::Exponential { beta },
    )?;
    Ok((a, rng.random_range(0.5..5.0)))
}

/// Empirical mean and variance of every `R_i` and `R_ij` against the
/// analytic Poisson rate, in standard errors.
pub fn sharing_rate_match(instances: usize, draws: usize, seed: u64, perturbation: f64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::with_capacity(instances);
    for inst in 0..instances {
        let (a, alpha) = random_rate_instance(&mut stream(seed, inst as u64))?;
        let n = a.n();
        let rates = ddibp_sharing_rates(&a, alpha * (1.0 + perturbation), &reach_probs_exact(&a)?);
        let stats = simulate_ddibp_sharing(&a, alpha, draws, seed.wrapping_add(1000 + inst as u64))?;
        let m = SharingMoments::from_stats(&stats);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let rate = rates.rate_ij[i][j];
                worst = worst
                    .max(z_score(m.mean[i][j], rate, m.mean_se[i][j]))
                    .max(z_score(m.variance[i][j], rate, m.variance_se[i][j]));
            }
        }
        out.push(CheckResult::at_most(format!("sharing_rates.instance{inst}.n{n}"), worst, 3.0));
    }
    Ok(out)
}

/// Sequential distances with constant decay reproduce the IBP: per-draw
/// averages of `R_i` and `R_ij` against `alpha` and `alpha / 2`, and the
/// dish count against `Poisson(alpha H_n)`.
pub fn ibp_reduction(n: usize, alpha: f64, draws: usize, seed: u64, perturbation: f64) -> Result<Vec<CheckResult>> {
    let a = ProximityMatrix::build(&DistanceMatrix::sequential_index(n), &DecayFunction::Constant)?;
    let scale = 1.0 + perturbation;
    let per_draw: Vec<(f64, f64, u64)> = parallel_draws(draws, seed, |_, rng| {
        let state = sample_prior(&a, alpha, rng).expect("positive alpha");
        let s = sharing_stats(&compute_feature_matrix(&state));
        let ri = s.r.iter().sum::<u64>() as f64 / n as f64;
        let mut pair = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                pair += s.r_pair[i][j] as f64;
            }
        }
        (ri, pair / (n * (n - 1) / 2) as f64, state.k() as u64)
    });
    let ri: Vec<f64> = per_draw.iter().map(|d| d.0).collect();
    let rij: Vec<f64> = per_draw.iter().map(|d| d.1).collect();
    let ks: Vec<u64> = per_draw.iter().map(|d| d.2).collect();
    let harmonic: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
    let chi = stats::chi_square_poisson(&ks, scale * alpha * harmonic);

    let baseline: Vec<f64> = parallel_draws(draws, seed.wrapping_add(1), |_, rng| {
        ibp_baseline_sample(alpha, n, rng).expect("positive alpha").n_cols() as f64
    });
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let se = (stats::standard_error(&kf).powi(2) + stats::standard_error(&baseline).powi(2)).sqrt();
    Ok(vec![
        CheckResult::at_most(
            "ibp_reduction.r_i",
            z_score(stats::mean(&ri), scale * alpha, stats::standard_error(&ri)),
            3.0,
        ),
        CheckResult::at_most(
            "ibp_reduction.r_ij",
            z_score(stats::mean(&rij), scale * alpha / 2.0, stats::standard_error(&rij)),
            3.0,
        ),
        CheckResult::at_least("ibp_reduction.dish_count_chi2_p", chi.p_value, 0.01),
        CheckResult::at_most(
            "ibp_reduction.baseline_dish_count",
            z_score(stats::mean(&kf), stats::mean(&baseline), se),
            3.0,
        ),
    ])
}

/// Fraction matrices of large-mass draws against their deterministic limit.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitOutcome {
    pub limit: Vec<Vec<f64>>,
    pub mean: Vec<Vec<f64>>,
    pub sd: Vec<Vec<f64>>,
    pub checks: Vec<CheckResult>,
}

pub fn ddibp_fraction_limit(alpha: f64, draws: usize, seed: u64) -> Result<LimitOutcome> {
    let a = limit_instance();
    let n = a.n();
    let limit = ddibp_limit_fractions(&a, &reach_probs_exact(&a)?);
    let stats = simulate_ddibp_sharing(&a, alpha, draws, seed)?;
    let (mean, sd) = fraction_summary(&stats);
    let mut deviation: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                for s in &stats {
                    deviation = deviation.max((s.fraction[i][j] - limit[i][j]).abs());
                }
                spread = spread.max(sd[i][j]);
            }
        }
    }
    Ok(LimitOutcome {
        checks: vec![
            CheckResult::at_most("ddibp_limit.max_abs_deviation", deviation, 0.05),
            CheckResult::at_most("ddibp_limit.max_across_draw_sd", spread, 0.02),
        ],
        limit,
        mean,
        sd,
    })
}

/// Two-cluster summary of the off-diagonal dHBP sharing fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct DhbpLimitOutcome {
    pub upper_center: f64,
    pub lower_center: f64,
    /// Ratio-of-expectations values under the finite truncation.
    pub truncated_prediction: (f64, f64),
    pub limit: (f64, f64),
    pub checks: Vec<CheckResult>,
}

/// One-dimensional two-means; returns `(lower, upper)` centers and the
/// threshold between them.
fn two_means(xs: &[f64]) -> (f64, f64, f64) {
    let (mut lo, mut hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    for _ in 0..100 {
        let cut = 0.5 * (lo + hi);
        let (below, above): (Vec<f64>, Vec<f64>) = xs.iter().partition(|&&x| x < cut);
        let nlo = if below.is_empty() { lo } else { stats::mean(&below) };
        let nhi = if above.is_empty() { hi } else { stats::mean(&above) };
        if nlo == lo && nhi == hi {
            break;
        }
        lo = nlo;
        hi = nhi;
    }
    (lo, hi, 0.5 * (lo + hi))
}

/// Off-diagonal fractions of large-mass dHBP draws should sit at the two
/// limiting values, and a pair should land in the upper cluster as often
/// as its customers share a group.
pub fn dhbp_limit(gamma_mass: f64, c0: f64, c1: f64, k_trunc: usize, draws: usize, seed: u64) -> Result<DhbpLimitOutcome> {
    let params = DhbpParams::new(gamma_mass, c0, c1, k_trunc, limit_instance())?;
    let n = params.n();
    let limit = dhbp_limit_fractions(c0, c1)?;
    let samples = parallel_draws(draws, seed, |_, rng| {
        let d = sample_dhbp_grouped(&params, rng);
        sharing_stats(&d.z)
    });
    let pooled: Vec<f64> = samples
        .iter()
        .flat_map(|s| (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| s.fraction[i][j])))
        .collect();
    let (lower, upper, cut) = two_means(&pooled);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let q = same_group_probability(&params.proximity, i, j);
            let freq = samples.iter().filter(|s| s.fraction[i][j] >= cut).count() as f64 / draws as f64;
            worst = worst.max(z_score(freq, q, (q * (1.0 - q) / draws as f64).sqrt()));
        }
    }
    let holdings: Vec<f64> = samples.iter().map(|s| s.r.iter().sum::<u64>() as f64 / n as f64).collect();
    let bias = (stats::mean(&holdings) - gamma_mass).abs() / gamma_mass;
    Ok(DhbpLimitOutcome {
        upper_center: upper,
        lower_center: lower,
        truncated_prediction: dhbp_truncated_fractions(&params),
        limit,
        checks: vec![
            CheckResult::at_most("dhbp_limit.same_group_center", (upper - limit.0).abs(), 0.05),
            CheckResult::at_most("dhbp_limit.diff_group_center", (lower - limit.1).abs(), 0.05),
            CheckResult::at_most("dhbp_limit.same_group_frequency", worst, 3.0),
            CheckResult::at_most(
                "dhbp_limit.relative_mass_bias",
                bias,
                3.0 * stats::standard_error(&holdings) / gamma_mass,
            ),
        ],
    })
}

/// Column-wise `sum_j log N(x_j; 0, sigma_w^2 Z Z' + sigma_x^2 I)`.
pub fn gaussian_column_loglik(x: &DMatrix<f64>, z: &FeatureMatrix, np: &NoiseParams) -> f64 {
    let n = x.nrows();
    let zd = DMatrix::from_fn(n, z.n_cols(), |i, c| f64::from(u8::from(z.get(i, c))));
    let cov = &zd * zd.transpose() * np.sigma_w.powi(2) + DMatrix::identity(n, n) * np.sigma_x.powi(2);
    let chol = cov.cholesky().expect("positive definite covariance");
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad: f64 = (0..x.ncols())
        .map(|j| {
            let col = x.column(j).clone_owned();
            col.dot(&chol.solve(&col))
        })
        .sum();
    -0.5 * (quad + x.ncols() as f64 * (logdet + n as f64 * (2.0 * std::f64::consts::PI).ln()))
}

fn random_binary<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> FeatureMatrix {
    let cols: Vec<Vec<bool>> = (0..k).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    FeatureMatrix::from_columns(n, &cols)
}

/// Closed-form collapsed likelihood against the column-wise Gaussian and
/// against direct Monte-Carlo integration over `W`.
pub fn likelihood_oracle(instances: usize, mc_instances: usize, mc_samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=3);
        let z = random_binary(n, rng.random_range(0..=3), &mut rng);
        let np = NoiseParams::new(rng.random_range(0.3..2.0), rng.random_range(0.3..2.0))?;
        let x = DMatrix::from_fn(n, m, |_, _| 2.0 * standard_normal(&mut rng));
        let ours = collapsed_loglik(&DataMatrix::new(x.clone())?, &z, &np)?;
        worst = worst.max((ours - gaussian_column_loglik(&x, &z, &np)).abs());
    }
    let mut mc_worst: f64 = 0.0;
    for inst in 0..mc_instances {
        let n = rng.random_range(2..=4);
        let m = 2;
        let k = rng.random_range(1..=2);
        let z = random_binary(n, k, &mut rng);
        let np = NoiseParams::new(1.0, 1.0)?;
        let x = DMatrix::from_fn(n, m, |_, _| 1.5 * standard_normal(&mut rng));
        let exact = collapsed_loglik(&DataMatrix::new(x.clone())?, &z, &np)?;
        let zd = DMatrix::from_fn(n, k, |i, c| f64::from(u8::from(z.get(i, c))));
        let norm = -0.5 * (n * m) as f64 * (2.0 * std::f64::consts::PI).ln();
        let logs: Vec<f64> = parallel_draws(mc_samples, seed.wrapping_add(inst as u64 + 1), |_, r| {
            let w = DMatrix::from_fn(k, m, |_, _| np.sigma_w * standard_normal(r));
            norm - 0.5 * (&x - &zd * w).norm_squared()
        });
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let estimate = top + (logs.iter().map(|l| (l - top).exp()).sum::<f64>() / mc_samples as f64).ln();
        mc_worst = mc_worst.max((estimate - exact).abs());
    }
    Ok(vec![
        CheckResult::at_most("likelihood.gaussian_max_abs_error", worst, 1e-8),
        CheckResult::at_most("likelihood.monte_carlo_max_abs_error", mc_worst, 0.05),
    ])
}

const GEWEKE_STATS: [&str; 12] = [
    "dishes",
    "alpha",
    "nonzeros",
    "r0",
    "r1",
    "r2",
    "r3",
    "r01",
    "r12",
    "r23",
    "owned_by_0",
    "shared_by_all",
];

fn geweke_summary(prior: &PriorState, alpha: f64) -> [f64; 12] {
    let z = compute_feature_matrix(prior);
    let s = sharing_stats(&z);
    let all = z.column_sums().iter().filter(|&&c| c == z.n_rows()).count();
    [
        prior.k() as f64,
        alpha,
        s.r.iter().sum::<u64>() as f64,
        s.r[0] as f64,
        s.r[1] as f64,
        s.r[2] as f64,
        s.r[3] as f64,
        s.r_pair[0][1] as f64,
        s.r_pair[1][2] as f64,
        s.r_pair[2][3] as f64,
        prior.owned_range(0).len() as f64,
        all as f64,
    ]
}

/// Proximity of the four-customer sampler checks.
pub fn geweke_instance() -> ProximityMatrix {
    ProximityMatrix::build(
        &DistanceMatrix::absolute_difference(&[0.0, 0.5, 1.5, 3.0]).expect("finite"),
        &DecayFunction::Exponential { beta: 1.0 },
    )
    .expect("valid proximity")
}

/// Under a flat likelihood the chain targets the prior, so twelve summary
/// statistics of its draws must agree with independent forward draws.
pub fn geweke_flat(sweeps: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let a = geweke_instance();
    let config = McmcConfig {
        iterations: sweeps,
        seed,
        update: UpdateFlags {
            alpha: true,
            noise: false,
            missing: false,
        },
        ..McmcConfig::default()
    };
    let prior = config.alpha_prior;
    let sampler = Sampler::new(a.clone(), config)?;
    let mut rng = seeded(seed);
    let mut state = sampler.initial_state(None, &mut rng)?;
    let mut counts = AcceptanceCounts::default();
    let mut chain: Vec<[f64; 12]> = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        sampler.sweep(&mut state, &mut rng, &mut counts)?;
        chain.push(geweke_summary(&state.prior, state.alpha));
    }
    let forward: Vec<[f64; 12]> = parallel_draws(sweeps, seed.wrapping_add(1), |_, r| {
        let alpha = gamma(prior.shape, prior.rate, r);
        geweke_summary(&sample_prior(&a, alpha, r).expect("positive alpha"), alpha)
    });
    Ok(GEWEKE_STATS
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let c: Vec<f64> = chain.iter().map(|v| v[s]).collect();
            let f: Vec<f64> = forward.iter().map(|v| v[s]).collect();
            let se = (stats::batch_means_se(&c, 100).powi(2) + stats::standard_error(&f).powi(2)).sqrt();
            CheckResult::at_most(format!("geweke.{name}"), z_score(stats::mean(&c), stats::mean(&f), se), 3.0)
        })
        .collect())
}

/// Repeated conjugate draws of `alpha` against the Gamma posterior's
/// mean and variance.
pub fn alpha_conjugacy(draws: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let a = limit_instance();
    let mut rng = seeded(seed);
    let prior = sample_prior(&a, 3.0, &mut rng)?;
    let config = McmcConfig {
        seed,
        ..McmcConfig::default()
    };
    let sampler = Sampler::new(a, config)?;
    let mut state: ChainState = sampler.state_from_parts(prior, 1.0, NoiseParams::default(), None)?;
    let post = sampler.alpha_conditional(&state.prior);
    let xs: Vec<f64> = (0..draws)
        .map(|_| {
            sampler.gibbs_alpha(&mut state, &mut rng);
            state.alpha
        })
        .collect();
    let mean = post.shape / post.rate;
    let var = post.shape / (post.rate * post.rate);
    Ok(vec![
        CheckResult::at_most(
            "alpha_conjugacy.mean",
            z_score(stats::mean(&xs), mean, stats::standard_error(&xs)),
            3.0,
        ),
        CheckResult::at_most(
            "alpha_conjugacy.variance",
            z_score(stats::variance(&xs), var, stats::variance_standard_error(&xs)),
            3.0,
        ),
    ])
}

fn random_decay<R: Rng + ?Sized>(rng: &mut R) -> DecayFunction {
    match rng.random_range(0..4) {
        0 => DecayFunction::Constant,
        1 => DecayFunction::Exponential {
            beta: rng.random_range(0.1..3.0),
        },
        2 => DecayFunction::Logistic {
            beta: rng.random_range(0.5..5.0),
            nu: rng.random_range(0.1..3.0),
        },
        _ => DecayFunction::Window {
            nu: rng.random_range(0.5..3.0),
        },
    }
}

/// Relabelling customers together with the distances leaves the prior
/// density unchanged.
pub fn prior_symmetry(pairs: usize, n: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
        let d = if rng.random() {
            DistanceMatrix::absolute_difference(&times)?
        } else {
            DistanceMatrix::sequential_absolute_difference(&times)?
        };
        let f = random_decay(&mut rng);
        let a = ProximityMatrix::build(&d, &f)?;
        let alpha = rng.random_range(0.5..5.0);
        let state = sample_prior(&a, alpha, &mut rng)?;
        let z = compute_feature_matrix(&state);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (moved, _) = permute_state(&state, &z, &perm)?;
        let ap = ProximityMatrix::build(&d.permuted(&perm)?, &f)?;
        let gap = (log_prior(&state, &a, alpha)? - log_prior(&moved, &ap, alpha)?).abs();
        worst = worst.max(gap);
    }
    Ok(vec![CheckResult::at_most("symmetry.max_abs_log_prior_gap", worst, 1e-10)])
}

/// Per-mask reconstruction errors of several decay rates on the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationOutcome {
    /// `betas[0]` is the reference rate.
    pub betas: Vec<f64>,
    /// `mse[mask][b]` for `betas[b]`.
    pub mse: Vec<Vec<f64>>,
    pub checks: Vec<CheckResult>,
}

/// Squared error of the MAP-sample conditional mean at the masked cells.
pub fn impute_once(data: &DataMatrix, truth: &DMatrix<f64>, times: &[f64], beta: f64, config: &McmcConfig) -> Result<f64> {
    let a = ProximityMatrix::build(
        &DistanceMatrix::sequential_absolute_difference(times)?,
        &DecayFunction::Exponential { beta },
    )?;
    let out = Sampler::new(a, config.clone())?.run(Some(data.clone()))?;
    let map = &out.map;
    let x = map.data.as_ref().expect("chain ran with data");
    Ok(masked_mse(&conditional_mean_missing(x, &map.z, &map.noise)?, truth))
}

/// Paired comparison on `masks` random masks of one autocorrelated series:
/// how often each `beta > 0` does at least as well as `beta = 0`.
///
/// `base` supplies everything but the seed, which differs per mask.
pub fn imputation_directional(
    spec: &SeriesSpec,
    betas: &[f64],
    masks: usize,
    base: &McmcConfig,
    seed: u64,
) -> Result<ImputationOutcome> {
    let data = autocorrelated_series(spec, seed)?;
    let mut all = vec![0.0];
    all.extend_from_slice(betas);
    let jobs: Vec<(usize, usize)> = (0..masks).flat_map(|m| (0..all.len()).map(move |b| (m, b))).collect();
    let errors = parallel_draws(jobs.len(), seed, |job, _| -> Result<f64> {
        let (mask, b) = jobs[job];
        let masked = mask_random_cells(&data.x, 10, 2, &mut stream(seed.wrapping_add(1), mask as u64))?;
        let config = McmcConfig {
            seed: seed.wrapping_add(100 + mask as u64),
            ..base.clone()
        };
        impute_once(&masked, data.x.values(), &data.times, all[b], &config)
    });
    let mut mse = vec![vec![0.0; all.len()]; masks];
    for (&(m, b), e) in jobs.iter().zip(errors) {
        mse[m][b] = e?;
    }
    let need = (masks * 8).div_ceil(10) as f64;
    let checks = betas
        .iter()
        .enumerate()
        .map(|(b, beta)| {
            let wins = mse.iter().filter(|row| row[b + 1] <= row[0]).count();
            CheckResult::at_least(format!("imputation.beta_{beta}.wins_vs_beta_0"), wins as f64, need)
        })
        .collect();
    Ok(ImputationOutcome {
        betas: all,
        mse,
        checks,
    })
}

/// The log-joint trace rises above its starting value and its final fifth
/// shows no trend.
pub fn trace_sanity(spec: &SeriesSpec, base: &McmcConfig, seed: u64) -> Result<(Vec<f64>, Vec<CheckResult>)> {
    let data = autocorrelated_series(spec, seed)?;
    let a = ProximityMatrix::build(
        &DistanceMatrix::sequential_absolute_difference(&data.times)?,
        &DecayFunction::Exponential { beta: 1.0 },
    )?;
    let iterations = base.iterations;
    if iterations < 5 {
        return Err(domain("trace check needs at least five iterations"));
    }
    let config = McmcConfig { seed, ..base.clone() };
    let sampler = Sampler::new(a, config)?;
    let mut rng = seeded(seed);
    let mut state = sampler.initial_state(Some(data.x), &mut rng)?;
    let start = state.log_joint;
    let mut counts = AcceptanceCounts::default();
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        sampler.sweep(&mut state, &mut rng, &mut counts)?;
        trace.push(state.log_joint);
    }
    let tail = &trace[iterations - iterations / 5..];
    let trend = stats::trend_test(tail);
    Ok((
        trace.clone(),
        vec![
            CheckResult::at_least("trace.final_mean_minus_initial", stats::mean(tail) - start, 0.0),
            CheckResult::at_least("trace.final_fifth_slope_p", trend.p_value, 0.01),
        ],
    ))
}
