use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{compute_feature_matrix, FeatureMatrix};
use crate::geometry::ProximityMatrix;
use crate::prior::sample_prior;
use crate::theory::parallel_draws;
use crate::theory::reach::ReachProbs;

/// Feature-sharing counts of one feature matrix.
///
/// `fraction[i][j] = R_ij / R_i`, set to 0 for customers holding no
/// feature; those rows are listed in `empty`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingStats {
    pub r: Vec<u64>,
    pub r_pair: Vec<Vec<u64>>,
    pub fraction: Vec<Vec<f64>>,
    pub empty: Vec<bool>,
}

impl SharingStats {
    pub fn n(&self) -> usize {
        self.r.len()
    }

    /// Copy of `fraction` with the diagonal set to 0, for heatmaps.
    pub fn heatmap(&self) -> Vec<Vec<f64>> {
        let mut f = self.fraction.clone();
        for (i, row) in f.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        f
    }
}

pub fn sharing_stats(z: &FeatureMatrix) -> SharingStats {
    let n = z.n_rows();
    let mut r_pair = vec![vec![0u64; n]; n];
    let mut holders = Vec::with_capacity(n);
    for k in 0..z.n_cols() {
        holders.clear();
        holders.extend(z.column(k).iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i));
        for &i in &holders {
            for &j in &holders {
                r_pair[i][j] += 1;
            }
        }
    }
    let r: Vec<u64> = (0..n).map(|i| r_pair[i][i]).collect();
    let fraction = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if r[i] == 0 { 0.0 } else { r_pair[i][j] as f64 / r[i] as f64 })
                .collect()
        })
        .collect();
    let empty = r.iter().map(|&x| x == 0).collect();
    SharingStats {
        r,
        r_pair,
        fraction,
        empty,
    }
}

/// Poisson rates of `R_i` and `R_ij` under the dd-IBP prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingRates {
    pub rate_i: Vec<f64>,
    /// Symmetric, with `rate_ij[i][i] = rate_i[i]`.
    pub rate_ij: Vec<Vec<f64>>,
}

/// `rate_i = alpha sum_n P(L_in) / h_n` and
/// `rate_ij = alpha sum_n P(L_in, L_jn) / h_n`.
pub fn ddibp_sharing_rates(a: &ProximityMatrix, alpha: f64, probs: &ReachProbs) -> SharingRates {
    let n = a.n();
    let inv_h: Vec<f64> = a.h().iter().map(|h| 1.0 / h).collect();
    let weigh = |p: &[f64]| alpha * p.iter().zip(&inv_h).map(|(p, w)| p * w).sum::<f64>();
    let rate_i = (0..n).map(|i| weigh(&probs.p_single[i])).collect();
    let rate_ij = (0..n)
        .map(|i| (0..n).map(|j| weigh(&probs.p_pair[i][j])).collect())
        .collect();
    SharingRates { rate_i, rate_ij }
}

/// Deterministic large-mass limit of `R_ij / R_i`; independent of `alpha`.
pub fn ddibp_limit_fractions(a: &ProximityMatrix, probs: &ReachProbs) -> Vec<Vec<f64>> {
    let rates = ddibp_sharing_rates(a, 1.0, probs);
    rates
        .rate_ij
        .iter()
        .zip(&rates.rate_i)
        .map(|(row, ri)| row.iter().map(|rij| rij / ri).collect())
        .collect()
}

/// Sharing statistics of `draws` independent dd-IBP prior draws.
pub fn simulate_ddibp_sharing(a: &ProximityMatrix, alpha: f64, draws: usize, seed: u64) -> Result<Vec<SharingStats>> {
    parallel_draws(draws, seed, |_, rng| {
        let state = sample_prior(a, alpha, rng)?;
        Ok(sharing_stats(&compute_feature_matrix(&state)))
    })
    .into_iter()
    .collect()
}

/// Per-entry sample mean and variance of `R_ij` over independent draws,
/// with the standard errors of both. The diagonal holds `R_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingMoments {
    pub draws: usize,
    pub mean: Vec<Vec<f64>>,
    pub mean_se: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    pub variance_se: Vec<Vec<f64>>,
}

impl SharingMoments {
    pub fn from_stats(stats: &[SharingStats]) -> Self {
        let n = stats.first().map_or(0, SharingStats::n);
        let mut out = Self {
            draws: stats.len(),
            mean: vec![vec![0.0; n]; n],
            mean_se: vec![vec![0.0; n]; n],
            variance: vec![vec![0.0; n]; n],
            variance_se: vec![vec![0.0; n]; n],
        };
        let mut xs = Vec::with_capacity(stats.len());
        for i in 0..n {
            for j in 0..n {
                xs.clear();
                xs.extend(stats.iter().map(|s| s.r_pair[i][j] as f64));
                out.mean[i][j] = crate::stats::mean(&xs);
                out.mean_se[i][j] = crate::stats::standard_error(&xs);
                out.variance[i][j] = crate::stats::variance(&xs);
                out.variance_se[i][j] = crate::stats::variance_standard_error(&xs);
            }
        }
        out
    }
}

/// Elementwise mean and across-draw standard deviation of the fraction
/// matrices of several draws.
pub fn fraction_summary(stats: &[SharingStats]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = stats.first().map_or(0, SharingStats::n);
    let mut mean = vec![vec![0.0; n]; n];
    let mut sd = vec![vec![0.0; n]; n];
    let mut xs = Vec::with_capacity(stats.len());
    for i in 0..n {
        for j in 0..n {
            xs.clear();
            xs.extend(stats.iter().map(|s| s.fraction[i][j]));
            mean[i][j] = crate::stats::mean(&xs);
            sd[i][j] = if xs.len() > 1 { crate::stats::variance(&xs).sqrt() } else { 0.0 };
        }
    }
    (mean, sd)
}
