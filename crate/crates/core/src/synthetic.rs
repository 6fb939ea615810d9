//! Synthetic data with known latent features, for recovery and imputation
//! experiments.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::features::FeatureMatrix;
use crate::likelihood::DataMatrix;
use crate::random::{seeded, standard_normal};

/// Shape of a synthetic series `X = Z W + noise` over evenly spaced times
/// in which every feature is active during one contiguous run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Shortest and longest run, inclusive.
    pub min_run: usize,
    pub max_run: usize,
    pub weight_sd: f64,
    pub noise_sd: f64,
}

impl Default for SeriesSpec {
    fn default() -> Self {
        Self {
            n: 40,
            m: 4,
            k: 8,
            min_run: 3,
            max_run: 10,
            weight_sd: 2.0,
            noise_sd: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub times: Vec<f64>,
    pub z: FeatureMatrix,
    pub weights: DMatrix<f64>,
    /// Noise-free signal `Z W`.
    pub signal: DMatrix<f64>,
    pub x: DataMatrix,
}

pub fn autocorrelated_series(spec: &SeriesSpec, seed: u64) -> Result<SyntheticData> {
    if spec.min_run == 0 || spec.min_run > spec.max_run || spec.max_run > spec.n {
        return Err(domain("run lengths must satisfy 1 <= min_run <= max_run <= n"));
    }
    if !(spec.weight_sd > 0.0 && spec.noise_sd >= 0.0) {
        return Err(domain("invalid synthetic series scales"));
    }
    let mut rng = seeded(seed);
    let mut columns = Vec::with_capacity(spec.k);
    for _ in 0..spec.k {
        let len = rng.random_range(spec.min_run..=spec.max_run);
        let start = rng.random_range(0..=spec.n - len);
        columns.push((0..spec.n).map(|i| (start..start + len).contains(&i)).collect::<Vec<bool>>());
    }
    let z = FeatureMatrix::from_columns(spec.n, &columns);
    let weights = DMatrix::from_fn(spec.k, spec.m, |_, _| spec.weight_sd * standard_normal(&mut rng));
    let zd = DMatrix::from_fn(spec.n, spec.k, |i, c| f64::from(u8::from(z.get(i, c))));
    let signal = &zd * &weights;
    let x = DMatrix::from_fn(spec.n, spec.m, |i, j| signal[(i, j)] + spec.noise_sd * standard_normal(&mut rng));
    Ok(SyntheticData {
        times: (0..spec.n).map(|i| i as f64).collect(),
        z,
        weights,
        signal,
        x: DataMatrix::new(x)?,
    })
}

/// Hides `per_row` random cells in each of `rows` random rows.
pub fn mask_random_cells<R: Rng + ?Sized>(
    x: &DataMatrix,
    rows: usize,
    per_row: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    let (n, m) = (x.n(), x.m());
    if rows > n || per_row > m {
        return Err(domain(format!(
            "cannot mask {per_row} cells in {rows} rows of a {n} x {m} matrix"
        )));
    }
    let mut missing = vec![false; n * m];
    for i in 0..n {
        for j in 0..m {
            missing[i * m + j] = x.is_missing(i, j);
        }
    }
    for i in sample(rng, n, rows) {
        for j in sample(rng, m, per_row) {
            missing[i * m + j] = true;
        }
    }
    DataMatrix::with_mask(x.values().clone(), missing)
}

/// Mean squared difference over the cells masked in `reconstructed`.
pub fn masked_mse(reconstructed: &DataMatrix, truth: &DMatrix<f64>) -> f64 {
    let cells = reconstructed.missing_cells();
    let total: f64 = cells
        .iter()
        .map(|&(i, j)| (reconstructed.values()[(i, j)] - truth[(i, j)]).powi(2))
        .sum();
    total / cells.len().max(1) as f64
}
