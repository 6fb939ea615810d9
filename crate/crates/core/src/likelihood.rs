//! Linear-Gaussian observation model `X = Z W + noise` with the weights
//! integrated out.
//!
//! All evaluations go through a Cholesky factor of
//! `H = Z'Z + (sigma_x / sigma_w)^2 I`; the determinant comes from its
//! diagonal.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::features::FeatureMatrix;
use crate::random;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Observations with a mask of unobserved cells. Masked cells hold the
/// current imputed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    x: DMatrix<f64>,
    missing: Vec<bool>,
}

impl DataMatrix {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let missing = vec![false; x.len()];
        Self::with_mask(x, missing)
    }

    /// `missing` is row-major with one flag per cell. Masked cells may be
    /// NaN on entry; they are set to 0 until imputed.
    pub fn with_mask(mut x: DMatrix<f64>, missing: Vec<bool>) -> Result<Self> {
        let (n, m) = x.shape();
        if missing.len() != n * m {
            return Err(Error::Dimension(format!(
                "mask has {} cells, data has {}",
                missing.len(),
                n * m
            )));
        }
        for i in 0..n {
            for j in 0..m {
                if missing[i * m + j] {
                    if !x[(i, j)].is_finite() {
                        x[(i, j)] = 0.0;
                    }
                } else if !x[(i, j)].is_finite() {
                    return Err(domain(format!("observed entry ({i}, {j}) is not finite")));
                }
            }
        }
        Ok(Self { x, missing })
    }

    /// Rows of optional values; `None` marks a missing cell.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut x = DMatrix::zeros(n, m);
        let mut missing = vec![false; n * m];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!("data row {i} is ragged")));
            }
            for (j, v) in row.iter().enumerate() {
                match v {
                    Some(v) => x[(i, j)] = *v,
                    None => missing[i * m + j] = true,
                }
            }
        }
        Self::with_mask(x, missing)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.m() + j]
    }

    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        let m = self.m();
        self.missing
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(c, _)| (c / m, c % m))
            .collect()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&b| b)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.x[(i, j)] = v;
    }

    /// Standardizes every column to zero mean and unit variance over its
    /// observed cells.
    pub fn z_scored(&self) -> Self {
        let mut out = self.clone();
        for j in 0..self.m() {
            let obs: Vec<f64> = (0..self.n())
                .filter(|&i| !self.is_missing(i, j))
                .map(|i| self.x[(i, j)])
                .collect();
            if obs.len() < 2 {
                continue;
            }
            let mean = obs.iter().sum::<f64>() / obs.len() as f64;
            let var = obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (obs.len() - 1) as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..self.n() {
                out.x[(i, j)] = if self.is_missing(i, j) {
                    0.0
                } else {
                    (self.x[(i, j)] - mean) / sd
                };
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma_x: f64,
    pub sigma_w: f64,
}

impl NoiseParams {
    pub fn new(sigma_x: f64, sigma_w: f64) -> Result<Self> {
        let p = Self { sigma_x, sigma_w };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_x > 0.0 && self.sigma_w > 0.0 && self.sigma_x.is_finite() && self.sigma_w.is_finite() {
            Ok(())
        } else {
            Err(domain(format!("noise scales must be positive, got {self:?}")))
        }
    }

    fn ridge(&self) -> f64 {
        (self.sigma_x / self.sigma_w).powi(2)
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            sigma_x: 1.0,
            sigma_w: 1.0,
        }
    }
}

/// Gaussian posterior over `W` given `X` and `Z`: rows of `W` share the
/// covariance `row_covariance`, columns are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPosterior {
    pub mean: DMatrix<f64>,
    pub row_covariance: DMatrix<f64>,
}

/// Dense `n x K` matrix of the given feature columns.
fn dense(n: usize, cols: &[&[bool]]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, c| if cols[c][i] { 1.0 } else { 0.0 })
}

fn active_slices(z: &FeatureMatrix) -> Vec<&[bool]> {
    (0..z.n_cols())
        .map(|c| z.column(c))
        .filter(|col| col.iter().any(|&b| b))
        .collect()
}

/// `Z'Z + r I` and `Z'X` straight from boolean columns.
fn gram(cols: &[&[bool]], x: &DMatrix<f64>, ridge: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = cols.len();
    let m = x.ncols();
    let mut h = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let s = cols[a]
                .iter()
                .zip(cols[b])
                .filter(|(&p, &q)| p && q)
                .count() as f64;
            h[(a, b)] = s;
            h[(b, a)] = s;
        }
        h[(a, a)] += ridge;
    }
    let mut ztx = DMatrix::zeros(k, m);
    for (a, col) in cols.iter().enumerate() {
        for (i, _) in col.iter().enumerate().filter(|(_, &b)| b) {
            for j in 0..m {
                ztx[(a, j)] += x[(i, j)];
            }
        }
    }
    (h, ztx)
}

fn factor(h: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(h).ok_or_else(|| domain("H is not numerically positive definite"))
}

/// Collapsed log likelihood over a list of active feature columns.
pub(crate) fn loglik_columns(
    x: &DMatrix<f64>,
    x_sq: f64,
    cols: &[&[bool]],
    np: &NoiseParams,
) -> Result<f64> {
    let (h, ztx) = gram(cols, x, np.ridge());
    loglik_from_gram(h, &ztx, x_sq, x.nrows(), np)
}

/// Collapsed log likelihood from `H = Z'Z + r I` and `Z'X`. Columns of `Z`
/// that are entirely zero leave the value unchanged.
fn loglik_from_gram(h: DMatrix<f64>, ztx: &DMatrix<f64>, x_sq: f64, n: usize, np: &NoiseParams) -> Result<f64> {
    let (k, m) = ztx.shape();
    let (nf, mf) = (n as f64, m as f64);
    let s2x = np.sigma_x * np.sigma_x;
    let base = -0.5 * nf * mf * LN_2PI;
    if k == 0 {
        return Ok(-x_sq / (2.0 * s2x) + base - nf * mf * np.sigma_x.ln());
    }
    let chol = factor(h)?;
    let l = chol.l_dirty();
    let logdet: f64 = 2.0 * (0..k).map(|a| l[(a, a)].ln()).sum::<f64>();
    let y = l
        .solve_lower_triangular(ztx)
        .ok_or_else(|| domain("singular Cholesky factor"))?;
    let trace = x_sq - y.norm_squared();
    let kf = k as f64;
    Ok(-trace / (2.0 * s2x) + base
        - (nf - kf) * mf * np.sigma_x.ln()
        - kf * mf * np.sigma_w.ln()
        - 0.5 * mf * logdet)
}

/// `Z'Z` and `Z'X` for a fixed data matrix, kept in step with single-column
/// changes of `Z` so a swapped column costs `O(KN + NM)` before the
/// factorization.
#[derive(Debug, Clone)]
pub(crate) struct GramCache {
    ztz: DMatrix<f64>,
    ztx: DMatrix<f64>,
    x_sq: f64,
    n: usize,
}

impl GramCache {
    pub(crate) fn new(x: &DMatrix<f64>, z: &FeatureMatrix) -> Self {
        let cols: Vec<&[bool]> = (0..z.n_cols()).map(|c| z.column(c)).collect();
        let (ztz, ztx) = gram(&cols, x, 0.0);
        Self {
            ztz,
            ztx,
            x_sq: x.norm_squared(),
            n: x.nrows(),
        }
    }

    fn column_terms(&self, x: &DMatrix<f64>, z: &FeatureMatrix, k: usize, col: &[bool]) -> (Vec<f64>, Vec<f64>) {
        let overlap = (0..z.n_cols())
            .map(|c| {
                let other = if c == k { col } else { z.column(c) };
                other.iter().zip(col).filter(|(&p, &q)| p && q).count() as f64
            })
            .collect();
        let mut sums = vec![0.0; x.ncols()];
        for (i, _) in col.iter().enumerate().filter(|(_, &b)| b) {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += x[(i, j)];
            }
        }
        (overlap, sums)
    }

    /// Likelihood with column `k` of `z` replaced by `col`.
    pub(crate) fn loglik_swapped(
        &self,
        x: &DMatrix<f64>,
        z: &FeatureMatrix,
        k: usize,
        col: &[bool],
        np: &NoiseParams,
    ) -> Result<f64> {
        let (overlap, sums) = self.column_terms(x, z, k, col);
        let mut h = self.ztz.clone();
        let mut ztx = self.ztx.clone();
        for (c, &v) in overlap.iter().enumerate() {
            h[(k, c)] = v;
            h[(c, k)] = v;
        }
        for (j, &v) in sums.iter().enumerate() {
            ztx[(k, j)] = v;
        }
        let ridge = np.ridge();
        for a in 0..h.nrows() {
            h[(a, a)] += ridge;
        }
        loglik_from_gram(h, &ztx, self.x_sq, self.n, np)
    }

    /// Records that column `k` of `z` became `col`; call before `z` changes.
    pub(crate) fn set_column(&mut self, x: &DMatrix<f64>, z: &FeatureMatrix, k: usize, col: &[bool]) {
        let (overlap, sums) = self.column_terms(x, z, k, col);
        for (c, &v) in overlap.iter().enumerate() {
            self.ztz[(k, c)] = v;
            self.ztz[(c, k)] = v;
        }
        for (j, &v) in sums.iter().enumerate() {
            self.ztx[(k, j)] = v;
        }
    }
}

fn check_shapes(x: &DataMatrix, z: &FeatureMatrix) -> Result<()> {
    if x.n() != z.n_rows() {
        return Err(Error::Dimension(format!(
            "data has {} rows, features have {}",
            x.n(),
            z.n_rows()
        )));
    }
    if x.x.iter().any(|v| !v.is_finite()) {
        return Err(domain("data contains non-finite entries"));
    }
    Ok(())
}

/// `log P(X | Z)` with `W` integrated out; all-zero columns of `Z` are
/// ignored.
pub fn collapsed_loglik(x: &DataMatrix, z: &FeatureMatrix, np: &NoiseParams) -> Result<f64> {
    np.validate()?;
    check_shapes(x, z)?;
    let cols = active_slices(z);
    loglik_columns(&x.x, x.x.norm_squared(), &cols, np)
}

pub fn weight_posterior(x: &DataMatrix, z: &FeatureMatrix, np: &NoiseParams) -> Result<WeightPosterior> {
    np.validate()?;
    check_shapes(x, z)?;
    let cols = active_slices(z);
    let (h, ztx) = gram(&cols, &x.x, np.ridge());
    if cols.is_empty() {
        return Ok(WeightPosterior {
            mean: DMatrix::zeros(0, x.m()),
            row_covariance: DMatrix::zeros(0, 0),
        });
    }
    let chol = factor(h)?;
    let mean = chol.solve(&ztx);
    let row_covariance = chol.inverse() * (np.sigma_x * np.sigma_x);
    Ok(WeightPosterior {
        mean,
        row_covariance,
    })
}

/// One auxiliary-variable Gibbs step for the masked cells: draw `W` from its
/// posterior given the current completed data, then redraw each masked cell
/// from `N((Z W)_ij, sigma_x^2)`.
pub fn sample_missing<R: Rng + ?Sized>(
    x: &DataMatrix,
    z: &FeatureMatrix,
    np: &NoiseParams,
    rng: &mut R,
) -> Result<DataMatrix> {
    np.validate()?;
    check_shapes(x, z)?;
    let cells = x.missing_cells();
    if cells.is_empty() {
        return Ok(x.clone());
    }
    let cols = active_slices(z);
    let m = x.m();
    let mut out = x.clone();
    if cols.is_empty() {
        for (i, j) in cells {
            out.x[(i, j)] = np.sigma_x * random::standard_normal(rng);
        }
        return Ok(out);
    }
    let k = cols.len();
    let (h, ztx) = gram(&cols, &x.x, np.ridge());
    let chol = factor(h)?;
    let mean = chol.solve(&ztx);
    // W = mean + sigma_x L^{-T} E has row covariance sigma_x^2 H^{-1}
    let e = DMatrix::from_fn(k, m, |_, _| random::standard_normal(rng));
    let v = chol
        .l_dirty()
        .tr_solve_lower_triangular(&e)
        .ok_or_else(|| domain("singular Cholesky factor"))?;
    let w = mean + v * np.sigma_x;
    let zd = dense(x.n(), &cols);
    for (i, j) in cells {
        let fit = zd.row(i).dot(&w.column(j).transpose());
        out.x[(i, j)] = fit + np.sigma_x * random::standard_normal(rng);
    }
    Ok(out)
}

/// Completed data with every masked cell replaced by `E[x_ij | observed, Z]`
/// under the column-wise Gaussian `N(0, sigma_w^2 Z Z' + sigma_x^2 I)`.
pub fn conditional_mean_missing(x: &DataMatrix, z: &FeatureMatrix, np: &NoiseParams) -> Result<DataMatrix> {
    np.validate()?;
    check_shapes(x, z)?;
    let n = x.n();
    let cols = active_slices(z);
    let zd = dense(n, &cols);
    let cov = &zd * zd.transpose() * (np.sigma_w * np.sigma_w)
        + DMatrix::identity(n, n) * (np.sigma_x * np.sigma_x);
    let mut out = x.clone();
    for j in 0..x.m() {
        let miss: Vec<usize> = (0..n).filter(|&i| x.is_missing(i, j)).collect();
        if miss.is_empty() {
            continue;
        }
        let obs: Vec<usize> = (0..n).filter(|&i| !x.is_missing(i, j)).collect();
        if obs.is_empty() {
            for &i in &miss {
                out.x[(i, j)] = 0.0;
            }
            continue;
        }
        let s_oo = DMatrix::from_fn(obs.len(), obs.len(), |a, b| cov[(obs[a], obs[b])]);
        let x_o = DMatrix::from_fn(obs.len(), 1, |a, _| x.x[(obs[a], j)]);
        let sol = factor(s_oo)?.solve(&x_o);
        for &i in &miss {
            out.x[(i, j)] = obs.iter().enumerate().map(|(a, &o)| cov[(i, o)] * sol[a]).sum();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded;
    use proptest::prelude::*;

    /// Independent route: each column of X is N(0, sigma_w^2 Z Z' + sigma_x^2 I).
    fn columnwise(x: &DMatrix<f64>, z: &FeatureMatrix, np: &NoiseParams) -> f64 {
        let n = x.nrows();
        let zd = DMatrix::from_fn(n, z.n_cols(), |i, c| if z.get(i, c) { 1.0 } else { 0.0 });
        let cov = &zd * zd.transpose() * np.sigma_w.powi(2) + DMatrix::identity(n, n) * np.sigma_x.powi(2);
        let det = cov.determinant();
        let inv = cov.try_inverse().unwrap();
        (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let q = (col.transpose() * &inv * col)[(0, 0)];
                -0.5 * (q + det.ln() + n as f64 * LN_2PI)
            })
            .sum()
    }

    fn random_instance(n: usize, m: usize, k: usize, seed: u64) -> (DataMatrix, FeatureMatrix) {
        let mut rng = seeded(seed);
        let x = DMatrix::from_fn(n, m, |_, _| 2.0 * random::standard_normal(&mut rng));
        let cols: Vec<Vec<bool>> = (0..k)
            .map(|_| (0..n).map(|_| rand::Rng::random::<bool>(&mut rng)).collect())
            .collect();
        (DataMatrix::new(x).unwrap(), FeatureMatrix::from_columns(n, &cols))
    }

    #[test]
    fn empty_features_reduce_to_iid_gaussian() {
        let (x, _) = random_instance(4, 3, 0, 1);
        let np = NoiseParams::new(0.7, 1.3).unwrap();
        let z = FeatureMatrix::zeros(4, 0);
        let expected: f64 = x
            .values()
            .iter()
            .map(|v| -v * v / (2.0 * 0.49) - 0.5 * (2.0 * std::f64::consts::PI * 0.49).ln())
            .sum();
        assert!((collapsed_loglik(&x, &z, &np).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn zero_columns_do_not_count() {
        let (x, z) = random_instance(5, 2, 3, 2);
        let np = NoiseParams::default();
        let mut padded = z.clone();
        padded.push_column(&[false; 5]);
        let a = collapsed_loglik(&x, &z, &np).unwrap();
        let b = collapsed_loglik(&x, &padded, &np).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_features_halve_the_data() {
        let (x, _) = random_instance(3, 2, 0, 3);
        let z = FeatureMatrix::from_rows(&[
            vec![true, false, false],
            vec![false, true, false],
            vec![false, false, true],
        ]);
        let post = weight_posterior(&x, &z, &NoiseParams::default()).unwrap();
        assert!((post.mean.clone() - x.values() / 2.0).norm() < 1e-12);
        assert!((post.row_covariance - DMatrix::identity(3, 3) * 0.5).norm() < 1e-12);
    }

    #[test]
    fn vague_prior_mean_is_least_squares() {
        let (x, z) = random_instance(6, 2, 2, 4);
        let np = NoiseParams::new(1.0, 1e6).unwrap();
        let post = weight_posterior(&x, &z, &np).unwrap();
        let zd = DMatrix::from_fn(6, 2, |i, c| if z.get(i, c) { 1.0 } else { 0.0 });
        let ls = (zd.transpose() * &zd).try_inverse().unwrap() * zd.transpose() * x.values();
        assert!((post.mean - ls).norm() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let np = NoiseParams::default();
        let (x, _) = random_instance(3, 2, 0, 5);
        assert!(collapsed_loglik(&x, &FeatureMatrix::zeros(4, 1), &np).is_err());
        assert!(NoiseParams::new(0.0, 1.0).is_err());
        assert!(DataMatrix::new(DMatrix::from_element(2, 2, f64::NAN)).is_err());
    }

    #[test]
    fn missing_untouched_when_mask_empty() {
        let (x, z) = random_instance(4, 2, 2, 6);
        let mut rng = seeded(0);
        assert_eq!(sample_missing(&x, &z, &NoiseParams::default(), &mut rng).unwrap(), x);
    }

    #[test]
    fn imputations_without_features_are_noise() {
        let rows: Vec<Vec<Option<f64>>> = vec![vec![None, Some(5.0)], vec![Some(5.0), Some(5.0)]];
        let x = DataMatrix::from_rows(&rows).unwrap();
        let z = FeatureMatrix::zeros(2, 0);
        let np = NoiseParams::new(0.5, 1.0).unwrap();
        let mut rng = seeded(9);
        let draws: Vec<f64> = (0..50_000)
            .map(|_| sample_missing(&x, &z, &np, &mut rng).unwrap().values()[(0, 0)])
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 4.0 * 0.5 / (draws.len() as f64).sqrt());
        assert!((var / 0.25 - 1.0).abs() < 0.03);
    }

    #[test]
    fn conditional_mean_matches_gaussian_conditioning() {
        // with the only masked cell in column 0, compare against direct
        // conditioning on the full covariance
        let (full, z) = random_instance(4, 2, 2, 7);
        let mut mask = vec![false; 8];
        mask[2 * 2] = true;
        let x = DataMatrix::with_mask(full.values().clone(), mask).unwrap();
        let np = NoiseParams::new(0.6, 1.1).unwrap();
        let cm = conditional_mean_missing(&x, &z, &np).unwrap();
        let zd = DMatrix::from_fn(4, 2, |i, c| if z.get(i, c) { 1.0 } else { 0.0 });
        let cov = &zd * zd.transpose() * 1.21 + DMatrix::identity(4, 4) * 0.36;
        let prec = cov.try_inverse().unwrap();
        // E[x_2 | rest] = -(1/P_22) sum_{o != 2} P_2o x_o
        let expected: f64 = -(0..4)
            .filter(|&o| o != 2)
            .map(|o| prec[(2, o)] * full.values()[(o, 0)])
            .sum::<f64>()
            / prec[(2, 2)];
        assert!((cm.values()[(2, 0)] - expected).abs() < 1e-10);
        assert_eq!(cm.values()[(1, 1)], full.values()[(1, 1)]);
    }

    proptest! {
        #[test]
        fn matches_columnwise_gaussian(
            n in 1usize..=6, m in 1usize..=3, k in 0usize..=4, seed in 0u64..10_000,
            sx in 0.2..3.0f64, sw in 0.2..3.0f64,
        ) {
            let (x, z) = random_instance(n, m, k, seed);
            let np = NoiseParams::new(sx, sw).unwrap();
            let a = collapsed_loglik(&x, &z, &np).unwrap();
            let b = columnwise(x.values(), &z, &np);
            prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
        }

        #[test]
        fn column_order_is_irrelevant(seed in 0u64..10_000) {
            let (x, z) = random_instance(5, 2, 4, seed);
            let np = NoiseParams::new(0.8, 1.4).unwrap();
            let a = collapsed_loglik(&x, &z, &np).unwrap();
            let b = collapsed_loglik(&x, &z.permute_columns(&[2, 0, 3, 1]), &np).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn gram_cache_tracks_column_swaps(seed in 0u64..10_000, k in 0usize..4, bits in 0u32..64) {
            let (x, mut z) = random_instance(6, 2, 4, seed);
            let np = NoiseParams::new(0.7, 1.3).unwrap();
            let col: Vec<bool> = (0..6).map(|i| bits >> i & 1 == 1).collect();
            let mut cache = GramCache::new(x.values(), &z);
            let swapped = cache.loglik_swapped(x.values(), &z, k, &col, &np).unwrap();
            cache.set_column(x.values(), &z, k, &col);
            z.column_mut(k).copy_from_slice(&col);
            let fresh = collapsed_loglik(&x, &z, &np).unwrap();
            prop_assert!((swapped - fresh).abs() < 1e-9, "{} vs {}", swapped, fresh);
            prop_assert_eq!(&cache.ztz, &GramCache::new(x.values(), &z).ztz);
        }
    }
}
