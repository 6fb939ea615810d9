use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::features::FeatureMatrix;
use crate::geometry::ProximityMatrix;
use crate::random::beta;

/// Default number of atoms kept by the finite beta approximation.
pub const DEFAULT_K_TRUNC: usize = 2000;

/// Truncated dependent hierarchical beta process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhbpParams {
    pub gamma: f64,
    pub c0: f64,
    pub c1: f64,
    pub k_trunc: usize,
    pub proximity: ProximityMatrix,
}

impl DhbpParams {
    pub fn new(gamma: f64, c0: f64, c1: f64, k_trunc: usize, proximity: ProximityMatrix) -> Result<Self> {
        let p = Self {
            gamma,
            c0,
            c1,
            k_trunc,
            proximity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(domain(format!("mass must be positive, got {}", self.gamma)));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite() && self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(domain("concentrations must be positive and finite"));
        }
        if self.k_trunc == 0 {
            return Err(domain("truncation level must be at least 1"));
        }
        if self.gamma >= self.k_trunc as f64 {
            return Err(domain(format!(
                "mass {} must stay below the truncation level {}",
                self.gamma, self.k_trunc
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.proximity.n()
    }
}

/// One dHBP draw with the group label of every customer.
#[derive(Debug, Clone, PartialEq)]
pub struct DhbpDraw {
    pub z: FeatureMatrix,
    pub groups: Vec<usize>,
}

/// `p_k ~ Beta(c0 gamma / K, c0 (1 - gamma / K))`,
/// `p*_jk ~ Beta(c1 p_k, c1 (1 - p_k))`, `g_i ~ a_i`,
/// `z_ik ~ Bernoulli(p*_{g_i k})`. Only columns with a holder are kept.
pub fn sample_dhbp_grouped<R: Rng + ?Sized>(params: &DhbpParams, rng: &mut R) -> DhbpDraw {
    let n = params.n();
    let k = params.k_trunc;
    let shape = params.c0 * params.gamma / k as f64;
    let top: Vec<f64> = (0..k).map(|_| beta(shape, params.c0 - shape, rng)).collect();
    let groups: Vec<usize> = (0..n).map(|i| params.proximity.sample_target(i, rng)).collect();
    let mut used: Vec<usize> = groups.clone();
    used.sort_unstable();
    used.dedup();
    let mut z = FeatureMatrix::zeros(n, 0);
    let mut local = vec![0.0; n];
    let mut col = vec![false; n];
    for &p in &top {
        for &g in &used {
            local[g] = beta(params.c1 * p, params.c1 * (1.0 - p), rng);
        }
        let mut any = false;
        for (i, c) in col.iter_mut().enumerate() {
            *c = rng.random::<f64>() < local[groups[i]];
            any |= *c;
        }
        if any {
            z.push_column(&col);
        }
    }
    DhbpDraw { z, groups }
}

pub fn sample_dhbp<R: Rng + ?Sized>(params: &DhbpParams, rng: &mut R) -> FeatureMatrix {
    sample_dhbp_grouped(params, rng).z
}

/// Limiting values of `R_ij / R_i` for customers in the same and in
/// different groups.
pub fn dhbp_limit_fractions(c0: f64, c1: f64) -> Result<(f64, f64)> {
    if !(c0 > 0.0 && c1 > 0.0) {
        return Err(domain("concentrations must be positive"));
    }
    let same = (c0 + c1 + 1.0) / ((c0 + 1.0) * (c1 + 1.0));
    let diff = 1.0 / (c0 + 1.0);
    Ok((same, diff))
}

/// Ratio `E[R_ij] / E[R_i]` under the finite approximation, for customers
/// in the same and in different groups. Approaches
/// [`dhbp_limit_fractions`] only when `c0 gamma / K` is small.
pub fn dhbp_truncated_fractions(params: &DhbpParams) -> (f64, f64) {
    let shape = params.c0 * params.gamma / params.k_trunc as f64;
    // E[p^2] / E[p] for p ~ Beta(shape, c0 - shape)
    let diff = (shape + 1.0) / (params.c0 + 1.0);
    let same = (params.c1 * diff + 1.0) / (params.c1 + 1.0);
    (same, diff)
}

/// `P(g_i = g_j) = sum_n a_in a_jn`.
pub fn same_group_probability(a: &ProximityMatrix, i: usize, j: usize) -> f64 {
    a.row(i).iter().zip(a.row(j)).map(|(x, y)| x * y).sum()
}
