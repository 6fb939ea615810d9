use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::ProximityMatrix;
use crate::theory::dhbp::{sample_dhbp, DhbpParams};
use crate::theory::parallel_draws;
use crate::theory::reach::reach_probs_exact;
use crate::theory::sharing::{ddibp_sharing_rates, sharing_stats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SweepModel {
    Ddibp,
    Dhbp { c0: f64, c1: f64, k_trunc: usize },
}

/// Two customers where the second sees the first with weight `a = 1/d`
/// against its own weight 1, and the first sees only itself. Both models
/// then have `E[R_i]` equal to the mass.
pub fn two_point_proximity(a: f64) -> Result<ProximityMatrix> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(domain(format!("proximity must be finite and nonnegative, got {a}")));
    }
    ProximityMatrix::from_weights(vec![vec![1.0, 0.0], vec![a, 1.0]])
}

/// PMF of `R_12` at each grid point; `pmf[g][r] = P(R_12 = r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfTable {
    pub model: SweepModel,
    pub mass: f64,
    pub grid: Vec<f64>,
    pub pmf: Vec<Vec<f64>>,
    /// `E[R_2]` at each grid point (exact for the dd-IBP, empirical otherwise).
    pub mean_r: Vec<f64>,
}

fn poisson_pmf(rate: f64, tol: f64) -> Vec<f64> {
    let mut out = vec![(-rate).exp()];
    let mut cdf = out[0];
    let mut k = 0.0;
    while 1.0 - cdf > tol || k < rate {
        k += 1.0;
        let p = out.last().unwrap() * rate / k;
        out.push(p);
        cdf += p;
    }
    out
}

/// Distribution of the number of shared features of two customers along a
/// proximity grid. The dd-IBP table is exact (Poisson with the enumerated
/// rate); the dHBP table is estimated from `draws` samples per point.
pub fn sharing_pmf_sweep(model: &SweepModel, grid: &[f64], mass: f64, draws: usize, seed: u64) -> Result<PmfTable> {
    let mut pmf = Vec::with_capacity(grid.len());
    let mut mean_r = Vec::with_capacity(grid.len());
    for (g, &a) in grid.iter().enumerate() {
        let prox = two_point_proximity(a)?;
        match *model {
            SweepModel::Ddibp => {
                let rates = ddibp_sharing_rates(&prox, mass, &reach_probs_exact(&prox)?);
                pmf.push(poisson_pmf(rates.rate_ij[0][1], 1e-12));
                mean_r.push(rates.rate_i[1]);
            }
            SweepModel::Dhbp { c0, c1, k_trunc } => {
                if draws == 0 {
                    return Err(domain("the dHBP sweep needs at least one draw"));
                }
                let params = DhbpParams::new(mass, c0, c1, k_trunc, prox)?;
                let sub = seed.wrapping_add((g as u64) << 32);
                let stats = parallel_draws(draws, sub, |_, rng| sharing_stats(&sample_dhbp(&params, rng)));
                let max = stats.iter().map(|s| s.r_pair[0][1]).max().unwrap_or(0) as usize;
                let mut counts = vec![0.0; max + 1];
                for s in &stats {
                    counts[s.r_pair[0][1] as usize] += 1.0 / draws as f64;
                }
                pmf.push(counts);
                mean_r.push(stats.iter().map(|s| s.r[1] as f64).sum::<f64>() / draws as f64);
            }
        }
    }
    let width = pmf.iter().map(Vec::len).max().unwrap_or(0);
    for row in &mut pmf {
        row.resize(width, 0.0);
    }
    Ok(PmfTable {
        model: *model,
        mass,
        grid: grid.to_vec(),
        pmf,
        mean_r,
    })
}
