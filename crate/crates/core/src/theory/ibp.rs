use rand::Rng;

use crate::error::{domain, Result};
use crate::features::FeatureMatrix;
use crate::random::poisson;

/// Direct sequential IBP draw: customer `i` (1-based) takes each existing
/// dish with probability `m_k / i`, then `Poisson(alpha / i)` new ones.
pub fn ibp_baseline_sample<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Result<FeatureMatrix> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(domain(format!("alpha must be positive, got {alpha}")));
    }
    let mut columns: Vec<Vec<bool>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..n {
        let seen = (i + 1) as f64;
        for (col, m) in columns.iter_mut().zip(counts.iter_mut()) {
            if rng.random::<f64>() < *m as f64 / seen {
                col[i] = true;
                *m += 1;
            }
        }
        for _ in 0..poisson(alpha / seen, rng) {
            let mut col = vec![false; n];
            col[i] = true;
            columns.push(col);
            counts.push(1);
        }
    }
    Ok(FeatureMatrix::from_columns(n, &columns))
}
