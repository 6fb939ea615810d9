use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ProximityMatrix;
use crate::theory::parallel_draws;

/// Largest single-dish configuration space `reach_probs_exact` will sum over.
pub const ENUMERATION_LIMIT: u128 = 823_543; // 7^7

/// Activation and co-activation probabilities of one dish.
///
/// `p_single[i][n]` is the probability that customer `i` reaches `n` in a
/// single dish's connection graph; `p_pair[i][j][n]` that both `i` and `j`
/// reach `n`. Neither depends on who owns the dish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachProbs {
    pub p_single: Vec<Vec<f64>>,
    pub p_pair: Vec<Vec<Vec<f64>>>,
}

impl ReachProbs {
    pub fn n(&self) -> usize {
        self.p_single.len()
    }

    fn from_sums(n: usize, single: Vec<f64>, pair: Vec<f64>, total: f64) -> Self {
        let p_single: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|m| single[i * n + m] / total).collect())
            .collect();
        let mut p_pair = vec![vec![vec![0.0; n]; n]; n];
        for i in 0..n {
            p_pair[i][i] = p_single[i].clone();
            for j in i + 1..n {
                for m in 0..n {
                    let v = pair[(i * n + j) * n + m] / total;
                    p_pair[i][j][m] = v;
                    p_pair[j][i][m] = v;
                }
            }
        }
        Self { p_single, p_pair }
    }
}

/// Monte-Carlo estimate of [`ReachProbs`] together with its draw count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachEstimate {
    pub probs: ReachProbs,
    pub draws: usize,
}

impl ReachEstimate {
    /// Binomial standard error of an estimated probability `p`.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.draws as f64).sqrt()
    }
}

/// Bitmask of the customers on the forward path from each customer, i.e.
/// `masks[i] >> n & 1 == L_in`.
fn forward_masks(links: &[usize], masks: &mut [u64]) {
    let n = links.len();
    for i in 0..n {
        let mut mask = 1u64 << i;
        let mut v = i;
        loop {
            let t = links[v];
            if t == v || mask >> t & 1 == 1 {
                break;
            }
            mask |= 1u64 << t;
            v = t;
        }
        masks[i] = mask;
    }
}

fn accumulate(masks: &[u64], w: f64, single: &mut [f64], pair: &mut [f64]) {
    let n = masks.len();
    for i in 0..n {
        let mut bits = masks[i];
        while bits != 0 {
            let m = bits.trailing_zeros() as usize;
            single[i * n + m] += w;
            bits &= bits - 1;
        }
        for j in i + 1..n {
            let mut bits = masks[i] & masks[j];
            while bits != 0 {
                let m = bits.trailing_zeros() as usize;
                pair[(i * n + j) * n + m] += w;
                bits &= bits - 1;
            }
        }
    }
}

/// Exact probabilities by summing `prod_m a[m][c_m]` over every connection
/// configuration of one dish. Refuses when the configuration count (the
/// product of the row support sizes) exceeds [`ENUMERATION_LIMIT`].
pub fn reach_probs_exact(a: &ProximityMatrix) -> Result<ReachProbs> {
    let n = a.n();
    let supports: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            a.row(i)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(j, &p)| (j, p))
                .collect()
        })
        .collect();
    let configurations = supports
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    if configurations > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            configurations,
            limit: ENUMERATION_LIMIT,
        });
    }
    let total = configurations as usize;
    let chunk = 4096;
    let (single, pair) = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut single = vec![0.0; n * n];
            let mut pair = vec![0.0; n * n * n];
            let mut masks = vec![0u64; n];
            let mut links = vec![0usize; n];
            let mut digits = vec![0usize; n];
            let mut rem = c * chunk;
            for (d, s) in digits.iter_mut().zip(&supports) {
                *d = rem % s.len();
                rem /= s.len();
            }
            for _ in c * chunk..((c + 1) * chunk).min(total) {
                let mut w = 1.0;
                for m in 0..n {
                    let (t, p) = supports[m][digits[m]];
                    links[m] = t;
                    w *= p;
                }
                forward_masks(&links, &mut masks);
                accumulate(&masks, w, &mut single, &mut pair);
                // mixed-radix increment
                for (d, s) in digits.iter_mut().zip(&supports) {
                    *d += 1;
                    if *d < s.len() {
                        break;
                    }
                    *d = 0;
                }
            }
            (single, pair)
        })
        .reduce(
            || (vec![0.0; n * n], vec![0.0; n * n * n]),
            |mut x, y| {
                x.0.iter_mut().zip(&y.0).for_each(|(a, b)| *a += b);
                x.1.iter_mut().zip(&y.1).for_each(|(a, b)| *a += b);
                x
            },
        );
    Ok(ReachProbs::from_sums(n, single, pair, 1.0))
}

/// Monte-Carlo estimate from `draws` independent connection graphs.
pub fn reach_probs_mc(a: &ProximityMatrix, draws: usize, seed: u64) -> Result<ReachEstimate> {
    let n = a.n();
    if n > 64 {
        return Err(Error::Dimension(format!("Monte-Carlo reachability supports at most 64 customers, got {n}")));
    }
    if draws == 0 {
        return Err(crate::error::domain("at least one draw is required"));
    }
    let batch = 10_000;
    let parts = parallel_draws(draws.div_ceil(batch), seed, |b, rng| {
        let mut single = vec![0.0; n * n];
        let mut pair = vec![0.0; n * n * n];
        let mut masks = vec![0u64; n];
        let mut links = vec![0usize; n];
        for _ in b * batch..((b + 1) * batch).min(draws) {
            for (m, l) in links.iter_mut().enumerate() {
                *l = a.sample_target(m, rng);
            }
            forward_masks(&links, &mut masks);
            accumulate(&masks, 1.0, &mut single, &mut pair);
        }
        (single, pair)
    });
    let mut single = vec![0.0; n * n];
    let mut pair = vec![0.0; n * n * n];
    for (s, p) in parts {
        single.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        pair.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
    }
    Ok(ReachEstimate {
        probs: ReachProbs::from_sums(n, single, pair, draws as f64),
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::mark_reachers;
    use crate::geometry::{DecayFunction, DistanceMatrix};

    fn seq(n: usize, f: DecayFunction) -> ProximityMatrix {
        ProximityMatrix::build(&DistanceMatrix::sequential_index(n), &f).unwrap()
    }

    #[test]
    fn two_customers_sequential() {
        let a = seq(2, DecayFunction::Exponential { beta: 0.5 });
        let p = reach_probs_exact(&a).unwrap();
        assert!((p.p_single[1][0] - a.a(1, 0)).abs() < 1e-15);
        assert_eq!(p.p_single[0][1], 0.0);
        assert_eq!(p.p_single[0][0], 1.0);
    }

    #[test]
    fn identity_reaches_only_self() {
        let p = reach_probs_exact(&ProximityMatrix::identity(4)).unwrap();
        for i in 0..4 {
            for m in 0..4 {
                assert_eq!(p.p_single[i][m], f64::from(u8::from(i == m)));
            }
        }
    }

    #[test]
    fn constant_sequential_matches_ibp_popularity() {
        // an IBP dish first served to customer 0 is taken by each later
        // customer with probability 1/2
        let a = seq(3, DecayFunction::Constant);
        let p = reach_probs_exact(&a).unwrap();
        assert!((p.p_single[1][0] - 0.5).abs() < 1e-12);
        assert!((p.p_single[2][0] - 0.5).abs() < 1e-12);
        assert!((p.p_single[2][1] - 1.0 / 3.0).abs() < 1e-12);
        let mc = reach_probs_mc(&a, 1_000_000, 3).unwrap();
        for i in 0..3 {
            for m in 0..3 {
                let q = p.p_single[i][m];
                assert!((mc.probs.p_single[i][m] - q).abs() <= 4.0 * mc.standard_error(q) + 1e-12);
            }
        }
    }

    #[test]
    fn agrees_with_reverse_search() {
        let times = [0.0, 0.4, 1.1, 1.5, 3.0];
        let a = ProximityMatrix::build(
            &DistanceMatrix::absolute_difference(&times).unwrap(),
            &DecayFunction::Exponential { beta: 0.8 },
        )
        .unwrap();
        let p = reach_probs_exact(&a).unwrap();
        // brute force with the reverse search used for Z
        let n = 5;
        let mut single = vec![vec![0.0; n]; n];
        let mut links = vec![0; n];
        let mut out = vec![false; n];
        for code in 0..n.pow(n as u32) {
            let mut rem = code;
            let mut w = 1.0;
            for (m, l) in links.iter_mut().enumerate() {
                *l = rem % n;
                rem /= n;
                w *= a.a(m, *l);
            }
            for t in 0..n {
                mark_reachers(&links, t, &[], &mut out);
                for i in 0..n {
                    if out[i] {
                        single[i][t] += w;
                    }
                }
            }
        }
        for i in 0..n {
            for m in 0..n {
                assert!((single[i][m] - p.p_single[i][m]).abs() < 1e-12);
                for j in 0..n {
                    assert!(p.p_pair[i][j][m] <= p.p_single[i][m].min(p.p_single[j][m]) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn refuses_large_support() {
        let times: Vec<f64> = (0..8).map(f64::from).collect();
        let a = ProximityMatrix::build(
            &DistanceMatrix::absolute_difference(&times).unwrap(),
            &DecayFunction::Constant,
        )
        .unwrap();
        assert!(matches!(reach_probs_exact(&a), Err(Error::TooLarge { .. })));
        // sequential N = 8 has only 8! configurations
        assert!(reach_probs_exact(&seq(8, DecayFunction::Constant)).is_ok());
    }

    #[test]
    fn mc_matches_exact_within_four_se() {
        let times = [0.0, 0.3, 0.9, 2.0];
        let a = ProximityMatrix::build(
            &DistanceMatrix::absolute_difference(&times).unwrap(),
            &DecayFunction::Exponential { beta: 1.0 },
        )
        .unwrap();
        let exact = reach_probs_exact(&a).unwrap();
        let mc = reach_probs_mc(&a, 1_000_000, 9).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for m in 0..4 {
                    let q = exact.p_pair[i][j][m];
                    let se = mc.standard_error(q).max(1e-12);
                    assert!((mc.probs.p_pair[i][j][m] - q).abs() <= 4.0 * se, "{i} {j} {m}");
                }
            }
        }
    }
}
