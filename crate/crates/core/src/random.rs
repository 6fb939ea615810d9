//! Random variate helpers shared by the samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Mean below which Poisson variates are drawn by sequential inversion.
const INVERSION_CUTOFF: f64 = 30.0;

pub type ChainRng = ChaCha8Rng;

/// Deterministic generator for `seed`.
pub fn seeded(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `seed`, so parallel draws reproduce
/// regardless of scheduling.
pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    debug_assert!(mean >= 0.0 && mean.is_finite());
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_CUTOFF {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            // Round-off can leave cdf a hair below 1.
            if p < 1e-300 && k as f64 > mean {
                break;
            }
        }
        k
    } else {
        rand_distr::Poisson::new(mean)
            .expect("finite positive mean")
            .sample(rng) as u64
    }
}

/// Gamma variate with the given shape and rate (inverse scale).
pub fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
}

/// `ln G` for `G ~ Gamma(shape, 1)`, usable for shapes far below 1 where
/// `G` itself underflows.
fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        return gamma(shape, 1.0, rng).ln();
    }
    // G(a) = G(a + 1) U^(1/a)
    let boosted = gamma(shape + 1.0, 1.0, rng).ln();
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    boosted + u.ln() / shape
}

/// Beta variate that stays well defined for vanishing shape parameters.
pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    if b <= 0.0 {
        return 1.0;
    }
    let la = ln_gamma_variate(a, rng);
    let lb = ln_gamma_variate(b, rng);
    // x = 1 / (1 + exp(lb - la))
    let diff = lb - la;
    if diff > 700.0 {
        0.0
    } else if diff < -700.0 {
        1.0
    } else {
        1.0 / (1.0 + diff.exp())
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Index drawn proportionally to `weights` (not necessarily normalized).
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn poisson_moments_both_regimes() {
        let mut rng = seeded(7);
        for &mean in &[0.3, 4.0, 29.5, 30.0, 120.0] {
            let xs: Vec<f64> = (0..100_000).map(|_| poisson(mean, &mut rng) as f64).collect();
            let (m, v) = moments(&xs);
            let se = (mean / xs.len() as f64).sqrt();
            assert!((m - mean).abs() < 4.0 * se, "mean {m} vs {mean}");
            assert!((v / mean - 1.0).abs() < 0.03, "variance {v} vs {mean}");
        }
    }

    #[test]
    fn poisson_is_deterministic_per_seed() {
        let a: Vec<u64> = {
            let mut r = seeded(3);
            (0..50).map(|_| poisson(2.5, &mut r)).collect()
        };
        let b: Vec<u64> = {
            let mut r = seeded(3);
            (0..50).map(|_| poisson(2.5, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn beta_small_shapes() {
        let mut rng = seeded(11);
        let n = 200_000;
        let (a, b) = (0.05, 9.95);
        let xs: Vec<f64> = (0..n).map(|_| beta(a, b, &mut rng)).collect();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        let (m, _) = moments(&xs);
        let mean = a / (a + b);
        let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
        assert!((m - mean).abs() < 4.0 * (var / n as f64).sqrt());
        assert_eq!(beta(1e-320, 1.0, &mut rng), 0.0);
    }

    #[test]
    fn streams_differ() {
        let x: u64 = stream(1, 0).random();
        let y: u64 = stream(1, 1).random();
        assert_ne!(x, y);
        let z: u64 = stream(1, 0).random();
        assert_eq!(x, z);
    }
}
