//! Small statistics toolkit used by the verification checks: moments,
//! standard errors, goodness-of-fit tests and trend tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::prior::ln_poisson;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean of independent draws.
pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the sample variance of independent draws,
/// `sqrt((m4 - s^4 (n - 3)/(n - 1)) / n)`.
pub fn variance_standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let s2 = variance(xs);
    ((m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Standard error of the mean of an autocorrelated series by
/// non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    assert!(size >= 2, "series too short for {batches} batches");
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    standard_error(&means)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson chi-squared test of integer counts against a pmf on `0, 1, ...`.
/// Bins are merged from the right until every expected count is at least 5.
pub fn chi_square_discrete(samples: &[u64], pmf: impl Fn(u64) -> f64) -> TestOutcome {
    let n = samples.len() as f64;
    let max = samples.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0.0; max as usize + 1];
    for &s in samples {
        observed[s as usize] += 1.0;
    }
    // expected mass of each value, the last bin absorbing the upper tail
    let mut expected: Vec<f64> = (0..=max).map(|k| n * pmf(k)).collect();
    let listed: f64 = expected.iter().sum();
    *expected.last_mut().unwrap() += (n - listed).max(0.0);

    let mut obs_bins = Vec::new();
    let mut exp_bins = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, e) in observed.iter().zip(&expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            obs_bins.push(o_acc);
            exp_bins.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match exp_bins.last_mut() {
            Some(last) => {
                *last += e_acc;
                *obs_bins.last_mut().unwrap() += o_acc;
            }
            None => {
                obs_bins.push(o_acc);
                exp_bins.push(e_acc);
            }
        }
    }
    let statistic: f64 = obs_bins
        .iter()
        .zip(&exp_bins)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let df = obs_bins.len().saturating_sub(1).max(1) as f64;
    let p_value = 1.0 - ChiSquared::new(df).expect("positive df").cdf(statistic);
    TestOutcome { statistic, p_value }
}

pub fn chi_square_poisson(samples: &[u64], rate: f64) -> TestOutcome {
    chi_square_discrete(samples, |k| ln_poisson(k, rate).exp())
}

/// Asymptotic Kolmogorov survival function with the small-sample shift
/// `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) D`.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        total += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous cdf.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestOutcome {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    TestOutcome {
        statistic: d,
        p_value: kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d),
    }
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").cdf(x)
}

/// Least-squares slope of `ys` against their index, with a standard error
/// inflated for lag-one autocorrelation of the residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendTest {
    pub slope: f64,
    pub standard_error: f64,
    pub lag1_autocorrelation: f64,
    pub t: f64,
    pub p_value: f64,
}

pub fn trend_test(ys: &[f64]) -> TrendTest {
    let n = ys.len() as f64;
    let ts: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    let tm = mean(&ts);
    let ym = mean(ys);
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let resid: Vec<f64> = ts.iter().zip(ys).map(|(t, y)| y - ym - slope * (t - tm)).collect();
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let num: f64 = resid.windows(2).map(|w| w[0] * w[1]).sum();
    let rho = if rss > 0.0 { (num / rss).clamp(-0.99, 0.99) } else { 0.0 };
    let se_ols = (rss / (n - 2.0) / sxx).sqrt();
    let se = se_ols * ((1.0 + rho) / (1.0 - rho)).max(1.0).sqrt();
    let t = if se > 0.0 { slope / se } else { 0.0 };
    let p_value = 2.0 * (1.0 - normal_cdf(t.abs(), 0.0, 1.0));
    TrendTest {
        slope,
        standard_error: se,
        lag1_autocorrelation: rho,
        t,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{poisson, seeded, standard_normal};

    #[test]
    fn poisson_samples_pass_their_own_test() {
        let mut rng = seeded(1);
        let xs: Vec<u64> = (0..50_000).map(|_| poisson(3.2, &mut rng)).collect();
        assert!(chi_square_poisson(&xs, 3.2).p_value > 0.01);
        assert!(chi_square_poisson(&xs, 3.5).p_value < 1e-6);
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = seeded(2);
        let xs: Vec<f64> = (0..20_000).map(|_| standard_normal(&mut rng)).collect();
        assert!(ks_test(&xs, |x| normal_cdf(x, 0.0, 1.0)).p_value > 0.01);
        assert!(ks_test(&xs, |x| normal_cdf(x, 0.1, 1.0)).p_value < 1e-6);
    }

    #[test]
    fn trend_on_flat_and_sloped_series() {
        let mut rng = seeded(3);
        let flat: Vec<f64> = (0..500).map(|_| standard_normal(&mut rng)).collect();
        assert!(trend_test(&flat).p_value > 0.01);
        let sloped: Vec<f64> = flat.iter().enumerate().map(|(i, y)| y + 0.05 * i as f64).collect();
        assert!(trend_test(&sloped).p_value < 1e-6);
    }

    #[test]
    fn variance_se_for_gaussian() {
        let mut rng = seeded(4);
        let xs: Vec<f64> = (0..100_000).map(|_| standard_normal(&mut rng)).collect();
        // Var(s^2) = 2 sigma^4 / (n - 1) for normal data
        let expected = (2.0 / 99_999.0f64).sqrt();
        assert!((variance_standard_error(&xs) / expected - 1.0).abs() < 0.05);
    }
}
