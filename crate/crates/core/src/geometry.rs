//! Distances between customers, decay functions and the normalized
//! proximity matrix they induce.
//!
//! Infinite distances are stored as `f64::INFINITY` and are always matched
//! explicitly before any decay formula is applied, so `exp`/`ln` never see
//! them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Square matrix of nonnegative (possibly infinite) distances with a zero
/// diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut d = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "distance row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            d.extend(row);
        }
        Self::from_flat(n, d)
    }

    pub fn from_flat(n: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} distance entries, got {}",
                n * n,
                d.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = d[i * n + j];
                if v.is_nan() || v < 0.0 {
                    return Err(domain(format!("distance d[{i}][{j}] = {v} is not >= 0")));
                }
                if i == j && v != 0.0 {
                    return Err(domain(format!("self-distance d[{i}][{i}] = {v} must be 0")));
                }
            }
        }
        Ok(Self { n, d })
    }

    /// `d[i][j] = |t_i - t_j|` for all pairs.
    pub fn absolute_difference(covariate: &[f64]) -> Result<Self> {
        let n = covariate.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = (covariate[i] - covariate[j]).abs();
            }
        }
        Self::from_flat(n, d)
    }

    /// Like [`absolute_difference`](Self::absolute_difference) but with
    /// `d[i][j] = inf` for `j > i`, so customers only link to earlier ones.
    pub fn sequential_absolute_difference(covariate: &[f64]) -> Result<Self> {
        let n = covariate.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = if j > i {
                    f64::INFINITY
                } else {
                    (covariate[i] - covariate[j]).abs()
                };
            }
        }
        Self::from_flat(n, d)
    }

    /// `d[i][j] = i - j` below the diagonal, infinite above.
    pub fn sequential_index(n: usize) -> Self {
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Self::sequential_absolute_difference(&times).expect("index distances are valid")
    }

    /// Every off-diagonal entry infinite.
    pub fn disconnected(n: usize) -> Self {
        let mut d = vec![f64::INFINITY; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
        }
        Self { n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn is_sequential(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j).is_infinite()))
    }

    /// Rows and columns relabelled so that customer `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let n = self.n;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[perm[i] * n + perm[j]] = self.get(i, j);
            }
        }
        Ok(Self { n, d })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.d.chunks(self.n.max(1)).map(|r| r.to_vec()).take(self.n).collect()
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(domain(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(domain(format!("{perm:?} is not a bijection on 0..{n}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Maps a distance to an unnormalized proximity in `[0, 1]`.
///
/// Every kind satisfies `f(0) = 1` and `f(inf) = 0`. For the logistic kind
/// the formula `1 / (1 + exp(beta d - nu))` is used for `d > 0` while the
/// self-distance is pinned to 1, which keeps the function nonincreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DecayFunction {
    Constant,
    Exponential { beta: f64 },
    Logistic { beta: f64, nu: f64 },
    Window { nu: f64 },
}

impl DecayFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DecayFunction::Constant => Ok(()),
            DecayFunction::Exponential { beta } if beta >= 0.0 && beta.is_finite() => Ok(()),
            DecayFunction::Logistic { beta, nu } if beta >= 0.0 && beta.is_finite() && nu.is_finite() => {
                Ok(())
            }
            DecayFunction::Window { nu } if nu > 0.0 => Ok(()),
            other => Err(domain(format!("invalid decay parameters {other:?}"))),
        }
    }

    pub fn eval(&self, d: f64) -> Result<f64> {
        if d.is_nan() || d < 0.0 {
            return Err(domain(format!("decay evaluated at invalid distance {d}")));
        }
        if d == 0.0 {
            return Ok(1.0);
        }
        if d.is_infinite() {
            return Ok(0.0);
        }
        Ok(match *self {
            DecayFunction::Constant => 1.0,
            DecayFunction::Exponential { beta } => (-beta * d).exp(),
            DecayFunction::Logistic { beta, nu } => 1.0 / (1.0 + (beta * d - nu).exp()),
            DecayFunction::Window { nu } => {
                if d < nu {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

/// `decay_eval` as a free function.
pub fn decay_eval(f: &DecayFunction, d: f64) -> Result<f64> {
    f.eval(d)
}

/// Row-stochastic matrix `a[i][j] = f(d[i][j]) / h[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityMatrix {
    n: usize,
    a: Vec<f64>,
    h: Vec<f64>,
}

impl ProximityMatrix {
    pub fn build(d: &DistanceMatrix, f: &DecayFunction) -> Result<Self> {
        f.validate()?;
        let n = d.n();
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                w[i * n + j] = f.eval(d.get(i, j))?;
            }
        }
        Self::from_flat_weights(n, w)
    }

    /// Normalizes an arbitrary nonnegative weight matrix row by row. The
    /// diagonal must be positive so every normalizer is too.
    pub fn from_weights(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut w = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension("weight matrix is not square".into()));
            }
            w.extend(row);
        }
        Self::from_flat_weights(n, w)
    }

    fn from_flat_weights(n: usize, mut w: Vec<f64>) -> Result<Self> {
        let mut h = vec![0.0; n];
        for i in 0..n {
            let row = &mut w[i * n..(i + 1) * n];
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(domain(format!("proximity row {i} has invalid weights")));
            }
            if row[i] <= 0.0 {
                return Err(domain(format!("self-proximity of customer {i} must be positive")));
            }
            let total: f64 = row.iter().sum();
            h[i] = total;
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Ok(Self { n, a: w, h })
    }

    pub fn identity(n: usize) -> Self {
        Self::build(&DistanceMatrix::disconnected(n), &DecayFunction::Constant)
            .expect("identity proximity is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// `sum_i 1 / h_i`, the total rate of new dishes per unit of `alpha`.
    pub fn inverse_h_sum(&self) -> f64 {
        self.h.iter().map(|h| 1.0 / h).sum()
    }

    /// Number of targets customer `i` can link to.
    pub fn support_size(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&v| v > 0.0).count()
    }

    /// Draws a link target for customer `i`.
    pub fn sample_target<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        let row = self.row(i);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = i;
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = j;
                if u < acc {
                    return j;
                }
            }
        }
        last
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

pub fn build_proximity(d: &DistanceMatrix, f: &DecayFunction) -> Result<ProximityMatrix> {
    ProximityMatrix::build(d, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decay_examples() {
        let exp = DecayFunction::Exponential { beta: 1.0 };
        assert_eq!(exp.eval(0.0).unwrap(), 1.0);
        let win = DecayFunction::Window { nu: 2.0 };
        assert_eq!(win.eval(3.0).unwrap(), 0.0);
        assert_eq!(win.eval(1.0).unwrap(), 1.0);
        let logi = DecayFunction::Logistic { beta: 1.0, nu: 0.0 };
        assert_eq!(logi.eval(f64::INFINITY).unwrap(), 0.0);
        assert_eq!(logi.eval(0.0).unwrap(), 1.0);
        assert!(exp.eval(-1.0).is_err());
        assert!(exp.eval(f64::NAN).is_err());
    }

    #[test]
    fn zero_rate_exponential_at_infinity() {
        let f = DecayFunction::Exponential { beta: 0.0 };
        assert_eq!(f.eval(f64::INFINITY).unwrap(), 0.0);
        assert_eq!(f.eval(5.0).unwrap(), 1.0);
    }

    #[test]
    fn sequential_constant_normalizers() {
        let d = DistanceMatrix::sequential_index(3);
        assert!(d.is_sequential());
        let p = ProximityMatrix::build(&d, &DecayFunction::Constant).unwrap();
        assert_eq!(p.h(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_point_exponential() {
        let d = DistanceMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = ProximityMatrix::build(&d, &DecayFunction::Exponential { beta: 2f64.ln() }).unwrap();
        assert!((p.a(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.a(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.a(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.a(1, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disconnected_gives_identity() {
        let p = ProximityMatrix::build(
            &DistanceMatrix::disconnected(4),
            &DecayFunction::Exponential { beta: 0.3 },
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(p.a(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn single_customer() {
        let d = DistanceMatrix::new(vec![vec![0.0]]).unwrap();
        let p = ProximityMatrix::build(&d, &DecayFunction::Constant).unwrap();
        assert_eq!(p.h(), &[1.0]);
        assert_eq!(p.a(0, 0), 1.0);
    }

    #[test]
    fn rejects_bad_distances() {
        assert!(DistanceMatrix::new(vec![vec![1.0]]).is_err());
        assert!(DistanceMatrix::new(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(vec![vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn permutation_checks() {
        let d = DistanceMatrix::sequential_index(3);
        assert!(d.permuted(&[0, 0, 1]).is_err());
        assert!(d.permuted(&[0, 1]).is_err());
        let p = d.permuted(&[2, 1, 0]).unwrap();
        assert_eq!(p.get(2, 1), d.get(0, 1));
        assert_eq!(p.get(0, 1), d.get(2, 1));
    }

    fn decay_strategy() -> impl Strategy<Value = DecayFunction> {
        prop_oneof![
            Just(DecayFunction::Constant),
            (0.0..5.0f64).prop_map(|beta| DecayFunction::Exponential { beta }),
            (0.0..5.0f64, -3.0..3.0f64).prop_map(|(beta, nu)| DecayFunction::Logistic { beta, nu }),
            (0.01..5.0f64).prop_map(|nu| DecayFunction::Window { nu }),
        ]
    }

    proptest! {
        #[test]
        fn decay_is_bounded_and_nonincreasing(f in decay_strategy(), x in 0.0..50.0f64, y in 0.0..50.0f64) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            let flo = f.eval(lo).unwrap();
            let fhi = f.eval(hi).unwrap();
            prop_assert!((0.0..=1.0).contains(&flo));
            prop_assert!(fhi <= flo);
            prop_assert_eq!(f.eval(0.0).unwrap(), 1.0);
            prop_assert_eq!(f.eval(f64::INFINITY).unwrap(), 0.0);
        }

        #[test]
        fn proximity_rows_are_stochastic(
            f in decay_strategy(),
            raw in proptest::collection::vec(prop_oneof![0.0..10.0f64, Just(f64::INFINITY)], 25),
        ) {
            let n = 5;
            let mut d = raw.clone();
            for i in 0..n { d[i * n + i] = 0.0; }
            let d = DistanceMatrix::from_flat(n, d).unwrap();
            let p = ProximityMatrix::build(&d, &f).unwrap();
            for i in 0..n {
                let s: f64 = p.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(p.h()[i] >= 1.0);
            }
        }
    }
}
