//! The dd-IBP generative process over dish ownership and customer
//! connections, and its exact log density.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{domain, Error, Result};
use crate::features::FeatureMatrix;
use crate::geometry::{check_permutation, ProximityMatrix};
use crate::random;

/// One owned dish: its owner and every customer's link `c_{ik}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dish {
    pub owner: usize,
    pub links: Vec<usize>,
}

/// Ownership vector and connectivity matrix.
///
/// Dishes are kept grouped by owner in customer order, and in creation order
/// within an owner, so the owned set of customer `i` is a contiguous range of
/// dish indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PriorState {
    n: usize,
    dishes: Vec<Dish>,
}

impl PriorState {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            dishes: Vec::new(),
        }
    }

    /// Builds a state from dishes in any order; they are stably regrouped
    /// by owner.
    pub fn from_dishes(n: usize, mut dishes: Vec<Dish>) -> Result<Self> {
        for (k, d) in dishes.iter().enumerate() {
            if d.owner >= n {
                return Err(domain(format!("dish {k} owner {} out of range", d.owner)));
            }
            if d.links.len() != n {
                return Err(Error::Dimension(format!(
                    "dish {k} has {} links, expected {n}",
                    d.links.len()
                )));
            }
            if let Some(&bad) = d.links.iter().find(|&&j| j >= n) {
                return Err(domain(format!("dish {k} links to customer {bad}")));
            }
        }
        dishes.sort_by_key(|d| d.owner);
        Ok(Self { n, dishes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.dishes.len()
    }

    pub fn dishes(&self) -> &[Dish] {
        &self.dishes
    }

    pub fn owner(&self, k: usize) -> usize {
        self.dishes[k].owner
    }

    /// The ownership vector `c*`.
    pub fn owners(&self) -> Vec<usize> {
        self.dishes.iter().map(|d| d.owner).collect()
    }

    #[inline]
    pub fn link(&self, i: usize, k: usize) -> usize {
        self.dishes[k].links[i]
    }

    pub fn set_link(&mut self, i: usize, k: usize, j: usize) {
        assert!(j < self.n);
        self.dishes[k].links[i] = j;
    }

    /// Dish counts `lambda_i = |K_i|`.
    pub fn lambda(&self) -> Vec<usize> {
        let mut lam = vec![0; self.n];
        for d in &self.dishes {
            lam[d.owner] += 1;
        }
        lam
    }

    /// Index range of the dishes owned by customer `i`.
    pub fn owned_range(&self, i: usize) -> Range<usize> {
        let lo = self.dishes.partition_point(|d| d.owner < i);
        let hi = self.dishes.partition_point(|d| d.owner <= i);
        lo..hi
    }

    pub fn owned_sets(&self) -> Vec<Range<usize>> {
        (0..self.n).map(|i| self.owned_range(i)).collect()
    }

    /// Appends a dish at the end of its owner's group and returns its index.
    pub fn insert_dish(&mut self, dish: Dish) -> usize {
        assert!(dish.owner < self.n && dish.links.len() == self.n);
        let at = self.owned_range(dish.owner).end;
        self.dishes.insert(at, dish);
        at
    }

    /// Removes dish `k`, compacting the remaining columns in order.
    pub fn remove_dish(&mut self, k: usize) -> Dish {
        self.dishes.remove(k)
    }

    /// Connectivity matrix as `n x K` rows.
    pub fn connection_rows(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| self.dishes.iter().map(|d| d.links[i]).collect())
            .collect()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let sets = self.owned_sets();
        let covered: usize = sets.iter().map(|r| r.len()).sum();
        if covered != self.k() {
            return Err(domain("owned sets do not partition the dishes"));
        }
        for (i, r) in sets.iter().enumerate() {
            if r.clone().any(|k| self.dishes[k].owner != i) {
                return Err(domain(format!("owned set of customer {i} is inconsistent")));
            }
        }
        Ok(())
    }
}

/// Draws `(c*, C)` from the prior.
pub fn sample_prior<R: Rng + ?Sized>(
    a: &ProximityMatrix,
    alpha: f64,
    rng: &mut R,
) -> Result<PriorState> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(domain(format!("alpha must be positive, got {alpha}")));
    }
    let n = a.n();
    let mut state = PriorState::empty(n);
    for i in 0..n {
        let lam = random::poisson(alpha / a.h()[i], rng);
        for _ in 0..lam {
            state.dishes.push(new_dish(a, i, rng));
        }
    }
    Ok(state)
}

/// A fresh dish for `owner` with every link drawn from the prior, including
/// the owner's own (inert) link.
pub fn new_dish<R: Rng + ?Sized>(a: &ProximityMatrix, owner: usize, rng: &mut R) -> Dish {
    Dish {
        owner,
        links: (0..a.n()).map(|m| a.sample_target(m, rng)).collect(),
    }
}

pub(crate) fn ln_poisson(k: u64, mean: f64) -> f64 {
    if k == 0 {
        -mean
    } else {
        k as f64 * mean.ln() - mean - ln_factorial(k)
    }
}

/// `log P(c* | alpha)`.
pub fn log_ownership(state: &PriorState, a: &ProximityMatrix, alpha: f64) -> f64 {
    state
        .lambda()
        .iter()
        .zip(a.h())
        .map(|(&lam, &h)| ln_poisson(lam as u64, alpha / h))
        .sum()
}

/// `log P(C | c*, D, f)`; `-inf` when some link has zero proximity.
pub fn log_connections(state: &PriorState, a: &ProximityMatrix) -> f64 {
    let mut total = 0.0;
    for d in &state.dishes {
        for (i, &j) in d.links.iter().enumerate() {
            let p = a.a(i, j);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += p.ln();
        }
    }
    total
}

pub fn log_prior(state: &PriorState, a: &ProximityMatrix, alpha: f64) -> Result<f64> {
    if state.n() != a.n() {
        return Err(Error::Dimension(format!(
            "state has {} customers, proximity has {}",
            state.n(),
            a.n()
        )));
    }
    if !(alpha > 0.0) {
        return Err(domain(format!("alpha must be positive, got {alpha}")));
    }
    let conn = log_connections(state, a);
    if conn == f64::NEG_INFINITY {
        return Ok(conn);
    }
    Ok(log_ownership(state, a, alpha) + conn)
}

/// Relabels customers so that customer `i` becomes `perm[i]`, in the
/// ownership vector, every link, and the rows of `z`.
pub fn permute_state(
    state: &PriorState,
    z: &FeatureMatrix,
    perm: &[usize],
) -> Result<(PriorState, FeatureMatrix)> {
    let n = state.n();
    check_permutation(perm, n)?;
    if z.n_rows() != n || z.n_cols() != state.k() {
        return Err(Error::Dimension("feature matrix does not match state".into()));
    }
    let mut tagged: Vec<(usize, Dish)> = state
        .dishes
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut links = vec![0; n];
            for (i, &j) in d.links.iter().enumerate() {
                links[perm[i]] = perm[j];
            }
            (
                k,
                Dish {
                    owner: perm[d.owner],
                    links,
                },
            )
        })
        .collect();
    tagged.sort_by_key(|(_, d)| d.owner);
    let mut zp = FeatureMatrix::zeros(n, state.k());
    for (new_k, (old_k, _)) in tagged.iter().enumerate() {
        for i in 0..n {
            zp.set(perm[i], new_k, z.get(i, *old_k));
        }
    }
    let dishes = tagged.into_iter().map(|(_, d)| d).collect();
    Ok((PriorState { n, dishes }, zp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::compute_feature_matrix;
    use crate::geometry::{DecayFunction, DistanceMatrix};
    use crate::random::seeded;

    fn seq_constant(n: usize) -> ProximityMatrix {
        ProximityMatrix::build(&DistanceMatrix::sequential_index(n), &DecayFunction::Constant).unwrap()
    }

    #[test]
    fn empty_state_density() {
        let a = seq_constant(3);
        let alpha = 1.7;
        let lp = log_prior(&PriorState::empty(3), &a, alpha).unwrap();
        let expected = -alpha * (1.0 + 0.5 + 1.0 / 3.0);
        assert!((lp - expected).abs() < 1e-14);
    }

    #[test]
    fn cross_link_under_identity_is_impossible() {
        let a = ProximityMatrix::identity(2);
        let s = PriorState::from_dishes(
            2,
            vec![Dish {
                owner: 0,
                links: vec![0, 0],
            }],
        )
        .unwrap();
        assert_eq!(log_prior(&s, &a, 1.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let a = seq_constant(2);
        let mut rng = seeded(0);
        assert!(sample_prior(&a, 0.0, &mut rng).is_err());
        assert!(log_prior(&PriorState::empty(2), &a, -1.0).is_err());
    }

    #[test]
    fn tiny_alpha_gives_empty_state() {
        let a = seq_constant(3);
        let mut rng = seeded(1);
        let empties = (0..2000)
            .filter(|_| sample_prior(&a, 1e-6, &mut rng).unwrap().k() == 0)
            .count();
        assert!(empties >= 1998);
    }

    #[test]
    fn lambda_two_mean() {
        // alpha = 2, h_2 = 2
        let a = seq_constant(3);
        let mut rng = seeded(2);
        let draws = 100_000;
        let mut total = 0usize;
        for _ in 0..draws {
            total += sample_prior(&a, 2.0, &mut rng).unwrap().lambda()[1];
        }
        let mean = total as f64 / draws as f64;
        let se = (1.0 / draws as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn grouping_is_canonical() {
        let a = seq_constant(4);
        let mut rng = seeded(3);
        let mut s = sample_prior(&a, 3.0, &mut rng).unwrap();
        s.check_invariants().unwrap();
        let k = s.insert_dish(new_dish(&a, 1, &mut rng));
        assert_eq!(s.owner(k), 1);
        assert_eq!(k + 1, s.owned_range(1).end);
        s.check_invariants().unwrap();
        let removed = s.remove_dish(k);
        assert_eq!(removed.owner, 1);
        s.check_invariants().unwrap();
        let lam = s.lambda();
        assert_eq!(lam.iter().sum::<usize>(), s.k());
    }

    /// Exhaustive sum of the density over all states with `K <= 3` at N = 3.
    #[test]
    fn density_normalizes_by_enumeration() {
        let d = DistanceMatrix::new(vec![
            vec![0.0, 1.0, 2.5],
            vec![0.7, 0.0, f64::INFINITY],
            vec![1.2, 0.4, 0.0],
        ])
        .unwrap();
        let a = ProximityMatrix::build(&d, &DecayFunction::Exponential { beta: 0.8 }).unwrap();
        let alpha = 0.9;
        let n = 3;
        let kmax = 3;
        let mut total = 0.0;
        for l0 in 0..=kmax {
            for l1 in 0..=kmax - l0 {
                for l2 in 0..=kmax - l0 - l1 {
                    let owners: Vec<usize> = std::iter::repeat_n(0, l0)
                        .chain(std::iter::repeat_n(1, l1))
                        .chain(std::iter::repeat_n(2, l2))
                        .collect();
                    let k = owners.len();
                    let cells = n * k;
                    for code in 0..n.pow(cells as u32) {
                        let mut c = code;
                        let dishes: Vec<Dish> = owners
                            .iter()
                            .map(|&o| Dish {
                                owner: o,
                                links: (0..n)
                                    .map(|_| {
                                        let v = c % n;
                                        c /= n;
                                        v
                                    })
                                    .collect(),
                            })
                            .collect();
                        let s = PriorState::from_dishes(n, dishes).unwrap();
                        total += log_prior(&s, &a, alpha).unwrap().exp();
                    }
                }
            }
        }
        let rate = alpha * a.inverse_h_sum();
        let tail: f64 = 1.0 - (0..=kmax as u64).map(|k| ln_poisson(k, rate).exp()).sum::<f64>();
        assert!((total + tail - 1.0).abs() < 1e-6, "total {total} tail {tail}");
    }

    #[test]
    fn identity_permutation_is_noop() {
        let a = seq_constant(4);
        let mut rng = seeded(4);
        let s = sample_prior(&a, 2.0, &mut rng).unwrap();
        let z = compute_feature_matrix(&s);
        let (s2, z2) = permute_state(&s, &z, &[0, 1, 2, 3]).unwrap();
        assert_eq!(s, s2);
        assert_eq!(z, z2);
        assert!(permute_state(&s, &z, &[0, 1, 1, 3]).is_err());
    }

    #[test]
    fn permuted_features_match_recomputation() {
        let a = seq_constant(5);
        let mut rng = seeded(5);
        let s = sample_prior(&a, 3.0, &mut rng).unwrap();
        let z = compute_feature_matrix(&s);
        let (s2, z2) = permute_state(&s, &z, &[3, 0, 4, 1, 2]).unwrap();
        assert_eq!(compute_feature_matrix(&s2), z2);
        s2.check_invariants().unwrap();
    }

    /// With two customers, swapping labels turns a sequential matrix into a
    /// reverse-sequential one and every configuration keeps its probability.
    #[test]
    fn two_customer_swap_by_enumeration() {
        let d = DistanceMatrix::sequential_index(2);
        let dp = d.permuted(&[1, 0]).unwrap();
        assert!(dp.get(1, 0).is_infinite() && dp.get(0, 1) == 1.0);
        let f = DecayFunction::Exponential { beta: 0.5 };
        let a = ProximityMatrix::build(&d, &f).unwrap();
        let ap = ProximityMatrix::build(&dp, &f).unwrap();
        for owners in [vec![], vec![0], vec![1], vec![0, 1], vec![1, 1]] {
            let k = owners.len();
            for code in 0..(1usize << (2 * k)) {
                let dishes: Vec<Dish> = owners
                    .iter()
                    .enumerate()
                    .map(|(c, &o)| Dish {
                        owner: o,
                        links: vec![(code >> (2 * c)) & 1, (code >> (2 * c + 1)) & 1],
                    })
                    .collect();
                let s = PriorState::from_dishes(2, dishes).unwrap();
                let z = compute_feature_matrix(&s);
                let (sp, _) = permute_state(&s, &z, &[1, 0]).unwrap();
                let lhs = log_prior(&s, &a, 1.3).unwrap();
                let rhs = log_prior(&sp, &ap, 1.3).unwrap();
                assert!(lhs == rhs || (lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
            }
        }
    }
}
