//! Binary feature matrices and the reachability map from connection graphs
//! to inherited dishes.

use serde::{Deserialize, Serialize};

use crate::prior::PriorState;

/// `n x k` binary matrix stored column by column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n: usize,
    k: usize,
    z: Vec<bool>,
}

impl FeatureMatrix {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            z: vec![false; n * k],
        }
    }

    pub fn from_columns(n: usize, columns: &[Vec<bool>]) -> Self {
        let mut z = Vec::with_capacity(n * columns.len());
        for col in columns {
            assert_eq!(col.len(), n, "column length must equal the row count");
            z.extend_from_slice(col);
        }
        Self {
            n,
            k: columns.len(),
            z,
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n, k);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), k, "ragged feature rows");
            for (c, &v) in row.iter().enumerate() {
                m.set(i, c, v);
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> bool {
        self.z[k * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: bool) {
        self.z[k * self.n + i] = v;
    }

    pub fn column(&self, k: usize) -> &[bool] {
        &self.z[k * self.n..(k + 1) * self.n]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [bool] {
        &mut self.z[k * self.n..(k + 1) * self.n]
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        (0..self.k).map(|c| self.get(i, c)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        (0..self.n).map(|i| self.row(i)).collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.k)
            .map(|c| self.column(c).iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn active_columns(&self) -> Vec<usize> {
        self.column_sums()
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s > 0)
            .map(|(c, _)| c)
            .collect()
    }

    /// Drops every all-zero column.
    pub fn restrict_active(&self) -> Self {
        let cols: Vec<Vec<bool>> = self
            .active_columns()
            .into_iter()
            .map(|c| self.column(c).to_vec())
            .collect();
        Self::from_columns(self.n, &cols)
    }

    pub fn push_column(&mut self, col: &[bool]) {
        assert_eq!(col.len(), self.n);
        self.z.extend_from_slice(col);
        self.k += 1;
    }

    pub fn permute_columns(&self, order: &[usize]) -> Self {
        let cols: Vec<Vec<bool>> = order.iter().map(|&c| self.column(c).to_vec()).collect();
        Self::from_columns(self.n, &cols)
    }
}

/// Marks every customer that reaches `target` by following its links.
///
/// Customer `v` has the edge `v -> links[v]` unless it is a self-loop or
/// `v` is listed in `cut`. The target's own edge is never needed to reach
/// the target, so the owner's link for its own dish is irrelevant here.
pub fn mark_reachers(links: &[usize], target: usize, cut: &[usize], out: &mut [bool]) {
    let n = links.len();
    debug_assert_eq!(out.len(), n);
    out.iter_mut().for_each(|b| *b = false);
    // children lists of the reversed functional graph, in CSR form
    let mut start = vec![0usize; n + 1];
    for (v, &t) in links.iter().enumerate() {
        if t != v && !cut.contains(&v) {
            start[t + 1] += 1;
        }
    }
    for t in 0..n {
        start[t + 1] += start[t];
    }
    let mut fill = start.clone();
    let mut child = vec![0usize; start[n]];
    for (v, &t) in links.iter().enumerate() {
        if t != v && !cut.contains(&v) {
            child[fill[t]] = v;
            fill[t] += 1;
        }
    }
    let mut stack = vec![target];
    out[target] = true;
    while let Some(u) = stack.pop() {
        for &v in &child[start[u]..start[u + 1]] {
            if !out[v] {
                out[v] = true;
                stack.push(v);
            }
        }
    }
}

/// The deterministic map from `(c*, C)` to `Z`.
pub fn compute_feature_matrix(state: &PriorState) -> FeatureMatrix {
    let n = state.n();
    let mut z = FeatureMatrix::zeros(n, state.k());
    for (k, dish) in state.dishes().iter().enumerate() {
        mark_reachers(&dish.links, dish.owner, &[], z.column_mut(k));
    }
    z
}
