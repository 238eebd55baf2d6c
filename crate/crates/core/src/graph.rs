//! Sparse similarity graphs: KNN construction from feature vectors and
//! validation of externally supplied weighted graphs.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense `n × d` table of finite feature coordinates, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "feature matrix needs at least 2 samples, got {n}"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidInput(
                "feature matrix needs at least one column".into(),
            ));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value {v} at row {i}, column {j}"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} columns, expected {d}",
                row.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }
}

/// Symmetric nonnegative similarity matrix in compressed sparse row form.
///
/// Both triangles are stored so that row `i` lists every neighbour of `i` in
/// increasing column order. There are no self-loops, no explicit zeros and no
/// isolated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSimilarity {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSimilarity {
    /// Builds the CSR layout from strictly-upper-triangular entries. Callers
    /// guarantee `i < j < n`, unique pairs, and finite positive weights.
    fn from_upper(n: usize, upper: &BTreeMap<(usize, usize), f64>) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        // Keys arrive in (i, j) order, so every row ends up sorted: lower
        // entries (j, i) land before upper entries (i, j') with i < j'.
        for (&(i, j), &w) in upper {
            rows[j].push((i, w));
        }
        for (&(i, j), &w) in upper {
            rows[i].push((j, w));
        }
        if let Some(node) = rows.iter().position(Vec::is_empty) {
            return Err(Error::IsolatedNode { node });
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(2 * upper.len());
        let mut values = Vec::with_capacity(2 * upper.len());
        for row in rows {
            for (j, w) in row {
                col_idx.push(j);
                values.push(w);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, counting both `(i, j)` and `(j, i)`.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.nnz() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Neighbours of `i` with their weights, in increasing index order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Weight of `(i, j)`, zero when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Entries with `i < j`, ordered by `(i, j)`.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|i| {
                self.neighbors(i)
                    .filter(move |&(j, _)| j > i)
                    .map(move |(j, w)| (i, j, w))
            })
            .collect()
    }

    /// Weighted degrees `d_i = Σ_j A_ij`.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.neighbors(i).map(|(_, w)| w).sum())
            .collect()
    }

    /// `Σ_ij A_ij` over both triangles.
    pub fn total_weight(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, w) in self.neighbors(i) {
                dense[[i, j]] = w;
            }
        }
        dense
    }

    /// Connected component id of every node; ids are assigned in order of
    /// each component's smallest node.
    pub fn connected_components(&self) -> Vec<usize> {
        const UNSEEN: usize = usize::MAX;
        let mut component = vec![UNSEEN; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if component[start] != UNSEEN {
                continue;
            }
            component[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for (v, _) in self.neighbors(u) {
                    if component[v] == UNSEEN {
                        component[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        component
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().iter().all(|&c| c == 0)
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let upper: BTreeMap<(usize, usize), f64> = self
            .upper_entries()
            .into_iter()
            .map(|(i, j, w)| {
                let (a, b) = (perm[i], perm[j]);
                ((a.min(b), a.max(b)), w)
            })
            .collect();
        Self::from_upper(self.n, &upper)
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidParameter(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameter(
                "not a permutation of 0..n".to_string(),
            ));
        }
    }
    Ok(())
}

/// How a raw entry list should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeOrientation {
    /// Each entry `(i, j, w)` sets both `A_ij` and `A_ji`. Listing a pair in
    /// both orders is allowed only with equal weights.
    #[default]
    Undirected,
    /// Entries are directed; the result is symmetrized as
    /// `max(A_ij, A_ji)`.
    Directed,
}

/// Checks a raw entry list and turns it into a [`SparseSimilarity`].
///
/// Diagonal entries and explicit zeros are dropped. Negative or non-finite
/// weights, out-of-range indices, duplicate entries and nodes left without
/// any positive weight are rejected.
pub fn validate_graph(
    entries: &[(usize, usize, f64)],
    n: usize,
    orientation: EdgeOrientation,
) -> Result<SparseSimilarity> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "graph needs at least 2 nodes, got {n}"
        )));
    }
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (pos, &(i, j, w)) in entries.iter().enumerate() {
        if i >= n || j >= n {
            return Err(Error::InvalidInput(format!(
                "entry {pos} ({i}, {j}) is out of range for {n} nodes"
            )));
        }
        if !w.is_finite() {
            return Err(Error::InvalidInput(format!(
                "entry {pos} ({i}, {j}) has non-finite weight {w}"
            )));
        }
        if w < 0.0 {
            return Err(Error::InvalidInput(format!(
                "entry {pos} ({i}, {j}) has negative weight {w}"
            )));
        }
        if directed.insert((i, j), w).is_some() {
            return Err(Error::InvalidInput(format!(
                "entry {pos} ({i}, {j}) is listed more than once"
            )));
        }
    }

    let mut upper = BTreeMap::new();
    for (&(i, j), &w) in &directed {
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        let weight = match (orientation, directed.get(&(j, i))) {
            (EdgeOrientation::Directed, Some(&back)) => w.max(back),
            (EdgeOrientation::Undirected, Some(&back)) if back != w => {
                return Err(Error::InvalidInput(format!(
                    "asymmetric weights for ({i}, {j}): {w} vs {back}; \
                     treat the input as directed to symmetrize"
                )));
            }
            _ => w,
        };
        if weight > 0.0 {
            upper.insert(key, weight);
        }
    }
    SparseSimilarity::from_upper(n, &upper)
}

/// Builds the symmetrized, binarized `K`-nearest-neighbour graph of the
/// feature rows under Euclidean distance.
///
/// `A_ij = 1` iff `j` is among the `K` nearest neighbours of `i` or vice
/// versa. Distance ties are broken towards the smaller node index.
pub fn knn_graph(features: &FeatureMatrix, k: usize) -> Result<SparseSimilarity> {
    let n = features.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "K must satisfy 1 <= K < n = {n}, got {k}"
        )));
    }
    let neighbor_lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| nearest_neighbors(features, i, k))
        .collect();

    let mut upper = BTreeMap::new();
    for (i, list) in neighbor_lists.iter().enumerate() {
        for &j in list {
            upper.insert((i.min(j), i.max(j)), 1.0);
        }
    }
    SparseSimilarity::from_upper(n, &upper)
}

fn nearest_neighbors(features: &FeatureMatrix, i: usize, k: usize) -> Vec<usize> {
    let query = features.row(i);
    let mut candidates: Vec<(f64, usize)> = (0..features.n())
        .filter(|&j| j != i)
        .map(|j| (squared_distance(query, features.row(j)), j))
        .collect();
    let by_distance_then_index =
        |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, by_distance_then_index);
        candidates.truncate(k);
    }
    candidates.sort_by(by_distance_then_index);
    candidates.into_iter().map(|(_, j)| j).collect()
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}
