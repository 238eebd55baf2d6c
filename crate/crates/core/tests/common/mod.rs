//! Shared generators and dense reference evaluations for the integration
//! tests. Every oracle here works on dense matrices with plain loops and
//! does not call into the library's objective code.
#![allow(dead_code)]

use std::collections::BTreeSet;

use dcd_cluster::dcd::AssignmentMatrix;
use dcd_cluster::graph::{
    knn_graph, validate_graph, EdgeOrientation, FeatureMatrix, SparseSimilarity,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Binary KNN graph of random planar points, with extra unit edges chaining
/// the components together so the result is connected.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> SparseSimilarity {
    let k = rng.gen_range(2..=4).min(n - 1);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
        .collect();
    let knn = knn_graph(&FeatureMatrix::from_rows(&rows).unwrap(), k).unwrap();
    let mut edges: BTreeSet<(usize, usize)> = knn
        .upper_entries()
        .iter()
        .map(|&(i, j, _)| (i, j))
        .collect();
    let comp = knn.connected_components();
    let mut representative: Vec<usize> = Vec::new();
    for (node, &c) in comp.iter().enumerate() {
        if c == representative.len() {
            representative.push(node);
        }
    }
    for pair in representative.windows(2) {
        edges.insert((pair[0].min(pair[1]), pair[0].max(pair[1])));
    }
    let entries: Vec<_> = edges.into_iter().map(|(i, j)| (i, j, 1.0)).collect();
    let g = validate_graph(&entries, n, EdgeOrientation::Undirected).unwrap();
    assert!(g.is_connected());
    g
}

/// Random symmetric weighted graph over a connected backbone.
pub fn random_weighted_graph(rng: &mut ChaCha8Rng, n: usize) -> SparseSimilarity {
    let mut entries = Vec::new();
    for i in 1..n {
        entries.push((rng.gen_range(0..i), i, rng.gen_range(0.2..2.0)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < 0.25 && !entries.iter().any(|&(a, b, _)| a == i && b == j) {
                entries.push((i, j, rng.gen_range(0.2..2.0)));
            }
        }
    }
    validate_graph(&entries, n, EdgeOrientation::Undirected).unwrap()
}

pub fn random_assignment(
    rng: &mut ChaCha8Rng,
    n: usize,
    r: usize,
    lo: f64,
    hi: f64,
) -> AssignmentMatrix {
    AssignmentMatrix::new(Array2::from_shape_fn((n, r), |_| rng.gen_range(lo..hi))).unwrap()
}

pub fn row_stochastic(rng: &mut ChaCha8Rng, n: usize, r: usize) -> AssignmentMatrix {
    let mut values = Array2::from_shape_fn((n, r), |_| rng.gen_range(0.05..1.0));
    for mut row in values.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    AssignmentMatrix::new(values).unwrap()
}

/// Disjoint cliques with unit weights; returns the graph and the component
/// of every node.
pub fn cliques(sizes: &[usize]) -> (SparseSimilarity, Vec<usize>) {
    let mut entries = Vec::new();
    let mut membership = Vec::new();
    let mut offset = 0;
    for (c, &s) in sizes.iter().enumerate() {
        for i in 0..s {
            membership.push(c);
            for j in (i + 1)..s {
                entries.push((offset + i, offset + j, 1.0));
            }
        }
        offset += s;
    }
    (
        validate_graph(&entries, offset, EdgeOrientation::Undirected).unwrap(),
        membership,
    )
}

/// `Â_ij = Σ_k W_ik W_jk / Σ_v W_vk` straight from the definition.
pub fn dense_ahat(w: &Array2<f64>) -> Array2<f64> {
    let (n, r) = w.dim();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..r {
                let mut s = 0.0;
                for v in 0..n {
                    s += w[[v, k]];
                }
                acc += w[[i, k]] * w[[j, k]] / s;
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Generalized KL divergence summed over all `n²` entries.
pub fn dense_kl(a: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let ahat = dense_ahat(w);
    let mut total = 0.0;
    for ((i, j), &aij) in a.indexed_iter() {
        let h = ahat[[i, j]];
        if aij > 0.0 {
            total += aij * (aij / h).ln();
        }
        total += h - aij;
    }
    total
}

/// `−Σ A log Â − (α−1) Σ log W`.
pub fn dense_objective(a: &Array2<f64>, w: &Array2<f64>, alpha: f64) -> f64 {
    let ahat = dense_ahat(w);
    let mut total = 0.0;
    for ((i, j), &aij) in a.indexed_iter() {
        if aij > 0.0 {
            total -= aij * ahat[[i, j]].ln();
        }
    }
    for &v in w.iter() {
        total -= (alpha - 1.0) * v.ln();
    }
    total
}

pub fn dense_lagrangian(a: &Array2<f64>, w: &Array2<f64>, lambda: &[f64], alpha: f64) -> f64 {
    let mut total = dense_objective(a, w, alpha);
    for (i, row) in w.rows().into_iter().enumerate() {
        let mut s = 0.0;
        for &v in row.iter() {
            s += v;
        }
        total += lambda[i] * (s - 1.0);
    }
    total
}

/// Central-difference gradient of [`dense_objective`].
pub fn finite_difference_gradient(
    a: &Array2<f64>,
    w: &Array2<f64>,
    alpha: f64,
    step: f64,
) -> Array2<f64> {
    let mut grad = Array2::zeros(w.dim());
    for idx in 0..w.len() {
        let (i, k) = (idx / w.ncols(), idx % w.ncols());
        let mut plus = w.clone();
        plus[[i, k]] += step;
        let mut minus = w.clone();
        minus[[i, k]] -= step;
        grad[[i, k]] =
            (dense_objective(a, &plus, alpha) - dense_objective(a, &minus, alpha)) / (2.0 * step);
    }
    grad
}

/// Purity via an explicit `r × L` contingency table.
pub fn brute_force_purity(pred: &[usize], truth: &[usize]) -> f64 {
    let r = pred.iter().max().map_or(0, |m| m + 1);
    let l = truth.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; l]; r];
    for idx in 0..pred.len() {
        table[pred[idx]][truth[idx]] += 1;
    }
    let mut total = 0;
    for row in &table {
        let mut best = 0;
        for &c in row {
            if c > best {
                best = c;
            }
        }
        total += best;
    }
    total as f64 / pred.len() as f64
}

/// Same partition up to relabeling.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}
