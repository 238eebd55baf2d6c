//! Normalized-cut spectral embedding.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use super::lanczos;
use crate::error::{Error, Result};
use crate::graph::SparseSimilarity;

/// Components up to this size use a dense symmetric eigendecomposition.
pub const DENSE_EIGEN_MAX_N: usize = 2000;

/// Maximum accepted `‖M v − μ v‖` for a returned eigenvector.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

const LANCZOS_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense up to [`DENSE_EIGEN_MAX_N`] nodes per component, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// Rows of the leading eigenvectors scaled to unit length.
    pub coordinates: Array2<f64>,
    /// Unit eigenvectors of `D^{-1/2} A D^{-1/2}`, one per column.
    pub eigenvectors: Array2<f64>,
    /// Matching eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn n(&self) -> usize {
        self.coordinates.nrows()
    }

    pub fn r(&self) -> usize {
        self.coordinates.ncols()
    }
}

/// `y = D^{-1/2} A D^{-1/2} x`.
pub fn normalized_affinity_apply(graph: &SparseSimilarity, x: &[f64], y: &mut [f64]) {
    let inv_sqrt = inverse_sqrt_degrees(graph);
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = graph
            .neighbors(i)
            .map(|(j, a)| a * inv_sqrt[j] * x[j])
            .sum::<f64>()
            * inv_sqrt[i];
    }
}

fn inverse_sqrt_degrees(graph: &SparseSimilarity) -> Vec<f64> {
    graph
        .weighted_degrees()
        .into_iter()
        .map(|d| 1.0 / d.sqrt())
        .collect()
}

/// The `r` leading eigenvectors of `D^{-1/2} A D^{-1/2}`, with rows
/// normalized to unit length.
pub fn ncut_embed(graph: &SparseSimilarity, r: usize) -> Result<SpectralEmbedding> {
    ncut_embed_with(graph, r, EigenMethod::Auto)
}

pub fn ncut_embed_with(
    graph: &SparseSimilarity,
    r: usize,
    method: EigenMethod,
) -> Result<SpectralEmbedding> {
    let n = graph.n();
    if r == 0 || r >= n {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension must satisfy 1 <= r < n = {n}, got {r}"
        )));
    }

    // The operator is block diagonal over connected components, so its
    // spectrum is the union of the per-component spectra.
    let component_of = graph.connected_components();
    let num_components = component_of.iter().max().map_or(0, |&c| c + 1);
    if num_components > 1 {
        warn!("similarity graph has {num_components} connected components; spectral seeding is degenerate");
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_components];
    for (node, &c) in component_of.iter().enumerate() {
        members[c].push(node);
    }

    let inv_sqrt = inverse_sqrt_degrees(graph);
    let mut candidates: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    for (c, nodes) in members.iter().enumerate() {
        let local = local_operator(graph, nodes, &inv_sqrt);
        let size = nodes.len();
        let nev = r.min(size);
        let use_dense = match method {
            EigenMethod::Dense => true,
            EigenMethod::Lanczos => false,
            EigenMethod::Auto => size <= DENSE_EIGEN_MAX_N,
        };
        let pairs = if use_dense || size <= 2 {
            dense_largest(&local, nev)
        } else {
            lanczos::largest_eigenpairs(
                |x, y| local.apply(x, y),
                size,
                nev,
                EIGEN_RESIDUAL_TOL / 10.0,
                LANCZOS_SEED,
            )?
        };
        for (value, vector) in pairs.values.into_iter().zip(pairs.vectors) {
            candidates.push((value, c, vector));
        }
    }
    // Stable: ties keep component order.
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(r);

    let mut eigenvectors = Array2::zeros((n, r));
    let mut eigenvalues = Vec::with_capacity(r);
    for (col, (value, c, vector)) in candidates.into_iter().enumerate() {
        let sign = orientation(&vector);
        for (&node, v) in members[c].iter().zip(&vector) {
            eigenvectors[[node, col]] = sign * v;
        }
        eigenvalues.push(value);
    }

    check_residuals(graph, &eigenvectors, &eigenvalues)?;

    let mut coordinates = eigenvectors.clone();
    for mut row in coordinates.rows_mut() {
        let len = row.dot(&row).sqrt();
        if len > 0.0 {
            row.mapv_inplace(|v| v / len);
        }
    }
    Ok(SpectralEmbedding {
        coordinates,
        eigenvectors,
        eigenvalues,
    })
}

/// Sign that makes the largest-magnitude entry (first on ties) positive.
fn orientation(v: &[f64]) -> f64 {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).copied().unwrap_or(0.0) < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn check_residuals(graph: &SparseSimilarity, vectors: &Array2<f64>, values: &[f64]) -> Result<()> {
    let n = graph.n();
    let mut image = vec![0.0; n];
    for (col, &mu) in values.iter().enumerate() {
        let v: Vec<f64> = vectors.column(col).to_vec();
        normalized_affinity_apply(graph, &v, &mut image);
        let residual = image
            .iter()
            .zip(&v)
            .map(|(mv, vi)| (mv - mu * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual.is_nan() || residual >= EIGEN_RESIDUAL_TOL {
            return Err(Error::EigenSolver(format!(
                "eigenvector {col} (eigenvalue {mu}) has residual {residual:e}"
            )));
        }
    }
    Ok(())
}

/// Normalized affinity restricted to one connected component, in local
/// indices.
struct LocalOperator {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl LocalOperator {
    fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.cols[range.clone()]
                .iter()
                .zip(&self.vals[range])
                .map(|(&j, m)| m * x[j])
                .sum();
        }
    }
}

fn local_operator(graph: &SparseSimilarity, nodes: &[usize], inv_sqrt: &[f64]) -> LocalOperator {
    let mut local_index = std::collections::HashMap::with_capacity(nodes.len());
    for (l, &node) in nodes.iter().enumerate() {
        local_index.insert(node, l);
    }
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for &i in nodes {
        for (j, a) in graph.neighbors(i) {
            cols.push(local_index[&j]);
            vals.push(a * inv_sqrt[i] * inv_sqrt[j]);
        }
        row_ptr.push(cols.len());
    }
    LocalOperator {
        row_ptr,
        cols,
        vals,
    }
}

fn dense_largest(op: &LocalOperator, nev: usize) -> lanczos::EigenPairs {
    let size = op.size();
    let mut dense = DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        for p in op.row_ptr[i]..op.row_ptr[i + 1] {
            dense[(i, op.cols[p])] = op.vals[p];
        }
    }
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order
        .iter()
        .take(nev)
        .map(|&i| eig.eigenvalues[i])
        .collect();
    let vectors = order
        .iter()
        .take(nev)
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    lanczos::EigenPairs { values, vectors }
}
