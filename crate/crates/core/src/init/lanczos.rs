//! Lanczos iteration with full reorthogonalization for the largest
//! eigenpairs of a symmetric operator.
//!
//! The Krylov dimension grows geometrically until every requested Ritz pair
//! meets the residual tolerance. No implicit restarts; memory is `n × m`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Upper bound on the Krylov dimension before giving up.
const MAX_KRYLOV_DIM: usize = 1000;

const BREAKDOWN: f64 = 1e-12;

pub(crate) struct EigenPairs {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Largest `nev` eigenpairs of the symmetric operator `apply` on `R^n`.
pub(crate) fn largest_eigenpairs<F>(
    apply: F,
    n: usize,
    nev: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenPairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    if nev == 0 || nev > n {
        return Err(Error::InvalidParameter(format!(
            "cannot compute {nev} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = n.min(MAX_KRYLOV_DIM.max(2 * nev));
    let mut m = n.min((2 * nev + 20).max(50)).min(cap);
    loop {
        let (pairs, worst) = attempt(&apply, n, m, nev, &mut rng);
        if worst < tol {
            return Ok(pairs);
        }
        if m >= cap {
            return Err(Error::EigenSolver(format!(
                "worst residual {worst:e} exceeds {tol:e} after {m} Lanczos steps (n = {n}, nev = {nev})"
            )));
        }
        m = (2 * m).min(cap);
    }
}

fn attempt<F>(apply: &F, n: usize, m: usize, nev: usize, rng: &mut ChaCha8Rng) -> (EigenPairs, f64)
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut diag = Vec::with_capacity(m);
    let mut offdiag = Vec::with_capacity(m);
    basis.push(random_unit_vector(n, &[], rng));
    let mut w = vec![0.0; n];

    for j in 0..m {
        apply(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w);
        diag.push(alpha);
        // Full reorthogonalization, applied twice.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        if j + 1 == m {
            break;
        }
        let beta = norm(&w);
        if beta < BREAKDOWN {
            // Invariant subspace found; continue in a fresh direction.
            offdiag.push(0.0);
            let fresh = random_unit_vector(n, &basis, rng);
            basis.push(fresh);
        } else {
            offdiag.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }
    }

    let dim = basis.len();
    let mut tri = DMatrix::<f64>::zeros(dim, dim);
    for (i, &a) in diag.iter().enumerate() {
        tri[(i, i)] = a;
    }
    for (i, &b) in offdiag.iter().enumerate().take(dim - 1) {
        tri[(i, i + 1)] = b;
        tri[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(tri);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut values = Vec::with_capacity(nev);
    let mut vectors = Vec::with_capacity(nev);
    let mut worst: f64 = 0.0;
    let mut image = vec![0.0; n];
    for &idx in order.iter().take(nev) {
        let theta = eig.eigenvalues[idx];
        let mut x = vec![0.0; n];
        for (c, v) in eig.eigenvectors.column(idx).iter().zip(&basis) {
            axpy(*c, v, &mut x);
        }
        let len = norm(&x);
        x.iter_mut().for_each(|v| *v /= len);
        apply(&x, &mut image);
        let residual = image
            .iter()
            .zip(&x)
            .map(|(mx, xi)| (mx - theta * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(residual);
        values.push(theta);
        vectors.push(x);
    }
    (EigenPairs { values, vectors }, worst)
}

fn random_unit_vector(n: usize, against: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        for _ in 0..2 {
            for u in against {
                let c = dot(u, &v);
                axpy(-c, u, &mut v);
            }
        }
        let len = norm(&v);
        if len > 1e-8 {
            v.iter_mut().for_each(|x| *x /= len);
            return v;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator() {
        let diag: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for ((yi, xi), d) in y.iter_mut().zip(x).zip(&diag) {
                *yi = d * xi;
            }
        };
        let pairs = largest_eigenpairs(apply, 200, 3, 1e-9, 7).unwrap();
        for (got, want) in pairs.values.iter().zip([199.0, 198.0, 197.0]) {
            assert!((got - want / 200.0).abs() < 1e-10, "{got}");
        }
    }

    #[test]
    fn repeated_eigenvalue_after_breakdown() {
        // Eigenvalue 1 with multiplicity 3, the rest 0.
        let n = 60;
        let apply = |x: &[f64], y: &mut [f64]| {
            for (i, (yi, xi)) in y.iter_mut().zip(x).enumerate() {
                *yi = if i < 3 { *xi } else { 0.0 };
            }
        };
        let pairs = largest_eigenpairs(apply, n, 3, 1e-9, 1).unwrap();
        for v in &pairs.values {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }
}
