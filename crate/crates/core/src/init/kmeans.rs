//! Lloyd's k-means with k-means++ seeding, used to discretize the spectral
//! embedding.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares after every Lloyd iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Clusters the rows of `points` into `r` groups. Deterministic in `seed`.
pub fn kmeans_points(points: ArrayView2<'_, f64>, r: usize, seed: u64) -> Result<KMeansOutcome> {
    let n = points.nrows();
    if r == 0 || r > n {
        return Err(Error::InvalidParameter(format!(
            "k-means needs 1 <= r <= n = {n}, got {r}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(points, r, &mut rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut objective_trace = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_LLOYD_ITERS {
        iterations += 1;
        let mut next: Vec<usize> = points
            .rows()
            .into_iter()
            .map(|p| nearest(p, &centroids).0)
            .collect();
        repair_empty_clusters(points, &mut next, &mut centroids);
        centroids = means(points, &next, &centroids);
        objective_trace.push(within_cluster_ss(points, &next, &centroids));
        let stable = next == labels;
        labels = next;
        if stable {
            break;
        }
    }
    Ok(KMeansOutcome {
        labels,
        centroids,
        objective_trace,
        iterations,
    })
}

fn plus_plus_seeds(points: ArrayView2<'_, f64>, r: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| sq_dist(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < r {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` past the last partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    let mut centroids = Array2::zeros((r, points.ncols()));
    for (k, &i) in chosen.iter().enumerate() {
        centroids.row_mut(k).assign(&points.row(i));
    }
    centroids
}

/// Gives every empty cluster the point farthest from its centroid in the
/// currently largest cluster.
fn repair_empty_clusters(
    points: ArrayView2<'_, f64>,
    labels: &mut [usize],
    centroids: &mut Array2<f64>,
) {
    let r = centroids.nrows();
    loop {
        let mut sizes = vec![0usize; r];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut largest = 0;
        for (k, &s) in sizes.iter().enumerate() {
            if s > sizes[largest] {
                largest = k;
            }
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &l) in labels.iter().enumerate() {
            if l == largest {
                let d = sq_dist(points.row(i), centroids.row(largest));
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        let far = far.expect("largest cluster is non-empty");
        labels[far] = empty;
        centroids.row_mut(empty).assign(&points.row(far));
    }
}

fn means(points: ArrayView2<'_, f64>, labels: &[usize], previous: &Array2<f64>) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros(previous.dim());
    let mut counts = vec![0usize; previous.nrows()];
    for (p, &l) in points.rows().into_iter().zip(labels) {
        let mut row = sums.row_mut(l);
        row += &p;
        counts[l] += 1;
    }
    for (k, mut row) in sums.rows_mut().into_iter().enumerate() {
        if counts[k] == 0 {
            row.assign(&previous.row(k));
        } else {
            row.mapv_inplace(|v| v / counts[k] as f64);
        }
    }
    sums
}

fn nearest(p: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn within_cluster_ss(
    points: ArrayView2<'_, f64>,
    labels: &[usize],
    centroids: &Array2<f64>,
) -> f64 {
    points
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum()
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}
