//! Hard label readout and clustering purity.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dcd::AssignmentMatrix;
use crate::error::{Error, Result};

/// Cluster label per sample, each in `[0, r)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardClustering {
    labels: Vec<usize>,
    r: usize,
}

impl HardClustering {
    pub fn new(labels: Vec<usize>, r: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= r) {
            return Err(Error::InvalidInput(format!(
                "label {l} of sample {i} is not below r = {r}"
            )));
        }
        Ok(Self { labels, r })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

/// Ground-truth class per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    classes: Vec<usize>,
    num_classes: usize,
}

impl GroundTruth {
    pub fn new(classes: Vec<usize>) -> Self {
        let num_classes = classes.iter().max().map_or(0, |&m| m + 1);
        Self {
            classes,
            num_classes,
        }
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn n(&self) -> usize {
        self.classes.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// `argmax_k W_ik` per row, ties going to the smallest `k`.
pub fn hard_labels(w: &AssignmentMatrix) -> HardClustering {
    let labels = w
        .view()
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    HardClustering { labels, r: w.r() }
}

/// `(1/n) Σ_k max_l n_k^l`, where `n_k^l` counts samples of class `l` in
/// cluster `k`. Empty clusters contribute nothing.
pub fn purity(pred: &HardClustering, truth: &GroundTruth) -> Result<f64> {
    if pred.n() != truth.n() {
        return Err(Error::InvalidInput(format!(
            "prediction has {} labels but ground truth has {}",
            pred.n(),
            truth.n()
        )));
    }
    if pred.n() == 0 {
        return Err(Error::InvalidInput(
            "cannot score an empty clustering".into(),
        ));
    }
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for (&k, &l) in pred.labels.iter().zip(&truth.classes) {
        *counts.entry((k, l)).or_default() += 1;
    }
    let mut majority = vec![0usize; pred.r];
    for (&(k, _), &c) in &counts {
        majority[k] = majority[k].max(c);
    }
    Ok(majority.iter().sum::<usize>() as f64 / pred.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn argmax_readout() {
        let w = AssignmentMatrix::new(array![[0.9, 0.1], [0.2, 0.8]]).unwrap();
        assert_eq!(hard_labels(&w).labels(), &[0, 1]);
        let tie = AssignmentMatrix::new(array![[0.5, 0.5]]).unwrap();
        assert_eq!(hard_labels(&tie).labels(), &[0]);
        let three = AssignmentMatrix::new(array![[0.1, 0.4, 0.4]]).unwrap();
        assert_eq!(hard_labels(&three).labels(), &[1]);
    }

    #[test]
    fn perfect_and_single_cluster_purity() {
        let truth = GroundTruth::new(vec![0, 0, 1, 1, 2]);
        let pred = HardClustering::new(vec![0, 0, 1, 1, 2], 3).unwrap();
        assert_eq!(purity(&pred, &truth).unwrap(), 1.0);

        let truth = GroundTruth::new(vec![0, 1, 0, 1]);
        let one = HardClustering::new(vec![0; 4], 1).unwrap();
        assert_eq!(purity(&one, &truth).unwrap(), 0.5);
    }

    #[test]
    fn empty_clusters_contribute_nothing() {
        let truth = GroundTruth::new(vec![0, 1, 1]);
        let pred = HardClustering::new(vec![2, 2, 2], 5).unwrap();
        assert!((purity(&pred, &truth).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_invalid_input() {
        let truth = GroundTruth::new(vec![0, 1]);
        let pred = HardClustering::new(vec![0, 1, 1], 2).unwrap();
        assert!(matches!(purity(&pred, &truth), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn labels_must_be_below_r() {
        assert!(HardClustering::new(vec![0, 2], 2).is_err());
    }
}
