//! Starting points for the optimizer: spectral normalized-cut seeding,
//! indicator perturbation, and the Dirichlet-prior multi-start.
//!
//! [`multi_start`] runs the whole seeding pipeline:
//!
//! 1. normalized-cut labels from [`ncut_embed`] followed by [`kmeans`];
//! 2. the perturbed indicator of those labels is one candidate start, and
//!    DCD runs with each configured Dirichlet prior from that same indicator
//!    give one more candidate each;
//! 3. every candidate is refined by a prior-free (`α = 1`) run;
//! 4. the refined solution with the smallest KL error wins.

mod kmeans;
mod lanczos;
mod spectral;

use std::fmt;

use log::debug;
use ndarray::Array2;
use rayon::prelude::*;

use crate::dcd::{self, AssignmentMatrix, DcdConfig, RunTrace};
use crate::error::{Error, Result};
use crate::eval::{hard_labels, HardClustering};
use crate::graph::SparseSimilarity;

pub use kmeans::{kmeans_points, KMeansOutcome, MAX_LLOYD_ITERS};
pub use spectral::{
    ncut_embed, ncut_embed_with, normalized_affinity_apply, EigenMethod, SpectralEmbedding,
    DENSE_EIGEN_MAX_N, EIGEN_RESIDUAL_TOL,
};

/// Perturbation added to every indicator entry by default.
pub const DEFAULT_EPS: f64 = 0.2;

pub const DEFAULT_PRIOR_ALPHAS: [f64; 3] = [1.2, 2.0, 5.0];

/// k-means on the spectral coordinates.
pub fn kmeans(embedding: &SpectralEmbedding, r: usize, seed: u64) -> Result<HardClustering> {
    let out = kmeans_points(embedding.coordinates.view(), r, seed)?;
    HardClustering::new(out.labels, r)
}

/// `W0_ik = 1 + eps` where `labels_i = k`, `eps` elsewhere.
pub fn indicator_perturb(labels: &HardClustering, r: usize, eps: f64) -> Result<AssignmentMatrix> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbation must be positive and finite, got {eps}"
        )));
    }
    if r == 0 || labels.labels().iter().any(|&l| l >= r) {
        return Err(Error::InvalidParameter(format!(
            "labels do not fit into r = {r} clusters"
        )));
    }
    let mut values = Array2::from_elem((labels.n(), r), eps);
    for (i, &l) in labels.labels().iter().enumerate() {
        values[[i, l]] += 1.0;
    }
    AssignmentMatrix::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CandidateSource {
    /// Perturbed normalized-cut indicator.
    Ncut,
    /// Output of a DCD run with a Dirichlet prior of this concentration.
    DirichletPrior(f64),
}

impl fmt::Display for CandidateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateSource::Ncut => write!(f, "ncut"),
            CandidateSource::DirichletPrior(alpha) => write!(f, "dcd-prior-{alpha}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRun {
    pub assignment: AssignmentMatrix,
    pub labels: HardClustering,
    pub final_kl: f64,
    /// Trace of the final `α = 1` run.
    pub trace: RunTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitCandidate {
    pub source: CandidateSource,
    /// Prior concentration that produced the start (`1` for the Ncut start).
    pub alpha_used: f64,
    /// Start of the final `α = 1` run; absent when the prior run failed.
    pub start: Option<AssignmentMatrix>,
    pub prior_trace: Option<RunTrace>,
    /// The refined solution, or why this candidate was dropped.
    pub outcome: std::result::Result<CandidateRun, String>,
}

impl InitCandidate {
    pub fn final_kl(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|run| run.final_kl)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartConfig {
    /// Settings shared by every run. Its `alpha` is ignored: prior runs use
    /// `prior_alphas` and the final runs use `α = 1`.
    pub dcd: DcdConfig,
    pub prior_alphas: Vec<f64>,
    pub eps: f64,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        Self {
            dcd: DcdConfig::default(),
            prior_alphas: DEFAULT_PRIOR_ALPHAS.to_vec(),
            eps: DEFAULT_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartResult {
    pub assignment: AssignmentMatrix,
    pub labels: HardClustering,
    pub kl_error: f64,
    /// Index of the winner in `candidates`.
    pub selected: usize,
    pub ncut_labels: HardClustering,
    /// Ncut first, then the prior runs in configured order.
    pub candidates: Vec<InitCandidate>,
}

/// Seeds, refines and selects as described in the module docs.
///
/// Candidates run in parallel on the current rayon pool; the result does not
/// depend on the number of threads. Ties in KL error go to the earlier
/// candidate.
pub fn multi_start(
    graph: &SparseSimilarity,
    r: usize,
    config: &MultiStartConfig,
) -> Result<MultiStartResult> {
    config.dcd.with_alpha(1.0).validate()?;
    for &alpha in &config.prior_alphas {
        config.dcd.with_alpha(alpha).validate()?;
    }

    let embedding = ncut_embed(graph, r)?;
    let ncut_labels = kmeans(&embedding, r, config.dcd.seed)?;
    let indicator = indicator_perturb(&ncut_labels, r, config.eps)?;

    let sources: Vec<CandidateSource> = std::iter::once(CandidateSource::Ncut)
        .chain(
            config
                .prior_alphas
                .iter()
                .map(|&a| CandidateSource::DirichletPrior(a)),
        )
        .collect();
    let candidates: Vec<InitCandidate> = sources
        .into_par_iter()
        .map(|source| refine_candidate(graph, &indicator, source, &config.dcd))
        .collect();

    let mut selected: Option<usize> = None;
    for (idx, cand) in candidates.iter().enumerate() {
        if let Some(kl) = cand.final_kl() {
            debug!("candidate {} reached KL error {kl}", cand.source);
            let better = selected
                .and_then(|s| candidates[s].final_kl())
                .is_none_or(|best| kl < best);
            if better {
                selected = Some(idx);
            }
        }
    }
    let Some(selected) = selected else {
        let reasons = candidates
            .iter()
            .filter_map(|c| {
                c.outcome
                    .as_ref()
                    .err()
                    .map(|e| format!("{}: {e}", c.source))
            })
            .collect();
        return Err(Error::AllCandidatesFailed { reasons });
    };
    let winner = candidates[selected]
        .outcome
        .as_ref()
        .expect("selected candidate succeeded");
    Ok(MultiStartResult {
        assignment: winner.assignment.clone(),
        labels: winner.labels.clone(),
        kl_error: winner.final_kl,
        selected,
        ncut_labels,
        candidates,
    })
}

fn refine_candidate(
    graph: &SparseSimilarity,
    indicator: &AssignmentMatrix,
    source: CandidateSource,
    base: &DcdConfig,
) -> InitCandidate {
    let (alpha_used, start, prior_trace) = match source {
        CandidateSource::Ncut => (1.0, Ok(indicator.clone()), None),
        CandidateSource::DirichletPrior(alpha) => {
            match dcd::run(graph, indicator, &base.with_alpha(alpha)) {
                Ok((w, trace)) => (alpha, Ok(w), Some(trace)),
                Err(e) => (alpha, Err(format!("prior run: {e}")), Some(e.trace)),
            }
        }
    };
    let start = match start {
        Ok(w) => w,
        Err(reason) => {
            return InitCandidate {
                source,
                alpha_used,
                start: None,
                prior_trace,
                outcome: Err(reason),
            }
        }
    };
    let outcome = dcd::run(graph, &start, &base.with_alpha(1.0))
        .map_err(|e| format!("final run: {e}"))
        .and_then(|(assignment, trace)| {
            let final_kl = dcd::kl_error(graph, &assignment).map_err(|e| e.to_string())?;
            Ok(CandidateRun {
                labels: hard_labels(&assignment),
                assignment,
                final_kl,
                trace,
            })
        });
    InitCandidate {
        source,
        alpha_used,
        start: Some(start),
        prior_trace,
        outcome,
    }
}
