//! DCD objective and the relaxed majorization-minimization optimizer.
//!
//! All objective and gradient kernels touch `A` only on its support, so one
//! iteration costs `O(nnz(A)·r + n·r)`. The dense approximation `Â` is
//! available through [`a_hat`] for diagnostics and tests.
//!
//! Notation used in comments: `s_k = Σ_v W_vk` are the column sums of `W`
//! and `Z_ij = A_ij / Â_ij` on the support of `A`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseSimilarity;

/// Lower clamp applied to every entry of `W` after an update.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Column sums below this abort with [`Error::DegenerateCluster`].
pub const DEGENERATE_COLUMN_SUM: f64 = 1e-50;

/// Width of the window used by the early-stopping rule.
pub const CONVERGENCE_WINDOW: usize = 10;

/// Soft cluster assignments `W_ik = P(k|i)`: an `n × r` matrix of strictly
/// positive finite entries. Rows need not sum to one while optimizing.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    values: Array2<f64>,
}

impl AssignmentMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, r) = values.dim();
        if n == 0 || r == 0 {
            return Err(Error::InvalidInput(format!(
                "assignment matrix must be non-empty, got {n}x{r}"
            )));
        }
        if let Some(((i, k), v)) = values
            .indexed_iter()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "assignment entry ({i}, {k}) = {v} is not strictly positive and finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != r) {
            return Err(Error::InvalidInput("ragged assignment rows".into()));
        }
        let flat = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), r), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(values)
    }

    /// Every entry equal to `1/r`.
    pub fn uniform(n: usize, r: usize) -> Result<Self> {
        Self::new(Array2::from_elem((n, r), 1.0 / r as f64))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn r(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[[i, k]]
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values
            .rows()
            .into_iter()
            .map(|row| row.sum())
            .collect()
    }

    /// `s_k = Σ_v W_vk`, accumulated in row order.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.r()];
        for row in self.values.rows() {
            for (s, w) in sums.iter_mut().zip(row.iter()) {
                *s += w;
            }
        }
        sums
    }

    /// Rows reordered so that old row `i` becomes row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::InvalidParameter(
                "permutation length mismatch".into(),
            ));
        }
        let mut out = Array2::zeros(self.values.dim());
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(p).assign(&self.values.row(i));
        }
        Self::new(out)
    }
}

/// Positive and unsigned negative parts of the gradient of the penalized
/// objective: `∇J = ∇⁺ − ∇⁻`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSplit {
    pub positive: Array2<f64>,
    pub negative: Array2<f64>,
}

impl GradientSplit {
    /// `∇⁺ − ∇⁻`.
    pub fn gradient(&self) -> Array2<f64> {
        &self.positive - &self.negative
    }
}

/// Per-row quantities of the relaxed update: `a_i = Σ_l W_il/∇⁺_il`,
/// `b_i = Σ_l W_il ∇⁻_il/∇⁺_il` and the multiplier `λ_i = (b_i − 1)/a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Optimizer settings for [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcdConfig {
    /// Dirichlet concentration; `1` means no prior.
    pub alpha: f64,
    pub max_iters: usize,
    /// Early stop once the relative change of the KL error across
    /// [`CONVERGENCE_WINDOW`] iterations drops below this. `0` disables it.
    pub rel_tol: f64,
    pub floor: f64,
    pub seed: u64,
}

impl Default for DcdConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            max_iters: 10_000,
            rel_tol: 1e-9,
            floor: DEFAULT_FLOOR,
            seed: 42,
        }
    }
}

impl DcdConfig {
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be a finite value >= 1, got {}",
                self.alpha
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be finite and nonnegative, got {}",
                self.rel_tol
            )));
        }
        if !(self.floor.is_finite() && self.floor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "floor must be positive, got {}",
                self.floor
            )));
        }
        Ok(())
    }

    fn validate_for(&self, n: usize, r: usize) -> Result<()> {
        self.validate()?;
        if self.floor * (n * r) as f64 >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "floor {} is not small against 1/(n*r) for n={n}, r={r}",
                self.floor
            )));
        }
        Ok(())
    }
}

/// One optimizer iteration. Objective values refer to the updated matrix;
/// both Lagrangian values use the multipliers of this iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub kl_error: f64,
    pub penalized_objective: f64,
    pub lagrangian_before: f64,
    pub lagrangian_after: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl RunTrace {
    /// Writes one JSON object per iteration, newline separated.
    pub fn write_json_lines<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Failure of [`run`], carrying the iterations completed before the error.
#[derive(Debug, thiserror::Error)]
#[error("{source} (after {} iterations)", trace.iterations_run)]
pub struct RunError {
    pub source: Error,
    pub trace: RunTrace,
}

/// Quantities of `W` shared by the objective and the gradient: the column
/// sums and `Â` evaluated on the CSR support of `A`.
struct Evaluation {
    inv_col_sums: Vec<f64>,
    col_sums: Vec<f64>,
    ahat_support: Vec<f64>,
    /// `Σ_supp A_ij log Â_ij`
    log_likelihood: f64,
}

impl Evaluation {
    fn new(graph: &SparseSimilarity, w: &AssignmentMatrix) -> Result<Self> {
        check_shape(graph, w)?;
        let col_sums = w.column_sums();
        let inv_col_sums = inverse_column_sums(&col_sums)?;
        let wv = w.view();
        let r = w.r();
        let mut ahat_support = Vec::with_capacity(graph.nnz());
        let mut log_likelihood = 0.0;
        for i in 0..graph.n() {
            for (j, a_ij) in graph.neighbors(i) {
                // (W_ik W_jk)/s_k keeps Â_ij and Â_ji bitwise equal.
                let mut ahat = 0.0;
                for k in 0..r {
                    ahat += wv[[i, k]] * wv[[j, k]] * inv_col_sums[k];
                }
                if ahat.is_nan() || ahat <= 0.0 {
                    return Err(Error::NumericDegeneracy(format!(
                        "approximation vanished at support entry ({i}, {j})"
                    )));
                }
                log_likelihood += a_ij * ahat.ln();
                ahat_support.push(ahat);
            }
        }
        Ok(Self {
            inv_col_sums,
            col_sums,
            ahat_support,
            log_likelihood,
        })
    }

    fn kl_error(&self, graph: &SparseSimilarity) -> f64 {
        let mut divergence = 0.0;
        for (&a_ij, &ahat) in graph.values().iter().zip(&self.ahat_support) {
            divergence += a_ij * (a_ij / ahat).ln();
        }
        divergence - graph.total_weight() + self.col_sums.iter().sum::<f64>()
    }

    fn penalized_objective(&self, w: &AssignmentMatrix, alpha: f64) -> f64 {
        -self.log_likelihood - (alpha - 1.0) * log_sum(w)
    }
}

fn check_shape(graph: &SparseSimilarity, w: &AssignmentMatrix) -> Result<()> {
    if graph.n() != w.n() {
        return Err(Error::InvalidInput(format!(
            "graph has {} nodes but assignment matrix has {} rows",
            graph.n(),
            w.n()
        )));
    }
    Ok(())
}

fn inverse_column_sums(col_sums: &[f64]) -> Result<Vec<f64>> {
    col_sums
        .iter()
        .enumerate()
        .map(|(cluster, &s)| {
            if s < DEGENERATE_COLUMN_SUM {
                Err(Error::DegenerateCluster {
                    cluster,
                    column_sum: s,
                })
            } else {
                Ok(1.0 / s)
            }
        })
        .collect()
}

fn log_sum(w: &AssignmentMatrix) -> f64 {
    w.view().iter().map(|v| v.ln()).sum()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must be a finite value >= 1, got {alpha}"
        )))
    }
}

/// Dense `Â_ij = Σ_k W_ik W_jk / s_k`. Intended for small `n`.
pub fn a_hat(w: &AssignmentMatrix) -> Result<Array2<f64>> {
    let inv = inverse_column_sums(&w.column_sums())?;
    let n = w.n();
    let wv = w.view();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (k, inv_k) in inv.iter().enumerate() {
                acc += wv[[i, k]] * wv[[j, k]] * inv_k;
            }
            out[[i, j]] = acc;
        }
    }
    Ok(out)
}

/// Generalized KL divergence `D(A‖Â) = Σ_ij A_ij log(A_ij/Â_ij) − A_ij + Â_ij`,
/// evaluated on the support of `A` plus the closed form `Σ_ij Â_ij = Σ_k s_k`.
pub fn kl_error(graph: &SparseSimilarity, w: &AssignmentMatrix) -> Result<f64> {
    Ok(Evaluation::new(graph, w)?.kl_error(graph))
}

/// `J(W) = −Σ_ij A_ij log Â_ij − (α − 1) Σ_ik log W_ik`.
pub fn penalized_objective(
    graph: &SparseSimilarity,
    w: &AssignmentMatrix,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Evaluation::new(graph, w)?.penalized_objective(w, alpha))
}

/// `L(W, λ) = J(W) + Σ_i λ_i (Σ_k W_ik − 1)`.
pub fn lagrangian(
    graph: &SparseSimilarity,
    w: &AssignmentMatrix,
    lambda: &[f64],
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let eval = Evaluation::new(graph, w)?;
    lagrangian_from(&eval, w, lambda, alpha)
}

fn lagrangian_from(
    eval: &Evaluation,
    w: &AssignmentMatrix,
    lambda: &[f64],
    alpha: f64,
) -> Result<f64> {
    if lambda.len() != w.n() {
        return Err(Error::InvalidInput(format!(
            "expected {} multipliers, got {}",
            w.n(),
            lambda.len()
        )));
    }
    let constraint: f64 = w
        .row_sums()
        .iter()
        .zip(lambda)
        .map(|(sum, l)| l * (sum - 1.0))
        .sum();
    Ok(eval.penalized_objective(w, alpha) + constraint)
}

/// Splits the gradient of `J` into
///
/// ```text
/// ∇⁻_ik = 2 (ZW)_ik / s_k + α / W_ik
/// ∇⁺_ik = (WᵀZW)_kk / s_k² + 1 / W_ik
/// ```
pub fn gradient_split(
    graph: &SparseSimilarity,
    w: &AssignmentMatrix,
    alpha: f64,
) -> Result<GradientSplit> {
    check_alpha(alpha)?;
    let eval = Evaluation::new(graph, w)?;
    Ok(gradient_from(graph, w, &eval, alpha))
}

fn gradient_from(
    graph: &SparseSimilarity,
    w: &AssignmentMatrix,
    eval: &Evaluation,
    alpha: f64,
) -> GradientSplit {
    let (n, r) = (w.n(), w.r());
    let wv = w.view();

    // ZW restricted to the support of A.
    let mut zw = Array2::<f64>::zeros((n, r));
    let mut pos = 0;
    for i in 0..n {
        for (j, a_ij) in graph.neighbors(i) {
            let z = a_ij / eval.ahat_support[pos];
            pos += 1;
            for k in 0..r {
                zw[[i, k]] += z * wv[[j, k]];
            }
        }
    }

    // diag(WᵀZW)
    let mut quad = vec![0.0; r];
    for i in 0..n {
        for k in 0..r {
            quad[k] += wv[[i, k]] * zw[[i, k]];
        }
    }

    let mut positive = Array2::zeros((n, r));
    let mut negative = Array2::zeros((n, r));
    for i in 0..n {
        for k in 0..r {
            let inv_w = 1.0 / wv[[i, k]];
            let inv_s = eval.inv_col_sums[k];
            negative[[i, k]] = 2.0 * zw[[i, k]] * inv_s + alpha * inv_w;
            positive[[i, k]] = quad[k] * inv_s * inv_s + inv_w;
        }
    }
    GradientSplit { positive, negative }
}

/// Computes `a_i`, `b_i` and `λ_i = (b_i − 1)/a_i`.
pub fn multipliers(w: &AssignmentMatrix, grads: &GradientSplit) -> Result<MultiplierState> {
    if grads.positive.dim() != w.view().dim() || grads.negative.dim() != w.view().dim() {
        return Err(Error::InvalidInput(
            "gradient shape does not match W".into(),
        ));
    }
    let n = w.n();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for ((w_row, pos_row), neg_row) in w
        .view()
        .rows()
        .into_iter()
        .zip(grads.positive.rows())
        .zip(grads.negative.rows())
    {
        let mut a_i = 0.0;
        let mut b_i = 0.0;
        for ((&w_il, &p), &m) in w_row.iter().zip(pos_row.iter()).zip(neg_row.iter()) {
            a_i += w_il / p;
            b_i += w_il * m / p;
        }
        a.push(a_i);
        b.push(b_i);
    }
    let lambda = a
        .iter()
        .zip(&b)
        .map(|(a_i, b_i)| (b_i - 1.0) / a_i)
        .collect();
    Ok(MultiplierState { a, b, lambda })
}

fn apply_update(
    w: &AssignmentMatrix,
    grads: &GradientSplit,
    mult: &MultiplierState,
    floor: f64,
) -> AssignmentMatrix {
    let mut next = w.values.clone();
    for (i, mut row) in next.rows_mut().into_iter().enumerate() {
        let (a_i, b_i) = (mult.a[i], mult.b[i]);
        for (k, w_ik) in row.iter_mut().enumerate() {
            let ratio = (grads.negative[[i, k]] * a_i + 1.0) / (grads.positive[[i, k]] * a_i + b_i);
            *w_ik = (*w_ik * ratio).max(floor);
        }
    }
    AssignmentMatrix { values: next }
}

/// One relaxed MM update
/// `W_ik ← W_ik (∇⁻_ik a_i + 1) / (∇⁺_ik a_i + b_i)`, clamped below at
/// [`DEFAULT_FLOOR`]. Returns the new matrix and the multipliers used.
pub fn dcd_step(
    graph: &SparseSimilarity,
    w: &AssignmentMatrix,
    alpha: f64,
) -> Result<(AssignmentMatrix, MultiplierState)> {
    check_alpha(alpha)?;
    let eval = Evaluation::new(graph, w)?;
    let grads = gradient_from(graph, w, &eval, alpha);
    let mult = multipliers(w, &grads)?;
    let next = apply_update(w, &grads, &mult, DEFAULT_FLOOR);
    Ok((next, mult))
}

/// Iterates the relaxed MM update from `w0`.
///
/// Stops after `config.max_iters` iterations or once the KL error changed by
/// less than `config.rel_tol` (relative) over the last
/// [`CONVERGENCE_WINDOW`] iterations.
pub fn run(
    graph: &SparseSimilarity,
    w0: &AssignmentMatrix,
    config: &DcdConfig,
) -> std::result::Result<(AssignmentMatrix, RunTrace), RunError> {
    let mut trace = RunTrace::default();
    let fail = |source: Error, trace: RunTrace| RunError { source, trace };

    if let Err(e) = config
        .validate_for(w0.n(), w0.r())
        .and_then(|_| check_shape(graph, w0))
    {
        return Err(fail(e, trace));
    }

    let mut w = w0.clone();
    let mut eval = match Evaluation::new(graph, &w) {
        Ok(e) => e,
        Err(e) => return Err(fail(e, trace)),
    };

    for iteration in 0..config.max_iters {
        let grads = gradient_from(graph, &w, &eval, config.alpha);
        let step = multipliers(&w, &grads).and_then(|mult| {
            let next = apply_update(&w, &grads, &mult, config.floor);
            let next_eval = Evaluation::new(graph, &next)?;
            let before = lagrangian_from(&eval, &w, &mult.lambda, config.alpha)?;
            let after = lagrangian_from(&next_eval, &next, &mult.lambda, config.alpha)?;
            Ok((next, next_eval, before, after))
        });
        let (next, next_eval, before, after) = match step {
            Ok(s) => s,
            Err(e) => return Err(fail(e, trace)),
        };

        trace.records.push(IterationRecord {
            iteration,
            kl_error: next_eval.kl_error(graph),
            penalized_objective: next_eval.penalized_objective(&next, config.alpha),
            lagrangian_before: before,
            lagrangian_after: after,
        });
        trace.iterations_run = iteration + 1;
        w = next;
        eval = next_eval;

        if has_converged(&trace.records, config.rel_tol) {
            trace.converged = true;
            break;
        }
    }
    Ok((w, trace))
}

fn has_converged(records: &[IterationRecord], rel_tol: f64) -> bool {
    let t = records.len();
    if t <= CONVERGENCE_WINDOW {
        return false;
    }
    let current = records[t - 1].kl_error;
    let past = records[t - 1 - CONVERGENCE_WINDOW].kl_error;
    (current - past).abs() / past.abs().max(f64::EPSILON) < rel_tol
}
