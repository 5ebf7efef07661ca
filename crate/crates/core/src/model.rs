//! Types shared by both solvers: options, factors, and the iteration trace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scheduler::default_threads;
use crate::tensor::IrregularTensor;

/// Starting point for `V`; `H` and every `S_k` always start at the identity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initialization {
    /// First `R` columns of `I_J`.
    Identity,
    /// Leading `R` right singular vectors of the stacked slices. The
    /// compressed solver uses `D`, the baseline the eigenvectors of
    /// `Σ_k X_kᵀ X_k`.
    #[default]
    Svd,
}

/// Configuration shared by the baseline and compressed solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once `|e_prev - e| / e_prev` falls below this.
    pub tol: f64,
    /// Seeds the randomized SVDs of the compressed solver.
    pub seed: u64,
    pub threads: usize,
    /// Column-normalize `H` and `V` after their updates, moving the norms
    /// into `W`. `None` picks the solver default: on for the compressed
    /// solver, off for the baseline.
    pub normalize: Option<bool>,
    pub oversampling: usize,
    pub power_iters: usize,
    pub init: Initialization,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 32,
            tol: 1e-6,
            seed: 0,
            threads: default_threads(),
            normalize: None,
            oversampling: 10,
            power_iters: 1,
            init: Initialization::Svd,
        }
    }
}

impl SolverOptions {
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = Some(normalize);
        self
    }

    pub fn with_init(mut self, init: Initialization) -> Self {
        self.init = init;
        self
    }
}

/// PARAFAC2 factors: `X_k ≈ Q_k H S_k Vᵀ` with `S_k = diag(W(k, :))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parafac2Factors {
    pub h: DenseMatrix,
    pub v: DenseMatrix,
    pub w: DenseMatrix,
    pub q: Vec<DenseMatrix>,
}

impl Parafac2Factors {
    pub fn rank(&self) -> usize {
        self.h.rows()
    }

    pub fn num_slices(&self) -> usize {
        self.q.len()
    }

    /// `U_k = Q_k H`.
    pub fn u(&self, k: usize) -> DenseMatrix {
        self.q[k].matmul(&self.h)
    }

    /// Diagonal of `S_k`.
    pub fn s(&self, k: usize) -> &[f64] {
        self.w.row(k)
    }

    /// `Q_k H S_k Vᵀ`.
    pub fn reconstruct_slice(&self, k: usize) -> DenseMatrix {
        let mut us = self.u(k);
        us.scale_columns(self.s(k));
        us.matmul_t(&self.v)
    }

    /// Checks that shapes agree with a tensor.
    pub fn check_against(&self, x: &IrregularTensor) -> Result<()> {
        let r = self.rank();
        let ok = self.h.cols() == r
            && self.v.shape() == (x.num_cols(), r)
            && self.w.shape() == (x.num_slices(), r)
            && self.q.len() == x.num_slices()
            && self
                .q
                .iter()
                .zip(x.slices())
                .all(|(q, s)| q.shape() == (s.rows(), r));
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                "factors do not match tensor shape".into(),
            ))
        }
    }
}

/// One row of the iteration trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub seconds: f64,
}

/// Result of a solver run.
#[derive(Clone, Debug)]
pub struct FitOutput {
    pub factors: Parafac2Factors,
    pub trace: Vec<IterationRecord>,
    /// Compression time; zero for the baseline.
    pub preprocess_seconds: f64,
    /// Size of the compressed representation; `None` for the baseline.
    pub compressed_float_count: Option<usize>,
}

impl FitOutput {
    pub fn objectives(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }

    pub fn iteration_seconds(&self) -> f64 {
        self.trace.iter().map(|r| r.seconds).sum()
    }

    pub fn mean_iteration_seconds(&self) -> f64 {
        if self.trace.is_empty() {
            0.0
        } else {
            self.iteration_seconds() / self.trace.len() as f64
        }
    }
}

/// Deterministic starting point shared by both solvers: `H = I_R`,
/// `V` = first `R` columns of `I_J`, `S_k = I_R`.
pub(crate) fn initial_factors(
    j: usize,
    k: usize,
    r: usize,
) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    let h = DenseMatrix::identity(r);
    let v = DenseMatrix::from_fn(j, r, |a, b| if a == b { 1.0 } else { 0.0 });
    let w = DenseMatrix::from_fn(k, r, |_, _| 1.0);
    (h, v, w)
}

/// Scales columns of `m` to unit 2-norm and multiplies the norms into the
/// matching columns of `w`. Columns with norm below `1e-300` are left alone.
pub(crate) fn normalize_columns_into(m: &mut DenseMatrix, w: &mut DenseMatrix) {
    let r = m.cols();
    let norms: Vec<f64> = (0..r)
        .map(|c| {
            let n = (0..m.rows())
                .map(|i| m[(i, c)] * m[(i, c)])
                .sum::<f64>()
                .sqrt();
            if n < 1e-300 {
                1.0
            } else {
                n
            }
        })
        .collect();
    let inv: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
    m.scale_columns(&inv);
    w.scale_columns(&norms);
}

/// Relative-change stopping rule.
pub(crate) fn converged(prev: f64, current: f64, tol: f64) -> bool {
    if prev <= 0.0 {
        return true;
    }
    ((prev - current).abs() / prev) < tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_column_is_left_unnormalized() {
        let mut h = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![4.0, 0.0]]).unwrap();
        let mut w = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        normalize_columns_into(&mut h, &mut w);
        assert!((h[(0, 0)] - 0.6).abs() < 1e-15 && (h[(1, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(h.column(1), vec![0.0, 0.0]);
        assert_eq!(w.row(0), &[5.0, 2.0]);
    }

    #[test]
    fn stopping_rule() {
        assert!(converged(0.0, 0.0, 1e-6));
        assert!(converged(1.0, 1.0 - 1e-8, 1e-6));
        assert!(!converged(1.0, 0.5, 1e-6));
    }
}
