//! Reference PARAFAC2-ALS working directly on the uncompressed slices.
//!
//! Each iteration solves the orthogonal Procrustes problem for every `Q_k`,
//! projects `Y_k = Q_kᵀ X_k`, and runs one CP-ALS sweep on the `R × J × K`
//! tensor `Y` with explicit matricizations. This is deliberately the
//! straightforward route: it is the correctness oracle and speed baseline
//! for the compressed solver.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{gram, hadamard, khatri_rao, pinv_small, truncated_svd, DenseMatrix};
use crate::model::{
    converged, initial_factors, normalize_columns_into, FitOutput, Initialization, IterationRecord,
    Parafac2Factors, SolverOptions,
};
use crate::scheduler::Executor;
use crate::tensor::IrregularTensor;

/// Mode-`n` unfolding of an `R × J × K` tensor given as `K` slices `R × J`.
///
/// Column orderings follow the usual convention (earliest remaining mode
/// varies fastest): mode 1 is `R × JK` with column `j + k·J`; mode 2 is
/// `J × RK` with column `i + k·R`; mode 3 is `K × RJ` with column `i + j·R`.
pub fn matricize(y: &[DenseMatrix], mode: usize) -> Result<DenseMatrix> {
    let first = y
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty tensor".into()))?;
    let (r, j) = first.shape();
    if y.iter().any(|s| s.shape() != (r, j)) {
        return Err(Error::ShapeMismatch("Y slices differ in shape".into()));
    }
    let k = y.len();
    let m = match mode {
        1 => DenseMatrix::from_fn(r, j * k, |i, c| y[c / j][(i, c % j)]),
        2 => DenseMatrix::from_fn(j, r * k, |jj, c| y[c / r][(c % r, jj)]),
        3 => DenseMatrix::from_fn(k, r * j, |kk, c| y[kk][(c % r, c / r)]),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} is not 1, 2 or 3"
            )))
        }
    };
    Ok(m)
}

/// `Y_(n)` times the Khatri–Rao product of the other two factors, with
/// everything materialized.
pub fn mttkrp_explicit(
    y: &[DenseMatrix],
    mode: usize,
    h: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
) -> Result<DenseMatrix> {
    let kr = match mode {
        1 => khatri_rao(w, v)?,
        2 => khatri_rao(w, h)?,
        3 => khatri_rao(v, h)?,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} is not 1, 2 or 3"
            )))
        }
    };
    let unfolded = matricize(y, mode)?;
    if unfolded.cols() != kr.rows() {
        return Err(Error::ShapeMismatch(format!(
            "mode-{mode} unfolding has {} columns, Khatri-Rao product has {} rows",
            unfolded.cols(),
            kr.rows()
        )));
    }
    Ok(unfolded.matmul(&kr))
}

/// One CP-ALS sweep over modes 1, 2, 3 of `Y`, each using the freshest
/// factors. With `normalize`, `H` and `V` are column-normalized after their
/// updates and the norms are moved into `W`.
pub fn cp_als_step(
    y: &[DenseMatrix],
    h: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
    normalize: bool,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let r = h.cols();
    if h.shape() != (r, r) || v.cols() != r || w.cols() != r || w.rows() != y.len() {
        return Err(Error::ShapeMismatch(
            "cp_als_step: inconsistent factor shapes".into(),
        ));
    }
    if y.iter().any(|s| s.shape() != (r, v.rows())) {
        return Err(Error::ShapeMismatch(
            "cp_als_step: Y slices must be R x J".into(),
        ));
    }
    let mut w = w.clone();

    let g1 = mttkrp_explicit(y, 1, h, v, &w)?;
    let mut h = g1.matmul(&pinv_small(&hadamard(&gram(&w), &gram(v))?)?);
    if normalize {
        normalize_columns_into(&mut h, &mut w);
    }

    let g2 = mttkrp_explicit(y, 2, &h, v, &w)?;
    let mut v = g2.matmul(&pinv_small(&hadamard(&gram(&w), &gram(&h))?)?);
    if normalize {
        normalize_columns_into(&mut v, &mut w);
    }

    let g3 = mttkrp_explicit(y, 3, &h, &v, &w)?;
    let w = g3.matmul(&pinv_small(&hadamard(&gram(&v), &gram(&h))?)?);
    Ok((h, v, w))
}

fn check_rank(x: &IrregularTensor, r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    for (k, s) in x.slices().iter().enumerate() {
        if s.rows().min(s.cols()) < r {
            return Err(Error::RankTooLarge {
                rank: r,
                rows: s.rows(),
                cols: s.cols(),
            }
            .in_slice(k));
        }
    }
    Ok(())
}

pub(crate) fn check_options(opts: &SolverOptions) -> Result<()> {
    if opts.tol.is_nan() || opts.tol < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance {} must be >= 0",
            opts.tol
        )));
    }
    Ok(())
}

/// `Σ_k ‖X_k − Q_k H S_k Vᵀ‖_F²`, reduced in slice order.
pub fn reconstruction_error(
    x: &IrregularTensor,
    f: &Parafac2Factors,
    exec: &Executor,
) -> Result<f64> {
    f.check_against(x)?;
    let parts = exec.map_slices(x.num_slices(), |k| {
        Ok(x.slice(k).sub(&f.reconstruct_slice(k)).frobenius_norm_sq())
    })?;
    Ok(parts.iter().sum())
}

/// Top `r` eigenvectors of `Σ_k X_kᵀ X_k`.
fn leading_right_vectors(x: &IrregularTensor, r: usize, exec: &Executor) -> Result<DenseMatrix> {
    let grams = exec.map_slices(x.num_slices(), |k| Ok(gram(x.slice(k))))?;
    let mut it = grams.into_iter();
    let mut total = it.next().expect("K >= 1");
    for g in it {
        total.add_assign(&g);
    }
    Ok(truncated_svd(&total, r)?.u)
}

/// Orthogonal Procrustes step: `Q_k = Z' P'ᵀ` from the SVD of `X_k V S_k Hᵀ`.
fn update_q(x: &DenseMatrix, vsh: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let svd = truncated_svd(&x.matmul(vsh), r)?;
    Ok(svd.u.matmul_t(&svd.v))
}

/// PARAFAC2-ALS on the full tensor.
pub fn fit_baseline(x: &IrregularTensor, r: usize, opts: &SolverOptions) -> Result<FitOutput> {
    check_rank(x, r)?;
    check_options(opts)?;
    let exec = Executor::new(opts.threads);
    let normalize = opts.normalize.unwrap_or(false);
    let (mut h, mut v, mut w) = initial_factors(x.num_cols(), x.num_slices(), r);
    if opts.init == Initialization::Svd {
        v = leading_right_vectors(x, r, &exec)?;
    }
    let mut q: Vec<DenseMatrix> = Vec::new();
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;

    for iteration in 1..=opts.max_iters {
        let start = Instant::now();
        let (h_cur, v_cur, w_cur) = (&h, &v, &w);
        let qy = exec.map_slices(x.num_slices(), |k| {
            let mut sh = h_cur.clone();
            sh.scale_columns(w_cur.row(k));
            let vsh = v_cur.matmul_t(&sh);
            let qk = update_q(x.slice(k), &vsh, r)?;
            let yk = qk.t_matmul(x.slice(k));
            Ok((qk, yk))
        })?;
        let (qs, ys): (Vec<_>, Vec<_>) = qy.into_iter().unzip();
        (h, v, w) = cp_als_step(&ys, &h, &v, &w, normalize)?;
        q = qs;

        let factors = Parafac2Factors {
            h: h.clone(),
            v: v.clone(),
            w: w.clone(),
            q: q.clone(),
        };
        let objective = reconstruction_error(x, &factors, &exec)?;
        trace.push(IterationRecord {
            iteration,
            objective,
            seconds: start.elapsed().as_secs_f64(),
        });
        if let Some(p) = prev {
            if converged(p, objective, opts.tol) {
                break;
            }
        }
        prev = Some(objective);
    }

    if q.is_empty() {
        // max_iters == 0: report the initial state with a Procrustes Q.
        let exec_q = exec.map_slices(x.num_slices(), |k| {
            let mut sh = h.clone();
            sh.scale_columns(w.row(k));
            update_q(x.slice(k), &v.matmul_t(&sh), r)
        })?;
        q = exec_q;
    }

    Ok(FitOutput {
        factors: Parafac2Factors { h, v, w, q },
        trace,
        preprocess_seconds: 0.0,
        compressed_float_count: None,
    })
}
