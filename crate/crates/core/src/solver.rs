//! PARAFAC2-ALS carried out entirely on the compressed representation.
//!
//! With `X_k ≈ A_k F^(k) E Dᵀ` and the rotation `Q_k = A_k Z_k P_kᵀ`, the
//! projected slice is `Y_k = P_k Z_kᵀ F^(k) E Dᵀ`. Every quantity the
//! iteration needs is a product of `R × R` and `J × R` matrices, so one
//! iteration costs `O(J R² + K R³)` instead of touching the `Σ I_k J`
//! input entries.

use std::time::Instant;

use crate::baseline::check_options;
use crate::compressor::{compress, CompressedTensor};
use crate::error::{Error, Result};
use crate::linalg::{gram, hadamard, pinv_small, truncated_svd, DenseMatrix, RsvdParams};
use crate::model::{
    converged, initial_factors, normalize_columns_into, FitOutput, Initialization, IterationRecord,
    Parafac2Factors, SolverOptions,
};
use crate::scheduler::{greedy_partition, Executor};
use crate::tensor::IrregularTensor;

/// SVD of `F^(k) E Dᵀ V S_k Hᵀ = Z_k Σ_k P_kᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceRotation {
    pub z: DenseMatrix,
    pub sigma: Vec<f64>,
    pub p: DenseMatrix,
}

/// Current factor estimates while iterating in compressed space.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub h: DenseMatrix,
    pub v: DenseMatrix,
    pub w: DenseMatrix,
}

impl SolverState {
    pub fn initial(c: &CompressedTensor, init: Initialization) -> Self {
        let (h, mut v, w) = initial_factors(c.num_cols(), c.num_slices(), c.rank());
        if init == Initialization::Svd {
            v = c.d().clone();
        }
        Self { h, v, w }
    }

    fn check(&self, c: &CompressedTensor) -> Result<()> {
        let r = c.rank();
        if self.h.shape() != (r, r)
            || self.v.shape() != (c.num_cols(), r)
            || self.w.shape() != (c.num_slices(), r)
        {
            return Err(Error::ShapeMismatch(format!(
                "state shapes H {:?}, V {:?}, W {:?} do not fit K={}, J={}, R={r}",
                self.h.shape(),
                self.v.shape(),
                self.w.shape(),
                c.num_slices(),
                c.num_cols()
            )));
        }
        Ok(())
    }
}

/// The `R × R` cores `L_k = P_k Z_kᵀ F^(k)`, so that `Y_k = L_k E Dᵀ`.
#[derive(Clone, Debug)]
pub struct ProjectedSlices {
    cores: Vec<DenseMatrix>,
}

impl ProjectedSlices {
    pub fn new(c: &CompressedTensor, rotations: &[SliceRotation], exec: &Executor) -> Result<Self> {
        if rotations.len() != c.num_slices() {
            return Err(Error::ShapeMismatch(format!(
                "{} rotations for {} slices",
                rotations.len(),
                c.num_slices()
            )));
        }
        let cores = exec.map_slices(c.num_slices(), |k| {
            let rot = &rotations[k];
            Ok(rot.p.matmul_t(&rot.z).matmul(&c.f_block(k)))
        })?;
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[DenseMatrix] {
        &self.cores
    }

    /// `Y_k = L_k E Dᵀ` (`R × J`); only used for checks.
    pub fn materialize(&self, c: &CompressedTensor) -> Vec<DenseMatrix> {
        let edt = c.e_dt();
        self.cores.iter().map(|l| l.matmul(&edt)).collect()
    }
}

/// `E Dᵀ V` (`R × R`).
fn e_dt_v(c: &CompressedTensor, v: &DenseMatrix) -> DenseMatrix {
    let mut m = c.d().t_matmul(v);
    m.scale_rows(c.e());
    m
}

/// Recomputes every `Q_k` through the SVD of `F^(k) E Dᵀ V S_k Hᵀ`.
pub fn update_rotations(
    c: &CompressedTensor,
    state: &SolverState,
    exec: &Executor,
) -> Result<Vec<SliceRotation>> {
    state.check(c)?;
    let r = c.rank();
    let edtv = e_dt_v(c, &state.v);
    exec.map_slices(c.num_slices(), |k| {
        let mut g = edtv.clone();
        g.scale_columns(state.w.row(k));
        let t = c.f_block(k).matmul(&g).matmul_t(&state.h);
        let svd = truncated_svd(&t, r)?;
        Ok(SliceRotation {
            z: svd.u,
            sigma: svd.s,
            p: svd.v,
        })
    })
}

fn sum_in_order(parts: Vec<DenseMatrix>) -> DenseMatrix {
    let mut it = parts.into_iter();
    let mut acc = it.next().expect("at least one slice");
    for p in it {
        acc.add_assign(&p);
    }
    acc
}

/// Mode-1 product `Y_(1)(W ⊙ V)` = `Σ_k L_k (E Dᵀ V) S_k`.
pub fn mttkrp_mode1(
    c: &CompressedTensor,
    y: &ProjectedSlices,
    w: &DenseMatrix,
    v: &DenseMatrix,
    exec: &Executor,
) -> Result<DenseMatrix> {
    let edtv = e_dt_v(c, v);
    let parts = exec.map_slices(c.num_slices(), |k| {
        let mut m = y.cores[k].matmul(&edtv);
        m.scale_columns(w.row(k));
        Ok(m)
    })?;
    Ok(sum_in_order(parts))
}

/// Mode-2 product `Y_(2)(W ⊙ H)` = `D E Σ_k L_kᵀ H S_k`.
pub fn mttkrp_mode2(
    c: &CompressedTensor,
    y: &ProjectedSlices,
    w: &DenseMatrix,
    h: &DenseMatrix,
    exec: &Executor,
) -> Result<DenseMatrix> {
    let parts = exec.map_slices(c.num_slices(), |k| {
        let mut m = y.cores[k].t_matmul(h);
        m.scale_columns(w.row(k));
        Ok(m)
    })?;
    let omega = sum_in_order(parts);
    let mut de = c.d().clone();
    de.scale_columns(c.e());
    Ok(de.matmul(&omega))
}

/// Mode-3 product `Y_(3)(V ⊙ H)`: row `k` holds the column sums of
/// `H ∗ (L_k E Dᵀ V)`.
pub fn mttkrp_mode3(
    c: &CompressedTensor,
    y: &ProjectedSlices,
    v: &DenseMatrix,
    h: &DenseMatrix,
    exec: &Executor,
) -> Result<DenseMatrix> {
    let r = c.rank();
    let edtv = e_dt_v(c, v);
    let rows = exec.map_slices(c.num_slices(), |k| {
        let m = y.cores[k].matmul(&edtv);
        Ok((0..r)
            .map(|col| (0..r).map(|i| h[(i, col)] * m[(i, col)]).sum())
            .collect::<Vec<f64>>())
    })?;
    Ok(DenseMatrix::from_fn(c.num_slices(), r, |k, col| {
        rows[k][col]
    }))
}

/// Updates `H`, `V`, `W` in that order, each using the freshest values.
pub fn update_factors(
    c: &CompressedTensor,
    y: &ProjectedSlices,
    state: &SolverState,
    normalize: bool,
    exec: &Executor,
) -> Result<SolverState> {
    state.check(c)?;
    let mut w = state.w.clone();
    let v = &state.v;

    let g1 = mttkrp_mode1(c, y, &w, v, exec)?;
    let mut h = g1.matmul(&pinv_small(&hadamard(&gram(&w), &gram(v))?)?);
    if normalize {
        normalize_columns_into(&mut h, &mut w);
    }

    let g2 = mttkrp_mode2(c, y, &w, &h, exec)?;
    let mut v = g2.matmul(&pinv_small(&hadamard(&gram(&w), &gram(&h))?)?);
    if normalize {
        normalize_columns_into(&mut v, &mut w);
    }

    let g3 = mttkrp_mode3(c, y, &v, &h, exec)?;
    let w = g3.matmul(&pinv_small(&hadamard(&gram(&v), &gram(&h))?)?);
    let next = SolverState { h, v, w };
    for m in [&next.h, &next.v, &next.w] {
        m.check_finite()?;
    }
    Ok(next)
}

/// `Σ_k ‖L_k E Dᵀ − H S_k Vᵀ‖_F²`, summed in slice order.
pub fn convergence_metric(
    c: &CompressedTensor,
    y: &ProjectedSlices,
    state: &SolverState,
    exec: &Executor,
) -> Result<f64> {
    let edt = c.e_dt();
    let parts = exec.map_slices(c.num_slices(), |k| {
        let mut hs = state.h.clone();
        hs.scale_columns(state.w.row(k));
        Ok(y.cores[k]
            .matmul(&edt)
            .sub(&hs.matmul_t(&state.v))
            .frobenius_norm_sq())
    })?;
    Ok(parts.iter().sum())
}

/// `Q_k = A_k Z_k P_kᵀ`.
pub fn materialize_q(
    c: &CompressedTensor,
    rotations: &[SliceRotation],
    exec: &Executor,
) -> Result<Vec<DenseMatrix>> {
    exec.map_slices(c.num_slices(), |k| {
        let rot = &rotations[k];
        Ok(c.a(k).matmul(&rot.z.matmul_t(&rot.p)))
    })
}

/// Iterates on an already compressed tensor.
pub fn fit_compressed(c: &CompressedTensor, opts: &SolverOptions) -> Result<FitOutput> {
    check_options(opts)?;
    let exec = Executor::new(opts.threads);
    let normalize = opts.normalize.unwrap_or(true);
    let mut state = SolverState::initial(c, opts.init);
    let mut rotations = update_rotations(c, &state, &exec)?;
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;

    for iteration in 1..=opts.max_iters {
        let start = Instant::now();
        if iteration > 1 {
            rotations = update_rotations(c, &state, &exec)?;
        }
        let y = ProjectedSlices::new(c, &rotations, &exec)?;
        state = update_factors(c, &y, &state, normalize, &exec)?;
        let objective = convergence_metric(c, &y, &state, &exec)?;
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

    // Final rotations are taken against the final H, V, W.
    let rotations = update_rotations(c, &state, &exec)?;
    let q = materialize_q(c, &rotations, &exec)?;
    Ok(FitOutput {
        factors: Parafac2Factors {
            h: state.h,
            v: state.v,
            w: state.w,
            q,
        },
        trace,
        preprocess_seconds: 0.0,
        compressed_float_count: Some(c.float_count()),
    })
}

/// The `RsvdParams` a solver run uses for compression.
pub fn rsvd_params(rank: usize, opts: &SolverOptions) -> RsvdParams {
    RsvdParams {
        target_rank: rank,
        oversampling: opts.oversampling,
        power_iters: opts.power_iters,
        seed: opts.seed,
    }
}

/// Compresses `x` with the row-balanced partition and fits in compressed
/// space.
pub fn fit_dpar2(x: &IrregularTensor, rank: usize, opts: &SolverOptions) -> Result<FitOutput> {
    check_options(opts)?;
    let start = Instant::now();
    let exec = Executor::new(opts.threads);
    let plan = greedy_partition(&x.row_counts(), exec.threads());
    let c = compress(x, &rsvd_params(rank, opts), &plan, &exec)?;
    let preprocess_seconds = start.elapsed().as_secs_f64();
    let mut out = fit_compressed(&c, opts)?;
    out.preprocess_seconds = preprocess_seconds;
    Ok(out)
}
