//! Test-only oracles. Everything here is written with plain loops over
//! matrix entries so it shares no code path with the library kernels.

#![allow(dead_code)]

use parafac2::linalg::random::Sampler;
use parafac2::DenseMatrix;

/// Elementwise `Σ_k Σ_ij (A_k − B_k)_ij²`.
pub fn naive_sq_dist(a: &[DenseMatrix], b: &[DenseMatrix]) -> f64 {
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let d = x[(i, j)] - y[(i, j)];
                total += d * d;
            }
        }
    }
    total
}

/// Triple-loop matrix product.
pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|l| a[(i, l)] * b[(l, j)]).sum()
    })
}

pub fn naive_transpose(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.cols(), a.rows(), |i, j| a[(j, i)])
}

/// `Q_k H S_k Vᵀ` by loops.
pub fn naive_model_slice(
    q: &DenseMatrix,
    h: &DenseMatrix,
    w_row: &[f64],
    v: &DenseMatrix,
) -> DenseMatrix {
    let r = h.rows();
    DenseMatrix::from_fn(q.rows(), v.rows(), |i, j| {
        let mut s = 0.0;
        for a in 0..r {
            for b in 0..r {
                s += q[(i, a)] * h[(a, b)] * w_row[b] * v[(j, b)];
            }
        }
        s
    })
}

/// MTTKRP of the `R × J × K` tensor given as slices `Y_k` (`R × J`),
/// straight from the definition. Mode 1 returns `R × R`, mode 2 `J × R`,
/// mode 3 `K × R`.
pub fn naive_mttkrp(
    y: &[DenseMatrix],
    mode: usize,
    h: &DenseMatrix,
    v: &DenseMatrix,
    w: &DenseMatrix,
) -> DenseMatrix {
    let (r, j, k) = (y[0].rows(), y[0].cols(), y.len());
    let rank = h.cols();
    match mode {
        1 => DenseMatrix::from_fn(r, rank, |i, c| {
            let mut s = 0.0;
            for kk in 0..k {
                for jj in 0..j {
                    s += y[kk][(i, jj)] * v[(jj, c)] * w[(kk, c)];
                }
            }
            s
        }),
        2 => DenseMatrix::from_fn(j, rank, |jj, c| {
            let mut s = 0.0;
            for kk in 0..k {
                for i in 0..r {
                    s += y[kk][(i, jj)] * h[(i, c)] * w[(kk, c)];
                }
            }
            s
        }),
        3 => DenseMatrix::from_fn(k, rank, |kk, c| {
            let mut s = 0.0;
            for i in 0..r {
                for jj in 0..j {
                    s += y[kk][(i, jj)] * h[(i, c)] * v[(jj, c)];
                }
            }
            s
        }),
        _ => panic!("mode {mode}"),
    }
}

pub fn rel_fro_err(got: &DenseMatrix, want: &DenseMatrix) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..want.rows() {
        for j in 0..want.cols() {
            num += (got[(i, j)] - want[(i, j)]).powi(2);
            den += want[(i, j)].powi(2);
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// `max |MᵀM − I|` by loops.
pub fn gram_deviation(m: &DenseMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..m.cols() {
        for b in 0..m.cols() {
            let s: f64 = (0..m.rows()).map(|i| m[(i, a)] * m[(i, b)]).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
    }
    worst
}

/// `1 − Σ‖X_k − X̂_k‖² / Σ‖X_k‖²` by loops.
pub fn naive_fitness(x: &[DenseMatrix], approx: &[DenseMatrix]) -> f64 {
    let norm: f64 = x.iter().flat_map(|s| s.as_slice()).map(|v| v * v).sum();
    1.0 - naive_sq_dist(x, approx) / norm
}

/// Indices sorted by (score descending, index ascending) with a plain
/// insertion sort, target removed, first `k` kept.
pub fn exhaustive_knn(scores: &[f64], target: usize, k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for i in 0..scores.len() {
        if i == target {
            continue;
        }
        let mut pos = out.len();
        while pos > 0 {
            let prev = out[pos - 1];
            if scores[prev] > scores[i] || (scores[prev] == scores[i] && prev < i) {
                break;
            }
            pos -= 1;
        }
        out.insert(pos, i);
    }
    out.truncate(k);
    out
}

pub fn random_slices(rng: &mut Sampler, rows: &[usize], cols: usize) -> Vec<DenseMatrix> {
    rows.iter().map(|&i| rng.gaussian(i, cols)).collect()
}
