use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use super::qr::thin_qr_q;
use super::random::Sampler;
use super::svd::{fix_signs, truncated_svd, SvdTriple};
use crate::error::{Error, Result};

/// Parameters of the randomized range finder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsvdParams {
    pub target_rank: usize,
    /// Extra sketch columns. Clamped to `min(rows, cols) - target_rank` per call.
    pub oversampling: usize,
    /// Number of `A Aᵀ` power iterations.
    pub power_iters: usize,
    pub seed: u64,
}

impl RsvdParams {
    pub fn new(target_rank: usize, seed: u64) -> Self {
        Self {
            target_rank,
            oversampling: 10,
            power_iters: 1,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Sketch width `R + s` used for an `rows × cols` input.
    pub fn sketch_width(&self, rows: usize, cols: usize) -> usize {
        let room = rows.min(cols).saturating_sub(self.target_rank);
        self.target_rank + self.oversampling.min(room)
    }
}

/// Rank-`R` randomized SVD of `a`.
///
/// Draws a Gaussian test matrix `Ω` (`cols × (R+s)`), forms the range sketch
/// `Y = (A Aᵀ)^q A Ω`, orthonormalizes it to `Q`, takes the exact SVD of the
/// small matrix `B = Qᵀ A`, and lifts the left factor back as `U = Q Ũ`.
/// The power iterations re-orthonormalize after every product with `A` or
/// `Aᵀ`; this keeps the sketch well conditioned without changing its range.
pub fn randomized_svd(a: &DenseMatrix, params: &RsvdParams) -> Result<SvdTriple> {
    let (m, n) = a.shape();
    let r = params.target_rank;
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    if r > m.min(n) {
        return Err(Error::RankTooLarge {
            rank: r,
            rows: m,
            cols: n,
        });
    }
    a.check_finite()?;

    let width = params.sketch_width(m, n);
    let omega = Sampler::new(params.seed).gaussian(n, width);
    let mut q = thin_qr_q(&a.matmul(&omega));
    for _ in 0..params.power_iters {
        let z = thin_qr_q(&a.t_matmul(&q));
        q = thin_qr_q(&a.matmul(&z));
    }
    let b = q.t_matmul(a);
    let small = truncated_svd(&b, r)?;
    let mut out = SvdTriple {
        u: q.matmul(&small.u),
        s: small.s,
        v: small.v,
    };
    // Q Ũ keeps the sign of Ũ's columns only up to Q; re-apply the convention.
    fix_signs(&mut out);
    Ok(out)
}
