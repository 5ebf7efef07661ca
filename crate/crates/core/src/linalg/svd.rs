//! Exact SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! One-sided Jacobi orthogonalizes the columns of `A` in place while
//! accumulating the rotations into `V`. Column norms at convergence are the
//! singular values, and the normalized columns are the left singular vectors.
//! Its relative accuracy on small singular values is what lets the solver
//! rely on exact orthonormality of `Z_k` and `P_k`.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Rank-`r` factorization `U · diag(S) · Vᵀ`.
///
/// `U` is `m × r` and `V` is `n × r`, both column-orthonormal; `S` is sorted
/// descending and nonnegative. The largest-magnitude entry of every column of
/// `U` is nonnegative (first such entry on ties), with `V` flipped to match.
#[derive(Clone, Debug)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdTriple {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U · diag(S) · Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        us.scale_columns(&self.s);
        us.matmul_t(&self.v)
    }

    fn truncate(mut self, r: usize) -> Self {
        if r < self.s.len() {
            self.u = self.u.leading_columns(r);
            self.v = self.v.leading_columns(r);
            self.s.truncate(r);
        }
        self
    }
}

/// Best rank-`r` approximation (Eckart–Young) from an exact SVD.
pub fn truncated_svd(a: &DenseMatrix, r: usize) -> Result<SvdTriple> {
    let (m, n) = a.shape();
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
    let full = if m >= n {
        jacobi_tall(a)?
    } else {
        let t = jacobi_tall(&a.transpose())?;
        let mut swapped = SvdTriple {
            u: t.v,
            s: t.s,
            v: t.u,
        };
        fix_signs(&mut swapped);
        swapped
    };
    Ok(full.truncate(r))
}

/// Thin SVD of a matrix with `m >= n`: `U` is `m × n`, `V` is `n × n`.
fn jacobi_tall(a: &DenseMatrix) -> Result<SvdTriple> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);

    // Column-major working copies so that each column is contiguous.
    let mut u: Vec<f64> = (0..n)
        .flat_map(|j| (0..m).map(move |i| (i, j)))
        .map(|(i, j)| a[(i, j)])
        .collect();
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }

    let tol = f64::EPSILON * (m as f64).sqrt().max(1.0);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let cp = &u[p * m..(p + 1) * m];
                    let cq = &u[q * m..(q + 1) * m];
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, m, p, q, c, s);
                rotate(&mut v, n, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let sigma: Vec<f64> = (0..n)
        .map(|j| {
            u[j * m..(j + 1) * m]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));

    let smax = sigma[order[0]];
    let floor = smax * f64::EPSILON * m as f64;
    let mut umat = DenseMatrix::zeros(m, n);
    let mut vmat = DenseMatrix::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[src];
        let col = &u[src * m..(src + 1) * m];
        if s > floor && s > f64::MIN_POSITIVE {
            for i in 0..m {
                umat[(i, dst)] = col[i] / s;
            }
            sorted.push(s);
        } else {
            // Direction is numerically meaningless; rebuilt below.
            deficient.push(dst);
            sorted.push(if s > floor { s } else { 0.0 });
        }
        for i in 0..n {
            vmat[(i, dst)] = v[src * n + i];
        }
    }
    complete_basis(&mut umat, &deficient);

    let mut out = SvdTriple {
        u: umat,
        s: sorted,
        v: vmat,
    };
    fix_signs(&mut out);
    Ok(out)
}

#[inline]
fn rotate(buf: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = buf.split_at_mut(q * len);
    let cp = &mut head[p * len..(p + 1) * len];
    let cq = &mut tail[..len];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column, drawing candidates from the standard basis.
pub(crate) fn complete_basis(u: &mut DenseMatrix, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let (m, n) = u.shape();
    let mut filled: Vec<usize> = (0..n).filter(|j| !missing.contains(j)).collect();
    let mut candidate = 0usize;
    for &target in missing {
        loop {
            assert!(candidate < m, "cannot complete an orthonormal basis");
            let mut w = vec![0.0; m];
            w[candidate] = 1.0;
            candidate += 1;
            // Two rounds of Gram-Schmidt.
            for _ in 0..2 {
                for &j in &filled {
                    let dot: f64 = (0..m).map(|i| u[(i, j)] * w[i]).sum();
                    for (i, wi) in w.iter_mut().enumerate() {
                        *wi -= dot * u[(i, j)];
                    }
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 / (m as f64).sqrt() {
                for (i, wi) in w.iter().enumerate() {
                    u[(i, target)] = wi / norm;
                }
                filled.push(target);
                break;
            }
        }
    }
}

pub(crate) fn fix_signs(svd: &mut SvdTriple) {
    let (m, r) = svd.u.shape();
    for j in 0..r {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for i in 0..m {
            let x = svd.u[(i, j)];
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            for i in 0..m {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
            for i in 0..svd.v.rows() {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
        }
    }
}
