use super::matrix::DenseMatrix;

/// Orthonormal factor of the thin Householder QR of a tall matrix.
///
/// Returns `Q` with the same shape as `y` (`m × p`, `m >= p`) and
/// `QᵀQ = I`, even when `y` is rank deficient.
pub fn thin_qr_q(y: &DenseMatrix) -> DenseMatrix {
    let (m, p) = y.shape();
    assert!(m >= p, "thin QR needs rows >= cols, got {m}x{p}");

    // Column-major copy; reflector k is stored in column k below the diagonal.
    let mut a: Vec<f64> = (0..p)
        .flat_map(|j| (0..m).map(move |i| (i, j)))
        .map(|(i, j)| y[(i, j)])
        .collect();
    let mut betas = vec![0.0; p];

    for k in 0..p {
        let col = &mut a[k * m..(k + 1) * m];
        let norm = col[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            betas[k] = 0.0;
            continue;
        }
        let alpha = if col[k] >= 0.0 { -norm } else { norm };
        col[k] -= alpha;
        let vnorm_sq: f64 = col[k..].iter().map(|x| x * x).sum();
        betas[k] = if vnorm_sq > 0.0 { 2.0 / vnorm_sq } else { 0.0 };
        let (head, tail) = a.split_at_mut((k + 1) * m);
        let v = &head[k * m + k..(k + 1) * m];
        for j in 0..p - k - 1 {
            let c = &mut tail[j * m + k..(j + 1) * m];
            let dot: f64 = v.iter().zip(c.iter()).map(|(x, y)| x * y).sum();
            let f = betas[k] * dot;
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci -= f * vi;
            }
        }
    }

    // Apply H_0 ... H_{p-1} to the first p columns of the identity.
    let mut q = vec![0.0; m * p];
    for j in 0..p {
        q[j * m + j] = 1.0;
    }
    for k in (0..p).rev() {
        if betas[k] == 0.0 {
            continue;
        }
        let v = &a[k * m + k..(k + 1) * m];
        for j in 0..p {
            let c = &mut q[j * m + k..(j + 1) * m];
            let dot: f64 = v.iter().zip(c.iter()).map(|(x, y)| x * y).sum();
            let f = betas[k] * dot;
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci -= f * vi;
            }
        }
    }
    DenseMatrix::from_fn(m, p, |i, j| q[j * m + i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gram, random::gaussian_matrix};

    #[test]
    fn q_is_orthonormal_and_spans_y() {
        let y = gaussian_matrix(12, 4, 3);
        let q = thin_qr_q(&y);
        assert!(gram(&q).max_abs_diff(&DenseMatrix::identity(4)) < 1e-13);
        // Y = Q (QᵀY)
        let proj = q.matmul(&q.t_matmul(&y));
        assert!(proj.max_abs_diff(&y) < 1e-12);
    }

    #[test]
    fn rank_deficient_and_zero_inputs() {
        let mut y = gaussian_matrix(6, 3, 8);
        for i in 0..6 {
            y[(i, 2)] = 2.0 * y[(i, 0)];
        }
        let q = thin_qr_q(&y);
        assert!(gram(&q).max_abs_diff(&DenseMatrix::identity(3)) < 1e-13);
        let z = thin_qr_q(&DenseMatrix::zeros(5, 2));
        assert!(gram(&z).max_abs_diff(&DenseMatrix::identity(2)) < 1e-15);
    }
}
