use super::matrix::DenseMatrix;
use super::svd::truncated_svd;
use crate::error::{Error, Result};

/// Moore–Penrose pseudoinverse of a small square matrix.
///
/// Singular values at or below `max(rows, cols) · σ_max · 1e-12` are treated
/// as zero.
pub fn pinv_small(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (m, n) = a.shape();
    if m != n {
        return Err(Error::ShapeMismatch(format!(
            "pinv_small expects a square matrix, got {m}x{n}"
        )));
    }
    let svd = truncated_svd(a, n)?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let tol = m.max(n) as f64 * smax * 1e-12;
    let inv: Vec<f64> = svd
        .s
        .iter()
        .map(|&s| if s > tol { 1.0 / s } else { 0.0 })
        .collect();
    // A⁺ = V Σ⁺ Uᵀ
    let mut v = svd.v;
    v.scale_columns(&inv);
    Ok(v.matmul_t(&svd.u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_singular_diagonal() {
        let i3 = DenseMatrix::identity(3);
        assert!(pinv_small(&i3).unwrap().max_abs_diff(&i3) < 1e-15);
        let d = DenseMatrix::diag(&[2.0, 0.0]);
        let p = pinv_small(&d).unwrap();
        assert!(p.max_abs_diff(&DenseMatrix::diag(&[0.5, 0.0])) < 1e-15);
    }

    #[test]
    fn zero_matrix_maps_to_zero() {
        let z = DenseMatrix::zeros(3, 3);
        assert_eq!(pinv_small(&z).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rejects_rectangular() {
        assert!(pinv_small(&DenseMatrix::zeros(2, 3)).is_err());
    }
}
