use super::matrix::{gemm, DenseMatrix, Trans};
use crate::error::{Error, Result};

/// `AᵀA`.
pub fn gram(a: &DenseMatrix) -> DenseMatrix {
    gemm(a, Trans::Yes, a, Trans::No)
}

/// Entrywise product.
pub fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "hadamard of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .collect();
    Ok(DenseMatrix::from_vec(a.rows(), a.cols(), data))
}

/// Column-wise Kronecker product: column `r` is `A(:,r) ⊗ B(:,r)`, so row
/// `i·J + j` of the `(I·J) × R` result is `A(i,:) * B(j,:)`.
pub fn khatri_rao(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(format!(
            "khatri_rao needs equal column counts, got {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    let r = a.cols();
    let mut data = Vec::with_capacity(a.rows() * b.rows() * r);
    for i in 0..a.rows() {
        let ar = a.row(i);
        for j in 0..b.rows() {
            data.extend(ar.iter().zip(b.row(j)).map(|(x, y)| x * y));
        }
    }
    Ok(DenseMatrix::from_vec(a.rows() * b.rows(), r, data))
}
