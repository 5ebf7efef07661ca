//! Dense kernels: matrix type, exact and randomized SVD, thin QR,
//! pseudoinverse, and the Gram / Hadamard / Khatri–Rao products.

mod matrix;
mod pinv;
mod products;
mod qr;
pub mod random;
mod rsvd;
mod svd;

pub use matrix::{gemm, DenseMatrix, Trans};
pub use pinv::pinv_small;
pub use products::{gram, hadamard, khatri_rao};
pub use qr::thin_qr_q;
pub use rsvd::{randomized_svd, RsvdParams};
pub use svd::{truncated_svd, SvdTriple};

/// `max |QᵀQ − I|`.
pub fn orthonormality_error(q: &DenseMatrix) -> f64 {
    gram(q).max_abs_diff(&DenseMatrix::identity(q.cols()))
}
