//! PARAFAC2 decomposition of irregular dense tensors.
//!
//! An irregular tensor is a list of matrices `X_k` (`I_k × J`) that share a
//! column count but not a row count. PARAFAC2 fits
//! `X_k ≈ Q_k H S_k Vᵀ` with column-orthonormal `Q_k`.
//!
//! Two solvers are provided:
//!
//! - [`fit_dpar2`] compresses the input once with randomized SVDs and runs
//!   every iteration on the compressed form;
//! - [`fit_baseline`] is the classic ALS loop on the raw slices.
//!
//! ```
//! use parafac2::{fit_dpar2, fitness, generate, SolverOptions, SyntheticSpec};
//!
//! let x = generate(&SyntheticSpec::planted(40, 20, 10, 3, 0.0, 7)).unwrap();
//! let out = fit_dpar2(&x, 3, &SolverOptions::default()).unwrap();
//! assert!(fitness(&x, &out.factors).unwrap() > 0.99);
//! ```

pub mod analysis;
pub mod baseline;
pub mod compressor;
mod error;
pub mod factor_io;
pub mod linalg;
pub mod model;
pub mod report;
pub mod scheduler;
pub mod solver;
pub mod synthetic;
pub mod tensor;

pub use analysis::{
    build_similarity_graph, fitness, knn, rwr, similarity, RwrParams, SimilarityGraph,
};
pub use baseline::fit_baseline;
pub use compressor::{compress, CompressedTensor};
pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use model::{FitOutput, Initialization, IterationRecord, Parafac2Factors, SolverOptions};
pub use report::{Method, RunReport};
pub use scheduler::{greedy_partition, Executor, PartitionPlan};
pub use solver::{fit_compressed, fit_dpar2};
pub use synthetic::{generate, SyntheticSpec};
pub use tensor::IrregularTensor;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/irregular-tensors.md")]
    mod irregular_tensors {}
    #[doc = include_str!("../../../book/src/compression.md")]
    mod compression {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/baseline.md")]
    mod baseline {}
    #[doc = include_str!("../../../book/src/determinism.md")]
    mod determinism {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
