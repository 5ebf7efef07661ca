//! Two-stage lossy compression of an irregular tensor.
//!
//! Stage 1 takes a rank-`R` randomized SVD of every slice,
//! `X_k ≈ A_k B_k C_kᵀ`. Stage 2 concatenates the `J × R` blocks `C_k B_k`
//! side by side into `M` (`J × KR`) and takes one more rank-`R` randomized
//! SVD, `M ≈ D E Fᵀ`. Splitting `F` into `R × R` row blocks `F^(k)` gives
//!
//! ```text
//! X_k ≈ A_k F^(k) E Dᵀ
//! ```
//!
//! and after this point the solver never touches `X_k` again.
//!
//! Peak extra memory during [`compress`] is the stage-1 factors of all slices
//! (`Σ I_k R + K R (J + 1)` floats), the matrix `M`, and the per-call sketch
//! buffers of the randomized SVD (a few `I_k × (R+s)` and `J × (R+s)`
//! matrices per worker).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::random::derive_seed;
use crate::linalg::{randomized_svd, DenseMatrix, RsvdParams};
use crate::scheduler::{Executor, PartitionPlan};
use crate::tensor::IrregularTensor;

pub const COMPRESSED_MAGIC: &[u8; 4] = b"IRC1";

/// Stream tag for the stage-2 test matrix; stage 1 uses the slice index.
const STAGE2_STREAM: u64 = u64::MAX;

/// Output of the two-stage compression.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedTensor {
    rank: usize,
    /// `I_k × R`, column-orthonormal.
    a: Vec<DenseMatrix>,
    /// `J × R`, column-orthonormal.
    d: DenseMatrix,
    /// Diagonal of `E`, descending.
    e: Vec<f64>,
    /// `KR × R`, column-orthonormal.
    f: DenseMatrix,
}

impl CompressedTensor {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_slices(&self) -> usize {
        self.a.len()
    }

    pub fn num_cols(&self) -> usize {
        self.d.rows()
    }

    pub fn row_counts(&self) -> Vec<usize> {
        self.a.iter().map(DenseMatrix::rows).collect()
    }

    pub fn a(&self, k: usize) -> &DenseMatrix {
        &self.a[k]
    }

    pub fn a_all(&self) -> &[DenseMatrix] {
        &self.a
    }

    pub fn d(&self) -> &DenseMatrix {
        &self.d
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn f(&self) -> &DenseMatrix {
        &self.f
    }

    /// The `R × R` block `F^(k)` (rows `kR .. (k+1)R` of `F`).
    pub fn f_block(&self, k: usize) -> DenseMatrix {
        self.f.row_block(k * self.rank, (k + 1) * self.rank)
    }

    /// Number of stored floats: `Σ I_k R + K R² + J R + R`.
    pub fn float_count(&self) -> usize {
        let r = self.rank;
        self.a.iter().map(|a| a.rows() * r).sum::<usize>()
            + self.num_slices() * r * r
            + self.num_cols() * r
            + r
    }

    /// `diag(E) · Dᵀ` (`R × J`).
    pub fn e_dt(&self) -> DenseMatrix {
        let mut edt = self.d.transpose();
        edt.scale_rows(&self.e);
        edt
    }

    /// `A_k F^(k) diag(E) Dᵀ`, evaluated right to left so no intermediate
    /// exceeds `R × J`.
    pub fn reconstruct_slice(&self, k: usize) -> Result<DenseMatrix> {
        if k >= self.num_slices() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.num_slices(),
            });
        }
        let inner = self.f_block(k).matmul(&self.e_dt());
        Ok(self.a[k].matmul(&inner))
    }

    /// The compressed approximation `{A_k F^(k) E Dᵀ}` as a tensor.
    pub fn reconstruct(&self) -> Result<IrregularTensor> {
        let edt = self.e_dt();
        let slices = (0..self.num_slices())
            .map(|k| self.a[k].matmul(&self.f_block(k).matmul(&edt)))
            .collect();
        IrregularTensor::new(slices)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// `IRC1` layout, little-endian: magic, `u32` K, J, R; `E` (R f64);
    /// `D` (J·R f64, row-major); `F` (KR·R f64); then per slice
    /// `u32 I_k` followed by `A_k` (I_k·R f64).
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(COMPRESSED_MAGIC)?;
        for n in [self.num_slices(), self.num_cols(), self.rank] {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        let mut put = |vals: &[f64]| -> Result<()> {
            for v in vals {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        put(&self.e)?;
        put(self.d.as_slice())?;
        put(self.f.as_slice())?;
        for a in &self.a {
            w.write_all(&(a.rows() as u32).to_le_bytes())?;
            for v in a.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r).map_err(|e| match e {
            Error::Format { reason, .. } => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: PathBuf::new(),
            reason,
        };
        let mut magic = [0u8; 4];
        fill(r, &mut magic)?;
        if &magic != COMPRESSED_MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let k = read_u32(r)? as usize;
        let j = read_u32(r)? as usize;
        let rank = read_u32(r)? as usize;
        if k == 0 || j == 0 || rank == 0 {
            return Err(bad(format!("empty dimensions K={k} J={j} R={rank}")));
        }
        let e = read_f64s(r, rank)?;
        let d =
            DenseMatrix::new(j, rank, read_f64s(r, j * rank)?).map_err(|e| bad(e.to_string()))?;
        let f = DenseMatrix::new(k * rank, rank, read_f64s(r, k * rank * rank)?)
            .map_err(|e| bad(e.to_string()))?;
        let mut a = Vec::with_capacity(k);
        for idx in 0..k {
            let rows = read_u32(r)? as usize;
            let m = DenseMatrix::new(rows, rank, read_f64s(r, rows * rank)?)
                .map_err(|e| bad(format!("A_{idx}: {e}")))?;
            a.push(m);
        }
        Ok(Self { rank, a, d, e, f })
    }
}

fn fill(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format {
            path: PathBuf::new(),
            reason: "truncated payload".into(),
        },
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    fill(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    fill(r, &mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Runs both compression stages. Stage 1 is distributed per `plan`; stage 2
/// runs on the calling thread. Each slice's sketch is seeded from
/// `(rsvd.seed, k)`, so the output does not depend on the plan.
pub fn compress(
    x: &IrregularTensor,
    rsvd: &RsvdParams,
    plan: &PartitionPlan,
    exec: &Executor,
) -> Result<CompressedTensor> {
    let r = rsvd.target_rank;
    let j = x.num_cols();
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    if plan.num_slices() != x.num_slices() {
        return Err(Error::InvalidArgument(format!(
            "partition plan covers {} slices, tensor has {}",
            plan.num_slices(),
            x.num_slices()
        )));
    }
    for (k, s) in x.slices().iter().enumerate() {
        if s.rows().min(j) < r {
            return Err(Error::RankTooLarge {
                rank: r,
                rows: s.rows(),
                cols: j,
            }
            .in_slice(k));
        }
    }

    let stage1 = exec.map_with_plan(plan, |k| {
        let params = rsvd.with_seed(derive_seed(rsvd.seed, k as u64));
        let svd = randomized_svd(x.slice(k), &params)?;
        // C_k B_k: right singular vectors scaled by singular values.
        let mut cb = svd.v;
        cb.scale_columns(&svd.s);
        Ok((svd.u, cb))
    })?;

    let (a, blocks): (Vec<DenseMatrix>, Vec<DenseMatrix>) = stage1.into_iter().unzip();
    let refs: Vec<&DenseMatrix> = blocks.iter().collect();
    let m = DenseMatrix::hcat(&refs)?;
    drop(blocks);

    let second = randomized_svd(&m, &rsvd.with_seed(derive_seed(rsvd.seed, STAGE2_STREAM)))?;
    Ok(CompressedTensor {
        rank: r,
        a,
        d: second.u,
        e: second.s,
        f: second.v,
    })
}

/// The stage-2 input `M = [C_1 B_1, …, C_K B_K]` (`J × KR`), rebuilt for
/// diagnostics and tests.
pub fn stage_two_input(x: &IrregularTensor, rsvd: &RsvdParams) -> Result<DenseMatrix> {
    let blocks = (0..x.num_slices())
        .map(|k| {
            let svd = randomized_svd(
                x.slice(k),
                &rsvd.with_seed(derive_seed(rsvd.seed, k as u64)),
            )
            .map_err(|e| e.in_slice(k))?;
            let mut cb = svd.v;
            cb.scale_columns(&svd.s);
            Ok(cb)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&DenseMatrix> = blocks.iter().collect();
    DenseMatrix::hcat(&refs)
}
