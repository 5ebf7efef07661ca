//! Irregular tensors and their on-disk forms.
//!
//! Binary archive layout (all little-endian):
//!
//! ```text
//! "IRT1"            4 bytes magic
//! K                 u32
//! J                 u32
//! K × { I_k: u32, I_k·J f64 values, row-major }
//! ```
//!
//! A directory of `slice_0000.csv`, `slice_0001.csv`, … (no header, `J`
//! numeric columns each) is accepted as a human-editable alternative.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const ARCHIVE_MAGIC: &[u8; 4] = b"IRT1";

/// Ordered collection of `K ≥ 1` slices `X_k` (`I_k × J`) with a shared
/// column count.
#[derive(Clone, Debug, PartialEq)]
pub struct IrregularTensor {
    cols: usize,
    slices: Vec<DenseMatrix>,
}

impl IrregularTensor {
    pub fn new(slices: Vec<DenseMatrix>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidArgument("tensor needs at least one slice".into()))?;
        let cols = first.cols();
        for (k, s) in slices.iter().enumerate() {
            if s.cols() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "slice {k} has {} columns, expected {cols}",
                    s.cols()
                )));
            }
            s.check_finite().map_err(|e| e.in_slice(k))?;
        }
        Ok(Self { cols, slices })
    }

    /// Number of slices `K`.
    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    /// Shared column count `J`.
    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn slices(&self) -> &[DenseMatrix] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &DenseMatrix {
        &self.slices[k]
    }

    /// Row counts `I_k`.
    pub fn row_counts(&self) -> Vec<usize> {
        self.slices.iter().map(DenseMatrix::rows).collect()
    }

    pub fn total_rows(&self) -> usize {
        self.slices.iter().map(DenseMatrix::rows).sum()
    }

    /// Number of stored entries `Σ I_k · J`.
    pub fn num_entries(&self) -> usize {
        self.total_rows() * self.cols
    }

    /// `Σ_k ‖X_k‖_F²`, summed in slice order.
    pub fn norm_sq(&self) -> f64 {
        self.slices.iter().map(DenseMatrix::frobenius_norm_sq).sum()
    }

    pub fn save_archive(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        self.write_archive(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_archive(&self, w: &mut impl Write) -> Result<()> {
        let to_u32 = |n: usize, what: &str| {
            u32::try_from(n)
                .map_err(|_| Error::InvalidArgument(format!("{what} {n} does not fit in u32")))
        };
        w.write_all(ARCHIVE_MAGIC)?;
        w.write_all(&to_u32(self.num_slices(), "K")?.to_le_bytes())?;
        w.write_all(&to_u32(self.cols, "J")?.to_le_bytes())?;
        for s in &self.slices {
            w.write_all(&to_u32(s.rows(), "I_k")?.to_le_bytes())?;
            for v in s.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load_archive(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path)?);
        Self::read_archive(&mut r).map_err(|e| match e {
            Error::Format { reason, .. } => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn read_archive(r: &mut impl Read) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: PathBuf::new(),
            reason,
        };
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic, "magic")?;
        if &magic != ARCHIVE_MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let k = read_u32(r, "K")? as usize;
        let j = read_u32(r, "J")? as usize;
        if k == 0 || j == 0 {
            return Err(bad(format!("empty tensor (K={k}, J={j})")));
        }
        let mut slices = Vec::with_capacity(k.min(1 << 16));
        let mut buf = Vec::new();
        for idx in 0..k {
            let rows = read_u32(r, "I_k")? as usize;
            if rows == 0 {
                return Err(bad(format!("slice {idx} has zero rows")));
            }
            buf.resize(rows * j * 8, 0);
            read_exact(r, &mut buf, "slice payload")?;
            let data: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let m =
                DenseMatrix::new(rows, j, data).map_err(|e| bad(format!("slice {idx}: {e}")))?;
            slices.push(m);
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(bad("trailing bytes after last slice".into()));
        }
        Self::new(slices)
    }

    /// Loads `slice_0000.csv`, `slice_0001.csv`, … from a directory.
    pub fn load_csv_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("slice_") && n.ends_with(".csv"))
            })
            .collect();
        files.sort();
        let slices = files
            .iter()
            .enumerate()
            .map(|(k, f)| crate::factor_io::read_matrix_csv(f).map_err(|e| e.in_slice(k)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(slices)
    }

    pub fn save_csv_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (k, s) in self.slices.iter().enumerate() {
            crate::factor_io::write_matrix_csv(dir.join(format!("slice_{k:04}.csv")), s)?;
        }
        Ok(())
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format {
            path: PathBuf::new(),
            reason: format!("truncated while reading {what}"),
        },
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(t: &IrregularTensor) -> IrregularTensor {
        let mut bytes = Vec::new();
        t.write_archive(&mut bytes).unwrap();
        IrregularTensor::read_archive(&mut bytes.as_slice()).unwrap()
    }

    #[test]
    fn minimal_tensor_roundtrips() {
        let t = IrregularTensor::new(vec![DenseMatrix::new(1, 1, vec![7.0]).unwrap()]).unwrap();
        let back = roundtrip(&t);
        assert_eq!(back.slice(0).as_slice(), &[7.0]);
    }

    #[test]
    fn inconsistent_columns_rejected() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 4);
        assert!(matches!(
            IrregularTensor::new(vec![a, b]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(IrregularTensor::new(vec![]).is_err());
    }

    #[test]
    fn archive_with_mixed_widths_is_rejected() {
        // Hand-assembled: header says J=3, so a 4-wide slice desynchronizes
        // the stream and must surface as a format error.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(ARCHIVE_MAGIC);
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        for v in [1.0f64, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&1u32.to_le_bytes());
        for v in [1.0f64, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(
            IrregularTensor::read_archive(&mut bytes.as_slice()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn format_errors() {
        let t = IrregularTensor::new(vec![DenseMatrix::identity(2)]).unwrap();
        let mut bytes = Vec::new();
        t.write_archive(&mut bytes).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            IrregularTensor::read_archive(&mut bad_magic.as_slice()),
            Err(Error::Format { .. })
        ));

        let truncated = &bytes[..bytes.len() - 3];
        let err = IrregularTensor::read_archive(&mut &truncated[..]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let mut nan = bytes.clone();
        let off = 4 + 4 + 4 + 4;
        nan[off..off + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(IrregularTensor::read_archive(&mut nan.as_slice()).is_err());
    }

    #[test]
    fn csv_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let t = IrregularTensor::new(vec![
            DenseMatrix::from_fn(3, 2, |i, j| i as f64 * 0.1 + j as f64),
            DenseMatrix::from_fn(1, 2, |_, j| -(j as f64) / 3.0),
        ])
        .unwrap();
        t.save_csv_dir(dir.path()).unwrap();
        let back = IrregularTensor::load_csv_dir(dir.path()).unwrap();
        assert_eq!(back, t);
    }
}
