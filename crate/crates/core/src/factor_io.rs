//! Plain-CSV matrices and factor directories.
//!
//! A factor directory holds `H.csv`, `V.csv`, `W.csv`, `U/U_0000.csv`, … and
//! a `manifest.json` describing where the factors came from. Values are
//! written with Rust's shortest round-trip float formatting, so a write/read
//! cycle is lossless and equal factors produce identical files.

use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::Parafac2Factors;

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(bad(format!(
                "row {i} has {} fields, expected {}",
                rec.len(),
                cols.unwrap_or(0)
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("row {i}, column {j}: {field:?} is not a number")))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| bad("empty file".into()))?;
    DenseMatrix::new(rows, cols, data).map_err(|e| bad(e.to_string()))
}

/// Hex SHA-256 of a file's contents.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let mut f = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorManifest {
    pub method: String,
    pub rank: usize,
    pub seed: u64,
    pub num_slices: usize,
    pub num_cols: usize,
    pub row_counts: Vec<usize>,
    /// SHA-256 of the input archive, if known.
    pub archive_sha256: Option<String>,
}

/// Factors as read back from a directory: `U_k` instead of `Q_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    pub manifest: FactorManifest,
    pub h: DenseMatrix,
    pub v: DenseMatrix,
    pub w: DenseMatrix,
    pub u: Vec<DenseMatrix>,
}

pub fn write_factor_dir(
    dir: impl AsRef<Path>,
    factors: &Parafac2Factors,
    manifest: &FactorManifest,
) -> Result<()> {
    let dir = dir.as_ref();
    let udir = dir.join("U");
    fs::create_dir_all(&udir)?;
    write_matrix_csv(dir.join("H.csv"), &factors.h)?;
    write_matrix_csv(dir.join("V.csv"), &factors.v)?;
    write_matrix_csv(dir.join("W.csv"), &factors.w)?;
    for k in 0..factors.num_slices() {
        write_matrix_csv(udir.join(format!("U_{k:04}.csv")), &factors.u(k))?;
    }
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

pub fn read_factor_dir(dir: impl AsRef<Path>) -> Result<FactorSet> {
    let dir = dir.as_ref();
    let manifest: FactorManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let h = read_matrix_csv(dir.join("H.csv"))?;
    let v = read_matrix_csv(dir.join("V.csv"))?;
    let w = read_matrix_csv(dir.join("W.csv"))?;
    let r = manifest.rank;
    let bad = |reason: String| Error::Format {
        path: dir.to_path_buf(),
        reason,
    };
    if h.shape() != (r, r)
        || v.shape() != (manifest.num_cols, r)
        || w.shape() != (manifest.num_slices, r)
    {
        return Err(bad(format!(
            "H {:?}, V {:?}, W {:?} disagree with manifest (K={}, J={}, R={r})",
            h.shape(),
            v.shape(),
            w.shape(),
            manifest.num_slices,
            manifest.num_cols
        )));
    }
    if manifest.row_counts.len() != manifest.num_slices {
        return Err(bad(
            "manifest row_counts length differs from num_slices".into()
        ));
    }
    let u = manifest
        .row_counts
        .iter()
        .enumerate()
        .map(|(k, &ik)| {
            let m = read_matrix_csv(dir.join("U").join(format!("U_{k:04}.csv")))?;
            if m.shape() != (ik, r) {
                return Err(bad(format!(
                    "U_{k:04} is {:?}, expected ({ik}, {r})",
                    m.shape()
                )));
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorSet {
        manifest,
        h,
        v,
        w,
        u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let m = DenseMatrix::from_fn(3, 2, |i, j| (i as f64 + 1.0) / 7.0 - j as f64 * 1e-300);
        let p = dir.path().join("m.csv");
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
    }

    #[test]
    fn ragged_and_non_numeric_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&p).is_err());
        fs::write(&p, "1,x\n").unwrap();
        let err = read_matrix_csv(&p).unwrap_err();
        assert!(err.to_string().contains("not a number"), "{err}");
        fs::write(&p, "").unwrap();
        assert!(read_matrix_csv(&p).is_err());
    }

    #[test]
    fn factor_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let f = Parafac2Factors {
            h: DenseMatrix::from_fn(2, 2, |i, j| (i + 2 * j) as f64),
            v: DenseMatrix::from_fn(3, 2, |i, j| (i * j) as f64 + 0.5),
            w: DenseMatrix::from_fn(2, 2, |i, j| 1.0 + (i + j) as f64),
            q: vec![
                DenseMatrix::identity(2),
                DenseMatrix::from_fn(3, 2, |i, j| if i == j { 1.0 } else { 0.0 }),
            ],
        };
        let manifest = FactorManifest {
            method: "dpar2".into(),
            rank: 2,
            seed: 7,
            num_slices: 2,
            num_cols: 3,
            row_counts: vec![2, 3],
            archive_sha256: None,
        };
        write_factor_dir(dir.path(), &f, &manifest).unwrap();
        let back = read_factor_dir(dir.path()).unwrap();
        assert_eq!(back.manifest, manifest);
        assert_eq!(back.h, f.h);
        assert_eq!(back.u[1], f.u(1));
    }

    #[test]
    fn sha256_of_known_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            file_sha256(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
