//! Synthetic irregular tensors for benchmarks and recovery tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::random::{derive_seed, Sampler};
use crate::linalg::{thin_qr_q, DenseMatrix};
use crate::tensor::IrregularTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// i.i.d. uniform(0, 1) entries.
    UniformRandom,
    /// `X_k = Q_k H S_k Vᵀ` plus scaled Gaussian noise, with orthogonal `H`,
    /// Gaussian `V`, and `S_k` entries uniform on `[0.1, 2.0)`.
    PlantedParafac2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RowCounts {
    /// Uniform mode: every slice has this many rows. Planted mode: row counts
    /// are drawn uniformly from `[ceil(I/2), I]`.
    Max(usize),
    /// Explicit `I_k` per slice.
    PerSlice(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: RowCounts,
    pub cols: usize,
    pub slices: usize,
    pub mode: GenerationMode,
    /// Rank of the planted model; ignored in uniform mode.
    pub true_rank: usize,
    /// Noise Frobenius norm relative to the signal, per slice.
    pub noise_level: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn uniform(rows: usize, cols: usize, slices: usize, seed: u64) -> Self {
        Self {
            rows: RowCounts::Max(rows),
            cols,
            slices,
            mode: GenerationMode::UniformRandom,
            true_rank: 0,
            noise_level: 0.0,
            seed,
        }
    }

    pub fn planted(
        rows: usize,
        cols: usize,
        slices: usize,
        rank: usize,
        noise_level: f64,
        seed: u64,
    ) -> Self {
        Self {
            rows: RowCounts::Max(rows),
            cols,
            slices,
            mode: GenerationMode::PlantedParafac2,
            true_rank: rank,
            noise_level,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.cols == 0 || self.slices == 0 {
            return bad(format!(
                "J={} and K={} must be positive",
                self.cols, self.slices
            ));
        }
        match &self.rows {
            RowCounts::Max(0) => return bad("I must be positive".into()),
            RowCounts::PerSlice(v) if v.len() != self.slices => {
                return bad(format!(
                    "{} row counts given for K={}",
                    v.len(),
                    self.slices
                ))
            }
            RowCounts::PerSlice(v) if v.contains(&0) => {
                return bad("row counts must be positive".into())
            }
            _ => {}
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad(format!(
                "noise level {} must be finite and >= 0",
                self.noise_level
            ));
        }
        if self.mode == GenerationMode::PlantedParafac2 {
            let min_rows = match &self.rows {
                RowCounts::Max(i) => i.div_ceil(2),
                RowCounts::PerSlice(v) => *v.iter().min().expect("K >= 1"),
            };
            if self.true_rank == 0 || self.true_rank > min_rows.min(self.cols) {
                return bad(format!(
                    "true rank {} must be in 1..={} (smallest slice is {}x{})",
                    self.true_rank,
                    min_rows.min(self.cols),
                    min_rows,
                    self.cols
                ));
            }
        }
        Ok(())
    }
}

/// Ground-truth factors of a planted tensor.
#[derive(Clone, Debug)]
pub struct PlantedModel {
    pub q: Vec<DenseMatrix>,
    pub h: DenseMatrix,
    pub v: DenseMatrix,
    /// Row `k` is the diagonal of `S_k`.
    pub w: DenseMatrix,
}

pub fn generate(spec: &SyntheticSpec) -> Result<IrregularTensor> {
    generate_with_model(spec).map(|(t, _)| t)
}

/// Generates a tensor; planted mode also returns the model it was built from.
pub fn generate_with_model(
    spec: &SyntheticSpec,
) -> Result<(IrregularTensor, Option<PlantedModel>)> {
    spec.validate()?;
    let mut rng = Sampler::new(spec.seed);
    let (j, k) = (spec.cols, spec.slices);
    match spec.mode {
        GenerationMode::UniformRandom => {
            let rows = match &spec.rows {
                RowCounts::Max(i) => vec![*i; k],
                RowCounts::PerSlice(v) => v.clone(),
            };
            let slices = rows.iter().map(|&i| rng.uniform_matrix(i, j)).collect();
            Ok((IrregularTensor::new(slices)?, None))
        }
        GenerationMode::PlantedParafac2 => {
            let r = spec.true_rank;
            let rows = match &spec.rows {
                RowCounts::Max(i) => (0..k).map(|_| rng.uniform_int(i.div_ceil(2), *i)).collect(),
                RowCounts::PerSlice(v) => v.clone(),
            };
            let h = thin_qr_q(&rng.gaussian(r, r));
            let v = rng.gaussian(j, r);
            let w = DenseMatrix::from_fn(k, r, |_, _| 0.1 + 1.9 * rng.uniform());
            let mut qs = Vec::with_capacity(k);
            let mut slices = Vec::with_capacity(k);
            for (idx, &ik) in rows.iter().enumerate() {
                let q = thin_qr_q(&rng.gaussian(ik, r));
                let mut hs = h.clone();
                hs.scale_columns(w.row(idx));
                let mut x = q.matmul(&hs).matmul_t(&v);
                if spec.noise_level > 0.0 {
                    // Separate stream so the signal does not depend on the noise level.
                    let noise = Sampler::new(derive_seed(spec.seed, idx as u64)).gaussian(ik, j);
                    let nn = noise.frobenius_norm();
                    if nn > 0.0 {
                        let scale = spec.noise_level * x.frobenius_norm() / nn;
                        for (xv, nv) in x.as_mut_slice().iter_mut().zip(noise.as_slice()) {
                            *xv += scale * nv;
                        }
                    }
                }
                qs.push(q);
                slices.push(x);
            }
            let model = PlantedModel { q: qs, h, v, w };
            Ok((IrregularTensor::new(slices)?, Some(model)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_error;

    #[test]
    fn uniform_is_deterministic_and_in_range() {
        let spec = SyntheticSpec::uniform(6, 4, 3, 99);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row_counts(), vec![6, 6, 6]);
        assert!(a
            .slices()
            .iter()
            .all(|s| s.as_slice().iter().all(|&x| (0.0..1.0).contains(&x))));
    }

    #[test]
    fn planted_q_is_orthonormal_and_rows_in_range() {
        let spec = SyntheticSpec::planted(20, 8, 5, 3, 0.0, 4);
        let (t, model) = generate_with_model(&spec).unwrap();
        let model = model.unwrap();
        for (q, ik) in model.q.iter().zip(t.row_counts()) {
            assert!((10..=20).contains(&ik));
            assert!(orthonormality_error(q) < 1e-10);
        }
    }

    #[test]
    fn planted_noise_has_requested_relative_norm() {
        let clean = generate(&SyntheticSpec::planted(30, 10, 2, 2, 0.0, 1)).unwrap();
        let noisy = generate(&SyntheticSpec::planted(30, 10, 2, 2, 0.1, 1)).unwrap();
        for (c, n) in clean.slices().iter().zip(noisy.slices()) {
            let ratio = n.sub(c).frobenius_norm() / c.frobenius_norm();
            assert!((ratio - 0.1).abs() < 1e-12, "{ratio}");
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SyntheticSpec::uniform(0, 3, 2, 0)).is_err());
        assert!(generate(&SyntheticSpec::planted(4, 3, 2, 4, 0.0, 0)).is_err());
        let mut s = SyntheticSpec::planted(4, 3, 2, 1, 0.0, 0);
        s.rows = RowCounts::PerSlice(vec![3]);
        assert!(generate(&s).is_err());
    }
}
