//! Post-decomposition analytics: fitness, factor similarity, nearest
//! neighbors, random walk with restart, and correlation between rows of `V`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::Parafac2Factors;
use crate::scheduler::{default_threads, Executor};
use crate::tensor::IrregularTensor;

pub const DEFAULT_GAMMA: f64 = 0.01;
pub const DEFAULT_RESTART: f64 = 0.15;
pub const DEFAULT_RWR_ITERS: usize = 100;
pub const RWR_TOL: f64 = 1e-10;

/// `1 − Σ‖X_k − Q_k H S_k Vᵀ‖² / Σ‖X_k‖²`.
pub fn fitness(x: &IrregularTensor, factors: &Parafac2Factors) -> Result<f64> {
    fitness_with(x, factors, &Executor::new(default_threads()))
}

pub fn fitness_with(
    x: &IrregularTensor,
    factors: &Parafac2Factors,
    exec: &Executor,
) -> Result<f64> {
    factors.check_against(x)?;
    let norm = x.norm_sq();
    if norm == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let resid = crate::baseline::reconstruction_error(x, factors, exec)?;
    Ok(1.0 - resid / norm)
}

/// `exp(−γ‖Ui − Uj‖_F²)`.
pub fn similarity(ui: &DenseMatrix, uj: &DenseMatrix, gamma: f64) -> Result<f64> {
    if ui.shape() != uj.shape() {
        return Err(Error::ShapeMismatch(format!(
            "cannot compare {:?} with {:?}",
            ui.shape(),
            uj.shape()
        )));
    }
    Ok((-gamma * ui.sub(uj).frobenius_norm_sq()).exp())
}

/// Pairwise similarities of all `U_k`. Every pair must have the same shape;
/// the error names the first offending pair.
pub fn similarity_matrix(us: &[DenseMatrix], gamma: f64, exec: &Executor) -> Result<DenseMatrix> {
    let n = us.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no factor matrices".into()));
    }
    if let Some(j) = us.iter().position(|u| u.shape() != us[0].shape()) {
        return Err(Error::ShapeMismatch(format!(
            "U_0 is {:?} but U_{j} is {:?}; similarity is only defined for equal shapes",
            us[0].shape(),
            us[j].shape()
        )));
    }
    let rows = exec.map_slices(n, |i| {
        (0..n)
            .map(|j| similarity(&us[i], &us[j], gamma))
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(DenseMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Symmetric nonnegative adjacency with zero diagonal and entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityGraph {
    adj: DenseMatrix,
}

impl SimilarityGraph {
    pub fn new(adj: DenseMatrix) -> Result<Self> {
        let n = adj.rows();
        if adj.cols() != n {
            return Err(Error::ShapeMismatch(format!(
                "adjacency must be square, got {:?}",
                adj.shape()
            )));
        }
        for i in 0..n {
            if adj[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let a = adj[(i, j)];
                if !(0.0..=1.0).contains(&a) || a != adj[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) = {a} is not a symmetric weight in [0, 1]"
                    )));
                }
            }
        }
        Ok(Self { adj })
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.rows()
    }

    pub fn adjacency(&self) -> &DenseMatrix {
        &self.adj
    }
}

/// Builds the graph from `U_k` factors. Only pairs of equal shape are
/// connected; all other entries are zero.
pub fn build_similarity_graph(
    us: &[DenseMatrix],
    gamma: f64,
    exec: &Executor,
) -> Result<SimilarityGraph> {
    let n = us.len();
    let rows = exec.map_slices(n, |i| {
        (0..n)
            .map(|j| {
                if i == j || us[i].shape() != us[j].shape() {
                    Ok(0.0)
                } else {
                    similarity(&us[i], &us[j], gamma)
                }
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    // Mirror the upper triangle so rounding cannot break symmetry.
    let adj = DenseMatrix::from_fn(n, n, |i, j| if i <= j { rows[i][j] } else { rows[j][i] });
    SimilarityGraph::new(adj)
}

/// Indices of the `k` highest scores, target excluded, descending with
/// ties broken by ascending index.
pub fn knn(scores: &[f64], target: usize, k: usize) -> Result<Vec<usize>> {
    let n = scores.len();
    if target >= n {
        return Err(Error::IndexOutOfRange {
            index: target,
            len: n,
        });
    }
    if k > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} other nodes",
            n - 1
        )));
    }
    let mut idx: Vec<usize> = (0..n).filter(|&i| i != target).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RwrParams {
    pub restart: f64,
    pub max_iters: usize,
    pub query: Vec<f64>,
    /// Always run `max_iters` steps, ignoring the early stop.
    pub strict: bool,
}

impl RwrParams {
    /// One-hot query on `node` with default restart and iteration cap.
    pub fn one_hot(n: usize, node: usize) -> Self {
        let mut query = vec![0.0; n];
        if node < n {
            query[node] = 1.0;
        }
        Self {
            restart: DEFAULT_RESTART,
            max_iters: DEFAULT_RWR_ITERS,
            query,
            strict: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RwrResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
}

/// Power iteration `r ← (1−c) Ãᵀ r + c q` from `r = q`, with `Ã` the
/// row-normalized adjacency.
pub fn rwr(g: &SimilarityGraph, params: &RwrParams) -> Result<RwrResult> {
    rwr_with(g, params, |_, _| {})
}

/// [`rwr`] that hands every iterate to `observe` along with its step number.
pub fn rwr_with(
    g: &SimilarityGraph,
    params: &RwrParams,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<RwrResult> {
    let n = g.num_nodes();
    let q = &params.query;
    if q.len() != n {
        return Err(Error::InvalidArgument(format!(
            "query has length {}, graph has {n} nodes",
            q.len()
        )));
    }
    if q.iter().any(|&v| v.is_nan() || v < 0.0) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "query must be a probability vector".into(),
        ));
    }
    if !(params.restart > 0.0 && params.restart < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "restart {} must lie in (0, 1)",
            params.restart
        )));
    }
    if n == 1 {
        return Ok(RwrResult {
            scores: q.clone(),
            iterations: 0,
        });
    }
    let a = g.adjacency();
    let mut norm = a.clone();
    for i in 0..n {
        let s: f64 = a.row(i).iter().sum();
        if s <= 0.0 {
            return Err(Error::IsolatedNode { node: i });
        }
        norm.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    let c = params.restart;
    let mut r = q.clone();
    let mut iterations = 0;
    for _ in 0..params.max_iters {
        let mut next: Vec<f64> = q.iter().map(|v| c * v).collect();
        for (i, &ri) in r.iter().enumerate() {
            for (nj, &aij) in next.iter_mut().zip(norm.row(i)) {
                *nj += (1.0 - c) * aij * ri;
            }
        }
        let delta: f64 = next.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        r = next;
        iterations += 1;
        observe(iterations, &r);
        if !params.strict && delta < RWR_TOL {
            break;
        }
    }
    Ok(RwrResult {
        scores: r,
        iterations,
    })
}

/// Pearson correlation of two equal-length vectors. A constant vector has
/// no defined correlation; it is reported as 0.
pub fn pcc(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "pcc of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// PCC between every pair of rows of `V`.
pub fn pcc_matrix(v: &DenseMatrix) -> Result<DenseMatrix> {
    let n = v.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let p = pcc(v.row(i), v.row(j))?;
            out.row_mut(i)[j] = p;
            out.row_mut(j)[i] = p;
        }
    }
    Ok(out)
}

/// `rank,index,score` rows, rank starting at 1.
pub fn write_knn_csv(path: impl AsRef<Path>, neighbors: &[usize], scores: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rank", "index", "score"])?;
    for (rank, &i) in neighbors.iter().enumerate() {
        w.write_record([(rank + 1).to_string(), i.to_string(), scores[i].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `index,score` rows.
pub fn write_scores_csv(path: impl AsRef<Path>, scores: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(rows: &[Vec<f64>]) -> SimilarityGraph {
        SimilarityGraph::new(DenseMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn similarity_closed_form() {
        let a = DenseMatrix::zeros(2, 2);
        let b = DenseMatrix::from_rows(&[vec![10.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!((similarity(&a, &b, DEFAULT_GAMMA).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(similarity(&b, &b, DEFAULT_GAMMA).unwrap(), 1.0);
        assert!(similarity(&a, &DenseMatrix::zeros(3, 2), 0.01).is_err());
    }

    #[test]
    fn knn_examples() {
        assert_eq!(knn(&[0.0, 0.9, 0.1, 0.5], 0, 2).unwrap(), vec![1, 3]);
        assert_eq!(knn(&[0.3; 5], 2, 3).unwrap(), vec![0, 1, 3]);
        assert!(knn(&[0.3; 5], 2, 0).unwrap().is_empty());
        assert!(matches!(
            knn(&[0.3; 5], 5, 1),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(knn(&[0.3; 5], 0, 5).is_err());
    }

    // Fixed point of r = (1-c) Ãᵀ r + c q for Ã = [[0,1],[1,0]], by Cramer's rule.
    fn two_node_fixed_point(c: f64) -> [f64; 2] {
        let b = 1.0 - c;
        let det = 1.0 - b * b;
        [c / det, b * c / det]
    }

    #[test]
    fn rwr_two_nodes() {
        let expect = two_node_fixed_point(DEFAULT_RESTART);
        for a in [0.2, 1.0] {
            let g = graph(&[vec![0.0, a], vec![a, 0.0]]);
            let mut p = RwrParams::one_hot(2, 0);
            p.max_iters = 10_000;
            let r = rwr(&g, &p).unwrap();
            assert!((r.scores[0] - expect[0]).abs() < 1e-9, "{:?}", r.scores);
            assert!((r.scores[1] - expect[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn rwr_single_node_and_errors() {
        let g = graph(&[vec![0.0]]);
        assert_eq!(
            rwr(&g, &RwrParams::one_hot(1, 0)).unwrap().scores,
            vec![1.0]
        );
        let g = graph(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]);
        assert!(matches!(
            rwr(&g, &RwrParams::one_hot(3, 0)),
            Err(Error::IsolatedNode { node: 2 })
        ));
        let mut p = RwrParams::one_hot(3, 0);
        p.query = vec![0.5, 0.6, -0.1];
        assert!(rwr(&g, &p).is_err());
    }

    #[test]
    fn rwr_strict_runs_all_iterations() {
        let g = graph(&[
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ]);
        let mut p = RwrParams::one_hot(3, 1);
        p.strict = true;
        assert_eq!(rwr(&g, &p).unwrap().iterations, 100);
        p.strict = false;
        assert!(rwr(&g, &p).unwrap().iterations < 100);
    }

    #[test]
    fn graph_invariants_are_checked() {
        assert!(SimilarityGraph::new(DenseMatrix::identity(2)).is_err());
        assert!(SimilarityGraph::new(
            DenseMatrix::from_rows(&[vec![0.0, 0.5], vec![0.4, 0.0]]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn graph_only_links_equal_shapes() {
        let us = vec![
            DenseMatrix::zeros(2, 1),
            DenseMatrix::zeros(3, 1),
            DenseMatrix::zeros(2, 1),
        ];
        let g = build_similarity_graph(&us, 0.01, &Executor::new(2)).unwrap();
        assert_eq!(g.adjacency()[(0, 2)], 1.0);
        assert_eq!(g.adjacency()[(0, 1)], 0.0);
        let err = similarity_matrix(&us, 0.01, &Executor::new(1)).unwrap_err();
        assert!(err.to_string().contains("U_1"), "{err}");
    }

    #[test]
    fn pcc_values() {
        assert!((pcc(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pcc(&[1.0, 1.0], &[0.0, 5.0]).unwrap(), 0.0);
        let v = DenseMatrix::from_rows(&[vec![1.0, 2.0, 4.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let m = pcc_matrix(&v).unwrap();
        assert_eq!(m[(0, 1)], m[(1, 0)]);
        assert!((m[(0, 0)] - 1.0).abs() < 1e-15);
    }
}
