//! Run reports and the benchmark grid behind the command-line tool.
//!
//! Report CSV schema, one row per iteration, run-level values repeated:
//!
//! ```text
//! method,rank,threads,seed,max_iters,tol,iteration,objective,iteration_seconds,
//! preprocess_seconds,total_seconds,fitness,compressed_float_count
//! ```
//!
//! `fitness` and `compressed_float_count` are empty when not available.
//! Bench CSV schema:
//!
//! ```text
//! size,rank,method,preprocess_s,per_iter_s,total_s,fitness,compressed_float_count
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::fitness_with;
use crate::baseline::fit_baseline;
use crate::error::{Error, Result};
use crate::model::{FitOutput, IterationRecord, SolverOptions};
use crate::scheduler::Executor;
use crate::solver::fit_dpar2;
use crate::synthetic::{generate, SyntheticSpec};
use crate::tensor::IrregularTensor;

pub const REPORT_HEADER: [&str; 13] = [
    "method",
    "rank",
    "threads",
    "seed",
    "max_iters",
    "tol",
    "iteration",
    "objective",
    "iteration_seconds",
    "preprocess_seconds",
    "total_seconds",
    "fitness",
    "compressed_float_count",
];

pub const BENCH_HEADER: [&str; 8] = [
    "size",
    "rank",
    "method",
    "preprocess_s",
    "per_iter_s",
    "total_s",
    "fitness",
    "compressed_float_count",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dpar2,
    Als,
}

impl Method {
    pub fn fit(self, x: &IrregularTensor, rank: usize, opts: &SolverOptions) -> Result<FitOutput> {
        match self {
            Method::Dpar2 => fit_dpar2(x, rank, opts),
            Method::Als => fit_baseline(x, rank, opts),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dpar2 => "dpar2",
            Method::Als => "als",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dpar2" => Ok(Method::Dpar2),
            "als" => Ok(Method::Als),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method {s:?} (expected dpar2 or als)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub rank: usize,
    pub threads: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub preprocess_seconds: f64,
    pub iterations: Vec<IterationRecord>,
    pub total_seconds: f64,
    pub fitness: Option<f64>,
    pub compressed_float_count: Option<usize>,
}

impl RunReport {
    pub fn per_iteration_seconds(&self) -> f64 {
        if self.iterations.is_empty() {
            0.0
        } else {
            self.iterations.iter().map(|r| r.seconds).sum::<f64>() / self.iterations.len() as f64
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_records(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_records(&mut w)?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
    }

    fn write_records<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(REPORT_HEADER)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for it in &self.iterations {
            w.write_record([
                self.method.to_string(),
                self.rank.to_string(),
                self.threads.to_string(),
                self.seed.to_string(),
                self.max_iters.to_string(),
                self.tol.to_string(),
                it.iteration.to_string(),
                it.objective.to_string(),
                it.seconds.to_string(),
                self.preprocess_seconds.to_string(),
                self.total_seconds.to_string(),
                opt(self.fitness.map(|f| f.to_string())),
                opt(self.compressed_float_count.map(|c| c.to_string())),
            ])?;
        }
        Ok(())
    }
}

/// Runs one solver and assembles its report. With `report_fitness`, the
/// final factors are checked against `x` (one extra pass over the input).
pub fn run_decomposition(
    x: &IrregularTensor,
    method: Method,
    rank: usize,
    opts: &SolverOptions,
    report_fitness: bool,
) -> Result<(FitOutput, RunReport)> {
    let start = Instant::now();
    let out = method.fit(x, rank, opts)?;
    let total_seconds = start.elapsed().as_secs_f64();
    let fitness = if report_fitness {
        Some(fitness_with(x, &out.factors, &Executor::new(opts.threads))?)
    } else {
        None
    };
    let report = RunReport {
        method,
        rank,
        threads: opts.threads,
        seed: opts.seed,
        max_iters: opts.max_iters,
        tol: opts.tol,
        preprocess_seconds: out.preprocess_seconds,
        iterations: out.trace.clone(),
        total_seconds,
        fitness,
        compressed_float_count: out.compressed_float_count,
    };
    Ok((out, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    /// `(I, J, K)` of each uniform random tensor.
    pub sizes: Vec<(usize, usize, usize)>,
    pub ranks: Vec<usize>,
    pub methods: Vec<Method>,
    pub options: SolverOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub size: String,
    pub rank: usize,
    pub method: Method,
    pub preprocess_s: f64,
    pub per_iter_s: f64,
    pub total_s: f64,
    pub fitness: f64,
    pub compressed_float_count: Option<usize>,
}

/// Cartesian product sizes × ranks × methods, in that nesting order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &(i, j, k) in &cfg.sizes {
        let x = generate(&SyntheticSpec::uniform(i, j, k, cfg.options.seed))?;
        for &rank in &cfg.ranks {
            for &method in &cfg.methods {
                let (_, rep) = run_decomposition(&x, method, rank, &cfg.options, true)?;
                rows.push(BenchRow {
                    size: format!("{i}x{j}x{k}"),
                    rank,
                    method,
                    preprocess_s: rep.preprocess_seconds,
                    per_iter_s: rep.per_iteration_seconds(),
                    total_s: rep.total_seconds,
                    fitness: rep.fitness.unwrap_or(f64::NAN),
                    compressed_float_count: rep.compressed_float_count,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_bench_csv(path: impl AsRef<Path>, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BENCH_HEADER)?;
    for r in rows {
        w.write_record([
            r.size.clone(),
            r.rank.to_string(),
            r.method.to_string(),
            r.preprocess_s.to_string(),
            r.per_iter_s.to_string(),
            r.total_s.to_string(),
            r.fitness.to_string(),
            r.compressed_float_count
                .map(|c| c.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
