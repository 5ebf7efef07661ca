use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use parafac2::analysis::{self, RwrParams};
use parafac2::factor_io::{self, FactorManifest};
use parafac2::report::{self, BenchConfig, Method};
use parafac2::scheduler::default_threads;
use parafac2::synthetic::{generate, GenerationMode, RowCounts, SyntheticSpec};
use parafac2::{DenseMatrix, Error, Executor, Initialization, IrregularTensor, SolverOptions};

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "dpar2",
    version,
    about = "PARAFAC2 decomposition of irregular dense tensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic tensor archive.
    Generate(GenerateArgs),
    /// Decompose a tensor and write factors and a run report.
    Decompose(DecomposeArgs),
    /// Time both solvers over a grid of sizes and ranks.
    Bench(BenchArgs),
    /// Similarity, nearest neighbors and random walk scores from factors.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Uniform,
    Planted,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dpar2,
    Als,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dpar2 => Method::Dpar2,
            MethodArg::Als => Method::Als,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Svd,
    Identity,
}

#[derive(Args)]
struct GenerateArgs {
    /// Rows per slice (maximum rows in planted mode).
    #[arg(long = "I")]
    rows: usize,
    #[arg(long = "J")]
    cols: usize,
    #[arg(long = "K")]
    slices: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    mode: ModeArg,
    /// Rank of the planted model.
    #[arg(long, default_value_t = 5)]
    rank: usize,
    /// Noise norm relative to the signal, per slice.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, env = "DPAR2_THREADS")]
    threads: Option<usize>,
    #[arg(long, default_value_t = 32)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "svd")]
    init: InitArg,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            threads: self.threads.unwrap_or_else(default_threads).max(1),
            init: match self.init {
                InitArg::Svd => Initialization::Svd,
                InitArg::Identity => Initialization::Identity,
            },
            ..SolverOptions::default()
        }
    }
}

#[derive(Args)]
struct DecomposeArgs {
    /// Tensor archive, or a directory of slice_NNNN.csv files.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "dpar2")]
    method: MethodArg,
    #[arg(long)]
    rank: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Compare the final factors with the input (one extra pass).
    #[arg(long)]
    report_fitness: bool,
    #[arg(long)]
    out_factors: Option<PathBuf>,
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated IxJxK sizes.
    #[arg(long, value_delimiter = ',', default_value = "500x200x100")]
    sizes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    ranks: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "als,dpar2")]
    methods: Vec<MethodArg>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory written by `decompose --out-factors`.
    factors: PathBuf,
    #[arg(long, default_value_t = 0)]
    target: usize,
    #[arg(long, default_value_t = 10)]
    knn: usize,
    /// Also compute random walk with restart scores from the target.
    #[arg(long)]
    rwr: bool,
    #[arg(long, default_value_t = analysis::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = analysis::DEFAULT_RESTART)]
    restart: f64,
    /// Run all RWR iterations without the early stop.
    #[arg(long)]
    strict: bool,
    /// Restrict the analysis to slices with the target's row count instead
    /// of failing on mixed shapes.
    #[arg(long)]
    same_shape: bool,
    /// Also write the correlation matrix of the rows of V.
    #[arg(long)]
    pcc: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "DPAR2_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Decompose(a) => cmd_decompose(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Analyze(a) => cmd_analyze(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_INPUT
    }
}

fn cmd_generate(a: &GenerateArgs) -> parafac2::Result<()> {
    let spec = SyntheticSpec {
        rows: RowCounts::Max(a.rows),
        cols: a.cols,
        slices: a.slices,
        mode: match a.mode {
            ModeArg::Uniform => GenerationMode::UniformRandom,
            ModeArg::Planted => GenerationMode::PlantedParafac2,
        },
        true_rank: a.rank,
        noise_level: a.noise,
        seed: a.seed,
    };
    let x = generate(&spec)?;
    x.save_archive(&a.out)?;
    println!(
        "wrote {} (K={}, J={}, {} rows)",
        a.out.display(),
        x.num_slices(),
        x.num_cols(),
        x.total_rows()
    );
    Ok(())
}

fn load_tensor(path: &Path) -> parafac2::Result<(IrregularTensor, Option<String>)> {
    if path.is_dir() {
        Ok((IrregularTensor::load_csv_dir(path)?, None))
    } else {
        let x = IrregularTensor::load_archive(path)?;
        Ok((x, Some(factor_io::file_sha256(path)?)))
    }
}

fn cmd_decompose(a: &DecomposeArgs) -> parafac2::Result<()> {
    let (x, hash) = load_tensor(&a.input)?;
    let opts = a.solver.options();
    let method = Method::from(a.method);
    let (out, rep) = report::run_decomposition(&x, method, a.rank, &opts, a.report_fitness)?;
    if let Some(dir) = &a.out_factors {
        let manifest = FactorManifest {
            method: method.to_string(),
            rank: a.rank,
            seed: opts.seed,
            num_slices: x.num_slices(),
            num_cols: x.num_cols(),
            row_counts: x.row_counts(),
            archive_sha256: hash,
        };
        factor_io::write_factor_dir(dir, &out.factors, &manifest)?;
    }
    if let Some(path) = &a.out_report {
        rep.write_csv(path)?;
    }
    let last = rep
        .iterations
        .last()
        .map(|r| r.objective)
        .unwrap_or(f64::NAN);
    print!(
        "{method}: rank {} in {} iterations, objective {last:.6e}, {:.3}s",
        a.rank,
        rep.iterations.len(),
        rep.total_seconds
    );
    match rep.fitness {
        Some(f) => println!(", fitness {f:.6}"),
        None => println!(),
    }
    Ok(())
}

fn parse_size(s: &str) -> parafac2::Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.trim().split('x').collect();
    let bad = || Error::InvalidArgument(format!("size {s:?} is not IxJxK"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let n: Vec<usize> = parts
        .iter()
        .map(|p| p.parse().map_err(|_| bad()))
        .collect::<parafac2::Result<_>>()?;
    Ok((n[0], n[1], n[2]))
}

fn cmd_bench(a: &BenchArgs) -> parafac2::Result<()> {
    let cfg = BenchConfig {
        sizes: a
            .sizes
            .iter()
            .map(|s| parse_size(s))
            .collect::<parafac2::Result<_>>()?,
        ranks: a.ranks.clone(),
        methods: a.methods.iter().map(|&m| m.into()).collect(),
        options: a.solver.options(),
    };
    let rows = report::run_bench(&cfg)?;
    match &a.out {
        Some(path) => report::write_bench_csv(path, &rows)?,
        None => {
            let tmp = std::env::temp_dir().join(format!("dpar2-bench-{}.csv", std::process::id()));
            report::write_bench_csv(&tmp, &rows)?;
            print!("{}", fs::read_to_string(&tmp)?);
            fs::remove_file(&tmp)?;
        }
    }
    Ok(())
}

/// Square matrix with original slice indices as the header row and first
/// column.
fn write_labeled_matrix(path: &Path, labels: &[usize], m: &DenseMatrix) -> parafac2::Result<()> {
    let mut text = String::from("index");
    for l in labels {
        text.push_str(&format!(",{l}"));
    }
    text.push('\n');
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&l.to_string());
        for v in m.row(i) {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn cmd_analyze(a: &AnalyzeArgs) -> parafac2::Result<()> {
    let set = factor_io::read_factor_dir(&a.factors)?;
    let n = set.u.len();
    if a.target >= n {
        return Err(Error::IndexOutOfRange {
            index: a.target,
            len: n,
        });
    }
    let exec = Executor::new(a.threads.unwrap_or_else(default_threads).max(1));
    let nodes: Vec<usize> = if a.same_shape {
        let rows = set.u[a.target].rows();
        (0..n).filter(|&k| set.u[k].rows() == rows).collect()
    } else {
        (0..n).collect()
    };
    let us: Vec<DenseMatrix> = nodes.iter().map(|&k| set.u[k].clone()).collect();
    let sim = analysis::similarity_matrix(&us, a.gamma, &exec).map_err(|e| match e {
        Error::ShapeMismatch(_) => {
            let first = us[0].shape();
            let bad: Vec<String> = nodes
                .iter()
                .zip(&us)
                .filter(|(_, u)| u.shape() != first)
                .map(|(k, _)| k.to_string())
                .collect();
            Error::ShapeMismatch(format!(
                "U_{} is {first:?} but slices [{}] differ; pass --same-shape to compare only equal shapes",
                nodes[0],
                bad.join(", ")
            ))
        }
        other => other,
    })?;
    fs::create_dir_all(&a.out)?;
    write_labeled_matrix(&a.out.join("similarity.csv"), &nodes, &sim)?;

    let pos = nodes
        .iter()
        .position(|&k| k == a.target)
        .expect("target is always kept");
    let scores = sim.row(pos).to_vec();
    let local = analysis::knn(&scores, pos, a.knn)?;
    let mut knn_text = String::from("rank,index,score\n");
    for (rank, &i) in local.iter().enumerate() {
        knn_text.push_str(&format!("{},{},{}\n", rank + 1, nodes[i], scores[i]));
    }
    fs::write(a.out.join("knn.csv"), knn_text)?;

    if a.rwr {
        let graph = analysis::build_similarity_graph(&us, a.gamma, &exec)?;
        let mut params = RwrParams::one_hot(nodes.len(), pos);
        params.restart = a.restart;
        params.strict = a.strict;
        let r = analysis::rwr(&graph, &params)?;
        let mut text = String::from("index,score\n");
        for (&k, s) in nodes.iter().zip(&r.scores) {
            text.push_str(&format!("{k},{s}\n"));
        }
        fs::write(a.out.join("rwr.csv"), text)?;
    }
    if a.pcc {
        factor_io::write_matrix_csv(a.out.join("pcc.csv"), &analysis::pcc_matrix(&set.v)?)?;
    }
    println!(
        "analyzed {} of {n} slices from target {}; wrote {}",
        nodes.len(),
        a.target,
        a.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("500x200x100").unwrap(), (500, 200, 100));
        assert!(parse_size("500x200").is_err());
        assert!(parse_size("ax2x3").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::ZeroTensor), EXIT_NUMERIC);
        let rank = Error::RankTooLarge {
            rank: 3,
            rows: 2,
            cols: 2,
        };
        assert_eq!(exit_code(&rank), EXIT_INPUT);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), EXIT_INPUT);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
