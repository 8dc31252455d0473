//! The `boostne` command line: `embed`, `eval` and `residuals`.
//!
//! Every command writes a JSON run manifest next to its primary output.
//! `embed --from-manifest` replays a previous run from its manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::boost::{self, BoostConfig};
use crate::connectivity::{ConnectivityConfig, ConnectivityKind, ConnectivityMatrix};
use crate::error::{Error, Result};
use crate::eval::{self, DecisionRule, EvalConfig};
use crate::fingerprint::Fingerprint;
use crate::graph::{self, EdgeListFormat, Graph, DEFAULT_DENSE_NODE_LIMIT};
use crate::io;
use crate::nmf::NmfConfig;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

const DEFAULT_EMBEDDING_PATH: &str = "embedding.txt";

#[derive(Debug, Parser)]
#[command(name = "boostne", version, about = "Multi-level network embedding by boosted NMF")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a connectivity matrix and learn a multi-level embedding.
    Embed(EmbedArgs),
    /// Score an embedding by multi-label node classification.
    Eval(EvalArgs),
    /// Terminal residual norm for a sweep over the number of levels.
    Residuals(ResidualArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Deepwalk,
    Line,
    Grarep,
}

/// Graph input and connectivity-matrix options shared by `embed` and
/// `residuals`.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct MatrixArgs {
    /// Edge list: `src dst [weight]` per line.
    #[arg(long, value_name = "PATH")]
    pub edges: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "deepwalk")]
    pub matrix: MatrixKind,
    /// Context window T (deepwalk).
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Shift b; defaults to 5 for deepwalk/line and 1/n for grarep.
    #[arg(long)]
    pub shift: Option<f64>,
    /// Transition step p (grarep).
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    /// Remove zero-degree nodes instead of failing on them.
    #[arg(long)]
    pub drop_isolated: bool,
    /// Node-count ceiling for dense n x n walk matrices.
    #[arg(long, default_value_t = DEFAULT_DENSE_NODE_LIMIT)]
    pub max_dense_nodes: usize,
}

/// Solver options shared by `embed` and `residuals`.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SolverArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub nmf_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub nmf_tol: f64,
    /// Allow a total dimension that is not below the node count.
    #[arg(long)]
    pub allow_wide: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub input: MatrixArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Total embedding dimension d.
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Number of levels k; d must be divisible by k.
    #[arg(long, default_value_t = 8)]
    pub levels: usize,
    /// Embedding output (default `embedding.txt`). The residual trace and
    /// manifest are written to `<out>.trace.json` and `<out>.manifest.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replay the run recorded in this manifest (`--out` may redirect it).
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub embedding: PathBuf,
    /// Label file: `node_id label [label ...]` per line.
    #[arg(long, value_name = "PATH")]
    pub labels: PathBuf,
    /// Comma-separated training ratios.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// L2 penalty on the logistic-regression weights.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Gradient iterations per classifier.
    #[arg(long, default_value_t = 300)]
    pub iters: usize,
    /// Predict every class scoring at least this instead of the top-ℓ rule.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Split within each primary-label class instead of uniformly.
    #[arg(long)]
    #[serde(default)]
    pub stratified: bool,
    /// Output prefix: writes `<out>.json`, `<out>.txt` and `<out>.manifest.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub input: MatrixArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Comma-separated level counts, each dividing `--dim`.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
    pub levels_sweep: Vec<usize>,
    /// CSV output; the manifest goes to `<out>.manifest.json`. Prints to
    /// stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: Fingerprint,
}

impl FileRecord {
    fn of(path: &Path) -> Result<Self> {
        Ok(FileRecord {
            path: path.to_owned(),
            sha256: Fingerprint::of_file(path)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "command", content = "parameters", rename_all = "lowercase")]
pub enum RunParameters {
    Embed(EmbedArgs),
    Eval(EvalArgs),
    Residuals(ResidualArgs),
}

/// Record of one command invocation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub run: RunParameters,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub duration_secs: f64,
    pub warnings: Vec<String>,
}

impl RunManifest {
    fn new(run: RunParameters) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            run,
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_secs: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

impl MatrixArgs {
    fn edges(&self) -> Result<&Path> {
        self.edges
            .as_deref()
            .ok_or_else(|| Error::Parameter("--edges is required".into()))
    }

    pub fn load_graph(&self) -> Result<Graph> {
        let path = self.edges()?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let g = graph::load_edge_list(BufReader::new(file), EdgeListFormat::Auto).map_err(|e| match e {
            Error::Parse { line, message } => Error::Data(format!("{}:{line}: {message}", path.display())),
            other => other,
        })?;
        if self.drop_isolated {
            g.drop_isolated()
        } else {
            Ok(g)
        }
    }

    pub fn connectivity_config(&self, n: usize) -> ConnectivityConfig {
        match self.matrix {
            MatrixKind::Deepwalk => ConnectivityConfig::deepwalk(self.window, self.shift.unwrap_or(5.0)),
            MatrixKind::Line => ConnectivityConfig::line(self.shift.unwrap_or(5.0)),
            MatrixKind::Grarep => ConnectivityConfig {
                kind: ConnectivityKind::GraRep,
                window: 1,
                shift: self.shift.unwrap_or(1.0 / n as f64),
                step: self.step,
            },
        }
    }

    pub fn build(&self) -> Result<(Graph, ConnectivityMatrix)> {
        let g = self.load_graph()?;
        let x = self
            .connectivity_config(g.n())
            .build_limited(&g, self.max_dense_nodes)?;
        Ok((g, x))
    }
}

impl SolverArgs {
    fn boost_config(&self, dim: usize, levels: usize) -> Result<BoostConfig> {
        let mut cfg = BoostConfig::with_dimension(dim, levels)?;
        cfg.seed = self.seed;
        cfg.allow_wide = self.allow_wide;
        cfg.nmf = NmfConfig {
            max_iters: self.nmf_iters,
            rel_tol: self.nmf_tol,
            ..cfg.nmf
        };
        Ok(cfg)
    }
}

/// Runs `embed`, returning its manifest. Replays a manifest when
/// `from_manifest` is set.
pub fn cmd_embed(args: &EmbedArgs) -> Result<RunManifest> {
    let started = Instant::now();
    let args = match &args.from_manifest {
        None => args.clone(),
        Some(path) => {
            let manifest = RunManifest::load(path)?;
            let RunParameters::Embed(mut recorded) = manifest.run else {
                return Err(Error::Parameter(format!(
                    "{} is not an embed manifest",
                    path.display()
                )));
            };
            for input in &manifest.inputs {
                let now = Fingerprint::of_file(&input.path)?;
                if now != input.sha256 {
                    return Err(Error::Data(format!(
                        "{} changed since the manifest was written",
                        input.path.display()
                    )));
                }
            }
            if args.out.is_some() {
                recorded.out = args.out.clone();
            }
            recorded
        }
    };

    let cfg = args.solver.boost_config(args.dim, args.levels)?;
    let (g, x) = args.input.build()?;
    let emb = boost::boostne(&x, &cfg)?;

    let out = &args.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_EMBEDDING_PATH));
    let trace_path = with_suffix(out, ".trace.json");
    let manifest_path = with_suffix(out, ".manifest.json");
    io::write_embedding(create(out)?, g.node_ids(), emb.embedding.view())
        .map_err(|e| relabel_io(e, out))?;
    write_json(&trace_path, &boost::residual_trace(&emb))?;

    let mut manifest = RunManifest::new(RunParameters::Embed(EmbedArgs {
        from_manifest: None,
        out: Some(out.clone()),
        ..args.clone()
    }));
    manifest.inputs.push(FileRecord::of(args.input.edges()?)?);
    manifest.outputs.push(FileRecord::of(out)?);
    manifest.outputs.push(FileRecord::of(&trace_path)?);
    manifest.warnings = emb.warnings.clone();
    manifest.duration_secs = started.elapsed().as_secs_f64();
    manifest.write(&manifest_path)?;
    Ok(manifest)
}

fn relabel_io(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

/// Runs `eval`, returning the report and manifest.
pub fn cmd_eval(args: &EvalArgs) -> Result<(eval::EvalReport, RunManifest)> {
    let started = Instant::now();
    let emb_file = File::open(&args.embedding).map_err(|e| Error::io(&args.embedding, e))?;
    let emb = io::read_embedding(BufReader::new(emb_file)).map_err(|e| match e {
        Error::Parse { line, message } => {
            Error::Data(format!("{}:{line}: {message}", args.embedding.display()))
        }
        other => other,
    })?;
    let label_file = File::open(&args.labels).map_err(|e| Error::io(&args.labels, e))?;
    let labels = io::read_labels(BufReader::new(label_file), &emb.node_ids)?;

    let cfg = EvalConfig {
        train_ratios: args.ratios.clone(),
        repeats: args.repeats,
        seed: args.seed,
        lambda: args.lambda,
        iterations: args.iters,
        rule: args.threshold.map_or(DecisionRule::TopL, DecisionRule::Threshold),
        stratified: args.stratified,
    };
    let report = eval::evaluate(emb.vectors.view(), &labels, &cfg)?;

    let mut manifest = RunManifest::new(RunParameters::Eval(args.clone()));
    manifest.inputs.push(FileRecord::of(&args.embedding)?);
    manifest.inputs.push(FileRecord::of(&args.labels)?);
    manifest.warnings = report.warnings.clone();
    if let Some(prefix) = &args.out {
        let json = with_suffix(prefix, ".json");
        let table = with_suffix(prefix, ".txt");
        write_json(&json, &report)?;
        let mut t = create(&table)?;
        t.write_all(report.to_table().as_bytes())
            .and_then(|_| t.flush())
            .map_err(|e| Error::io(&table, e))?;
        manifest.outputs.push(FileRecord::of(&json)?);
        manifest.outputs.push(FileRecord::of(&table)?);
        manifest.duration_secs = started.elapsed().as_secs_f64();
        manifest.write(&with_suffix(prefix, ".manifest.json"))?;
    } else {
        manifest.duration_secs = started.elapsed().as_secs_f64();
    }
    Ok((report, manifest))
}

/// One row of the level sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub levels: usize,
    pub level_rank: usize,
    /// `‖R_{k+1}‖_F`
    pub terminal_norm: f64,
    /// `‖R_{k+1}‖_F / ‖X‖_F`
    pub relative_norm: f64,
    /// `‖X − Σ U_i V_i‖²_F`
    pub joint_objective: f64,
    /// `Σ_i nnz(R_i)`
    pub total_nnz: usize,
}

pub const SWEEP_CSV_HEADER: &str = "levels,level_rank,terminal_norm,relative_norm,joint_objective,total_nnz";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.12e},{:.12e},{:.12e},{}",
            self.levels,
            self.level_rank,
            self.terminal_norm,
            self.relative_norm,
            self.joint_objective,
            self.total_nnz
        )
    }
}

/// Checks a level sweep against the total dimension.
pub fn validate_sweep(dim: usize, sweep: &[usize]) -> Result<()> {
    if sweep.is_empty() {
        return Err(Error::Parameter("--levels-sweep is empty".into()));
    }
    let bad: Vec<String> = sweep
        .iter()
        .filter(|&&k| k == 0 || !dim.is_multiple_of(k))
        .map(|k| k.to_string())
        .collect();
    if !bad.is_empty() {
        return Err(Error::Parameter(format!(
            "level counts not dividing --dim {dim}: {}",
            bad.join(", ")
        )));
    }
    Ok(())
}

/// Boosts `x` once per level count at a fixed total dimension.
pub fn level_sweep(
    x: &ConnectivityMatrix,
    solver: &SolverArgs,
    dim: usize,
    sweep: &[usize],
) -> Result<Vec<SweepRow>> {
    validate_sweep(dim, sweep)?;
    let norm = x.matrix().frobenius_norm();
    sweep
        .iter()
        .map(|&k| {
            let cfg = solver.boost_config(dim, k)?;
            let emb = boost::boostne(x, &cfg)?;
            Ok(SweepRow {
                levels: k,
                level_rank: cfg.level_rank,
                terminal_norm: emb.terminal_norm,
                relative_norm: if norm > 0.0 { emb.terminal_norm / norm } else { 0.0 },
                joint_objective: emb.joint_objective(x.matrix())?,
                total_nnz: emb.levels.iter().map(|l| l.residual_nnz_before).sum(),
            })
        })
        .collect()
}

/// Runs `residuals`, returning the sweep rows and manifest.
pub fn cmd_residuals(args: &ResidualArgs) -> Result<(Vec<SweepRow>, RunManifest)> {
    let started = Instant::now();
    validate_sweep(args.dim, &args.levels_sweep)?;
    let (_, x) = args.input.build()?;
    let rows = level_sweep(&x, &args.solver, args.dim, &args.levels_sweep)?;
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    let mut manifest = RunManifest::new(RunParameters::Residuals(args.clone()));
    manifest.inputs.push(FileRecord::of(args.input.edges()?)?);
    match &args.out {
        Some(path) => {
            let mut f = create(path)?;
            f.write_all(csv.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(path, e))?;
            manifest.outputs.push(FileRecord::of(path)?);
            manifest.duration_secs = started.elapsed().as_secs_f64();
            manifest.write(&with_suffix(path, ".manifest.json"))?;
        }
        None => {
            print!("{csv}");
            manifest.duration_secs = started.elapsed().as_secs_f64();
        }
    }
    Ok((rows, manifest))
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("BOOSTNE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Parameter(format!("BOOSTNE_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Internal(e.to_string()))
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Embed(args) => {
            let m = cmd_embed(&args)?;
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Eval(args) => {
            let (report, m) = cmd_eval(&args)?;
            for w in m.warnings.iter().take(5) {
                eprintln!("warning: {w}");
            }
            print!("{}", report.to_table());
        }
        Command::Residuals(args) => {
            cmd_residuals(&args)?;
        }
    }
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
