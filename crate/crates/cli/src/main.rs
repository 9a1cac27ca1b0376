//! Command line driver: synthesize benchmark datasets, match them, score the
//! results, certify cycle consistency, and sweep noise/removal grids to CSV.
//!
//! Every command is deterministic given `--seed`.  Exit codes: 0 on success,
//! 1 for invalid input (flags, file contents, shapes), 2 for runtime
//! failures (I/O, numerical breakdown).

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mgmatch::affinity::{build_phi, build_vertex_affinity};
use mgmatch::consistency::{check_cycle_consistency, BulkPermutation};
use mgmatch::graphs::{load_dataset, save_dataset, GraphCollection, SPEC_VERSION};
use mgmatch::kernels::{KernelKind, KernelSpec};
use mgmatch::metrics::{score, strip_dummy_matches};
use mgmatch::projectors::{
    ProjectorKind, ProjectorSpec, DEFAULT_PROJECTOR_MAX_ITER, DEFAULT_PROJECTOR_TOL,
};
use mgmatch::solver::{solve, SolverConfig, DEFAULT_SOLVER_MAX_ITER, DEFAULT_SOLVER_TOL};
use mgmatch::synth::{generate, removal_sweep, SweepConfig, SweepRow, SynthSpec};
use mgmatch::{Error, Result};

#[derive(Parser)]
#[command(name = "mgmatch", version, about = "Kernelized multigraph matching")]
struct Cli {
    /// Plain-text key=value file supplying defaults; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of shuffled noisy copies.
    Synth(SynthArgs),
    /// Match a dataset and write the estimated bulk permutation.
    Match(MatchArgs),
    /// Score an estimated matching against a reference.
    Score(ScoreArgs),
    /// Verify cycle consistency of a matching file.
    CheckConsistency(CheckArgs),
    /// Benchmark both methods over a noise/removal grid, writing CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct BaseArgs {
    /// Vertices per graph.
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Edge probability of the base graph.
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    /// Attribute dimension for vertices and edges.
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Number of shuffled copies.
    #[arg(long, default_value_t = 10)]
    copies: usize,
    /// Upper bound on vertices turned into dummies per copy.
    #[arg(long, default_value_t = 0)]
    max_removed: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Standard deviation of the attribute noise.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Output dataset path.
    #[arg(short, long = "out", value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveOpts {
    /// Universe rank; defaults to the graph size.
    #[arg(long)]
    rank: Option<usize>,
    /// Projection operator: matcheig, gpow, or msync.
    #[arg(long, default_value = "matcheig")]
    projector: ProjectorKind,
    /// Stop once successive iterates are closer than this.
    #[arg(long, default_value_t = DEFAULT_SOLVER_TOL)]
    tol: f64,
    /// Iteration cap for the ascent loop.
    #[arg(long, default_value_t = DEFAULT_SOLVER_MAX_ITER)]
    max_iter: usize,
    /// Inner tolerance of the gpow projector.
    #[arg(long, default_value_t = DEFAULT_PROJECTOR_TOL)]
    proj_tol: f64,
    /// Inner iteration cap of the gpow projector.
    #[arg(long, default_value_t = DEFAULT_PROJECTOR_MAX_ITER)]
    proj_max_iter: usize,
    /// Vertex kernel: linear or gaussian.
    #[arg(long, default_value = "linear")]
    vertex_kernel: KernelKind,
    /// Bandwidth of the gaussian vertex kernel.
    #[arg(long, default_value_t = 1.0)]
    vertex_gamma: f64,
    /// Edge kernel: linear or gaussian.
    #[arg(long, default_value = "linear")]
    edge_kernel: KernelKind,
    /// Bandwidth of the gaussian edge kernel.
    #[arg(long, default_value_t = 1.0)]
    edge_gamma: f64,
    /// Feature dimension of the random Fourier maps.
    #[arg(long, default_value_t = 100)]
    rff_dim: usize,
    /// Cap on worker threads; results never depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct MatchArgs {
    /// Input dataset file.
    dataset: PathBuf,
    #[command(flatten)]
    solve: SolveOpts,
    /// Seed for randomized kernel features.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output matching path.
    #[arg(short, long = "out", value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Estimated matching file.
    estimate: PathBuf,
    /// Reference: another matching file, or a dataset carrying ground truth.
    reference: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Matching file to certify.
    matching: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Comma-separated noise levels to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    sigmas: Vec<f64>,
    /// Comma-separated removal caps; defaults to --max-removed alone.
    #[arg(long, value_delimiter = ',')]
    max_removed_list: Option<Vec<usize>>,
    /// Independent repetitions per grid cell.
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[command(flatten)]
    solve: SolveOpts,
    /// Output CSV path.
    #[arg(short, long = "out", value_name = "FILE")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match apply_config(argv) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let code = match e {
        Error::Validation(_) | Error::Parse(_) | Error::Dimension(_) => 1,
        Error::Numerical(_) | Error::Io(_) => 2,
    };
    ExitCode::from(code)
}

fn run(command: &Command) -> Result<ExitCode> {
    match command {
        Command::Synth(a) => cmd_synth(a)?,
        Command::Match(a) => cmd_match(a)?,
        Command::Score(a) => cmd_score(a)?,
        Command::CheckConsistency(a) => return cmd_check_consistency(a),
        Command::Sweep(a) => cmd_sweep(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn synth_spec(base: &BaseArgs, sigma: f64) -> SynthSpec<f64> {
    SynthSpec {
        m: base.m,
        edge_prob: base.p,
        attr_dim: base.d,
        n_copies: base.copies,
        noise_sigma: sigma,
        max_removed: base.max_removed,
        seed: base.seed,
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let c = generate(&synth_spec(&a.base, a.sigma))?;
    save_dataset(&a.out, &c)
}

impl SolveOpts {
    /// Distinct seeds keep the two random feature maps independent.
    fn kernels(&self, seed: u64) -> (KernelSpec<f64>, KernelSpec<f64>) {
        let spec = |kind, gamma, seed| match kind {
            KernelKind::Linear => KernelSpec::linear(),
            KernelKind::Gaussian => KernelSpec::gaussian(gamma, self.rff_dim, seed),
        };
        (
            spec(self.vertex_kernel, self.vertex_gamma, seed),
            spec(self.edge_kernel, self.edge_gamma, seed ^ 0x9E37_79B9_7F4A_7C15),
        )
    }

    fn solver_config(&self, default_rank: usize) -> Result<SolverConfig<f64>> {
        if self.threads == Some(0) {
            return Err(Error::Validation("thread cap must be at least 1".into()));
        }
        let mut proj = ProjectorSpec::new(self.projector, self.rank.unwrap_or(default_rank));
        proj.tol = self.proj_tol;
        proj.max_iter = self.proj_max_iter;
        let mut cfg = SolverConfig::new(proj);
        cfg.tol = self.tol;
        cfg.max_iter = self.max_iter;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct MatchSummary {
    spec_version: String,
    iterations: usize,
    converged: bool,
    objective_trace: Vec<f64>,
    wall_time_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1: Option<f64>,
}

fn cmd_match(a: &MatchArgs) -> Result<()> {
    let start = Instant::now();
    let c: GraphCollection<f64> = load_dataset(&a.dataset)?;
    let cfg = a.solve.solver_config(c.num_vertices())?;
    let (vertex_kernel, edge_kernel) = a.solve.kernels(a.seed);
    let kv = build_vertex_affinity(&c, &vertex_kernel)?;
    let phi = build_phi(&c, &edge_kernel)?;
    let (x, trace) = solve(&c, &kv, &phi, &cfg)?;
    write_matching(&a.out, &x)?;
    let f1 = match c.ground_truth() {
        Some(truth) => Some(score::<f64>(&strip_dummy_matches(&x, &c)?, truth)?.f1),
        None => None,
    };
    let summary = MatchSummary {
        spec_version: SPEC_VERSION.to_string(),
        iterations: trace.iterations_run,
        converged: trace.converged,
        objective_trace: trace.objective_values,
        wall_time_ms: start.elapsed().as_millis() as u64,
        f1,
    };
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

#[derive(Serialize)]
struct ScoreSummary {
    spec_version: String,
    precision: f64,
    recall: f64,
    f1: f64,
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let est = read_matching(&a.estimate)?;
    let (est, truth) = match read_reference(&a.reference)? {
        Reference::Matching(truth) => (est, truth),
        Reference::Dataset(c) => {
            let truth = c.ground_truth().cloned().ok_or_else(|| {
                Error::Validation(format!("{} carries no ground truth", a.reference.display()))
            })?;
            (strip_dummy_matches(&est, &c)?, truth)
        }
    };
    let s = score::<f64>(&est, &truth)?;
    let summary = ScoreSummary {
        spec_version: SPEC_VERSION.to_string(),
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
    };
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn cmd_check_consistency(a: &CheckArgs) -> Result<ExitCode> {
    let x = read_matching(&a.matching)?;
    match check_cycle_consistency(&x) {
        Ok(()) => {
            println!("consistent");
            Ok(ExitCode::SUCCESS)
        }
        Err(violation) => {
            println!("{violation}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let base = synth_spec(&a.base, 0.0);
    let (vertex_kernel, edge_kernel) = a.solve.kernels(a.base.seed);
    let cfg = SweepConfig {
        vertex_kernel,
        edge_kernel,
        solver: a.solve.solver_config(a.base.m)?,
        repeats: a.repeats,
    };
    let removals = a
        .max_removed_list
        .clone()
        .unwrap_or_else(|| vec![a.base.max_removed]);
    let rows = removal_sweep(&base, &removals, &a.sigmas, &cfg)?;
    write_csv(&a.out, &rows)
}

fn write_csv(path: &Path, rows: &[SweepRow<f64>]) -> Result<()> {
    let mut out = format!("# spec_version={SPEC_VERSION}\n");
    out.push_str("sigma,max_removed,method,f1_mean,f1_std,repeats\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.sigma,
            r.max_removed,
            r.method.as_str(),
            r.f1_mean,
            r.f1_std,
            r.repeats
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Matching files carry the same dense 0/1 rows as a dataset's ground truth.
#[derive(Serialize, Deserialize)]
struct MatchingDoc {
    #[serde(default)]
    spec_version: Option<String>,
    n: usize,
    m: usize,
    matrix: Vec<Vec<u8>>,
}

fn write_matching(path: &Path, x: &BulkPermutation) -> Result<()> {
    let doc = MatchingDoc {
        spec_version: Some(SPEC_VERSION.to_string()),
        n: x.n_graphs(),
        m: x.block_size(),
        matrix: x.to_binary_rows(),
    };
    let file = fs::File::create(path)?;
    serde_json::to_writer(BufWriter::new(file), &doc)
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn matching_from_doc(doc: MatchingDoc) -> Result<BulkPermutation> {
    if let Some(v) = &doc.spec_version {
        if v != SPEC_VERSION {
            return Err(Error::Parse(format!(
                "unsupported spec_version {v:?}, this build reads {SPEC_VERSION:?}"
            )));
        }
    }
    BulkPermutation::from_binary_rows(&doc.matrix, doc.n, doc.m)
}

fn read_matching(path: &Path) -> Result<BulkPermutation> {
    let text = fs::read_to_string(path)?;
    let doc: MatchingDoc = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    matching_from_doc(doc)
}

enum Reference {
    Matching(BulkPermutation),
    Dataset(GraphCollection<f64>),
}

fn read_reference(path: &Path) -> Result<Reference> {
    let text = fs::read_to_string(path)?;
    if let Ok(doc) = serde_json::from_str::<MatchingDoc>(&text) {
        return Ok(Reference::Matching(matching_from_doc(doc)?));
    }
    match load_dataset(path) {
        Ok(c) => Ok(Reference::Dataset(c)),
        Err(Error::Parse(e)) => Err(Error::Parse(format!(
            "{}: neither a matching nor a dataset file: {e}",
            path.display()
        ))),
        Err(e) => Err(e),
    }
}

/// Splices config-file entries into the argument list.  Each `key=value`
/// line stands for `--key value` and is appended only when the flag is not
/// already present, so explicit flags always take precedence.
fn apply_config(mut argv: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path)?;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse(format!(
                "{path}:{}: expected key=value, got {line:?}",
                idx + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Parse(format!("{path}:{}: empty key", idx + 1)));
        }
        if key == "config" {
            return Err(Error::Validation("config files cannot nest via a config key".into()));
        }
        if !has_flag(&argv, key) {
            argv.push(format!("--{key}"));
            argv.push(value.to_string());
        }
    }
    Ok(argv)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn has_flag(argv: &[String], key: &str) -> bool {
    let long = format!("--{key}");
    let assigned = format!("--{key}=");
    argv.iter().any(|a| {
        a == &long || a.starts_with(&assigned) || (key == "out" && (a == "-o" || a.starts_with("-o=")))
    })
}
