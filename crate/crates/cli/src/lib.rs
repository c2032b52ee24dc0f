//! Command-line front end for `ultracalc-core`.
//!
//! Structured objects are read and written as JSON, tables and matrices as CSV.
//! Numbers are printed in shortest round-trip form, so output is byte-stable
//! for fixed inputs and seed.

// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod expr;
pub mod verify;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use ultracalc_core::basis::{basis_pair, default_sigma_points, delta, delta_sided};
use ultracalc_core::calculus::{self, DerivKind};
use ultracalc_core::distributions::{embed, pair, DistributionSpec, TestFunction};
use ultracalc_core::projection::{l2_distance, tilde, FunctionHandle};
use ultracalc_core::refinement::{Ladder, RefinePolicy, Stage};
use ultracalc_core::space::{SpaceFile, UltrafunctionFile};
use ultracalc_core::{Grid, Side, Space, Ultrafunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "ULTRACALC_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ultracalc_core::Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ultracalc", version, about = "Piecewise-polynomial calculus of generalized functions")]
pub struct Cli {
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a grid on [-beta, beta].
    Grid(GridArgs),
    /// Build a space: a grid plus a polynomial degree.
    Space(SpaceArgs),
    /// Project a function onto a space.
    Project(ProjectArgs),
    /// Delta ultrafunction at a point.
    Delta(DeltaArgs),
    /// Delta/Sigma basis pair for a set of points.
    Basis(BasisArgs),
    /// Apply the derivative D or D2.
    Derive(DeriveArgs),
    /// Definite integral between two nodes.
    Integrate(IntegrateArgs),
    /// Run the randomized identity suites.
    Verify(VerifyArgs),
    /// Embed a distribution d^k f.
    Embed(EmbedArgs),
    /// Pair a distribution with a test function.
    Pair(PairArgs),
    /// Evaluate an observable along a refinement ladder.
    Refine(RefineArgs),
    /// Export a derivative operator as a dense matrix.
    ExportOp(ExportOpArgs),
    /// Sample an ultrafunction at points.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Number of uniform cells.
    #[arg(long, conflicts_with_all = ["tags", "h_max"])]
    pub ell: Option<usize>,
    /// Points that must be nodes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "h_max")]
    pub tags: Vec<f64>,
    /// Largest allowed cell width with --tags.
    #[arg(long)]
    pub h_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// Grid JSON file.
    #[arg(long, conflicts_with_all = ["ell", "tags", "h_max"])]
    pub grid: Option<PathBuf>,
    #[command(flatten)]
    pub build: GridArgs,
    #[arg(long, short = 'p')]
    pub degree: usize,
}

#[derive(Debug, Args)]
pub struct SpaceOpt {
    /// Space JSON file; defaults to 16 uniform cells on [-1, 1] with degree 2.
    #[arg(long)]
    pub space: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    #[arg(long = "fn", allow_hyphen_values = true)]
    pub function: String,
    /// Integrable singular points of the function.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub singular: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SideArg {
    Plus,
    Minus,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    #[arg(long, allow_hyphen_values = true)]
    pub at: f64,
    /// One-sided delta at a node.
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    /// `p + 1` points per cell; defaults to the Gauss abscissae.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    #[value(name = "D")]
    D,
    #[value(name = "D2")]
    D2,
}

impl From<KindArg> for DerivKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::D => DerivKind::D,
            KindArg::D2 => DerivKind::D2,
        }
    }
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "D")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 1)]
    pub times: usize,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    /// Ultrafunction JSON; without it (and without --fn) the integrand is 1.
    #[arg(long = "in", conflicts_with = "function")]
    pub input: Option<PathBuf>,
    /// Integrand, projected onto the space first.
    #[arg(long = "fn", allow_hyphen_values = true)]
    pub function: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    /// all, delta, symmetry, sigma, locality, ibp, ibp-naive, ftc, piecewise,
    /// projection or distributions.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    #[arg(long)]
    pub k: usize,
    #[arg(long = "fn", allow_hyphen_values = true)]
    pub function: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub singular: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    /// Distribution JSON: `{"k": .., "fn": "..", "label": ".."}`.
    #[arg(long)]
    pub dist: PathBuf,
    /// Test function.
    #[arg(long, allow_hyphen_values = true)]
    pub test: String,
    /// Declared support `lo,hi` of the test function.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub support: Vec<f64>,
    /// Number of dyadic levels for a convergence table.
    #[arg(long)]
    pub refine: Option<usize>,
    /// Exact value for the table's error column.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Ladder JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Observable label from the config.
    #[arg(long)]
    pub observe: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ExportOpArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    #[arg(long, value_enum, default_value = "D")]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: MatrixFormat,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub space: SpaceOpt,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "n")]
    pub points: Vec<f64>,
    /// Number of equally spaced points on [-beta, beta].
    #[arg(long)]
    pub n: Option<usize>,
}

/// Distribution file consumed by `pair`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    pub k: usize,
    #[serde(rename = "fn")]
    pub function: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub singular: Vec<f64>,
}

/// Ladder file consumed by `refine`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderFile {
    #[serde(default = "one")]
    pub beta: f64,
    pub ell: usize,
    pub degree: usize,
    #[serde(default = "dyadic")]
    pub policy: RefinePolicy<f64>,
    pub levels: usize,
    pub observables: BTreeMap<String, ObservableFile>,
}

fn one() -> f64 {
    1.0
}

fn dyadic() -> RefinePolicy<f64> {
    RefinePolicy::DyadicSplit
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableFile {
    /// `||f - f~||`, target 0.
    L2Error {
        #[serde(rename = "fn")]
        function: String,
        #[serde(default)]
        singular: Vec<f64>,
    },
    /// `f~(x)`.
    ValueAt {
        #[serde(rename = "fn")]
        function: String,
        x: f64,
        #[serde(default)]
        target: Option<f64>,
    },
    /// `integral of f~` over `[-beta, beta]`.
    Integral {
        #[serde(rename = "fn")]
        function: String,
        #[serde(default)]
        singular: Vec<f64>,
        #[serde(default)]
        target: Option<f64>,
    },
    /// `<D^k f~, phi~>`.
    Pair {
        k: usize,
        #[serde(rename = "fn")]
        function: String,
        test: String,
        #[serde(default)]
        support: Option<(f64, f64)>,
        #[serde(default)]
        target: Option<f64>,
    },
}

impl ObservableFile {
    fn target(&self) -> Option<f64> {
        match self {
            ObservableFile::L2Error { .. } => Some(0.0),
            ObservableFile::ValueAt { target, .. }
            | ObservableFile::Integral { target, .. }
            | ObservableFile::Pair { target, .. } => *target,
        }
    }
}

/// Caps rayon's global pool at `ULTRACALC_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a pool configured earlier in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return e.exit_code();
    }
    let mut buf = Vec::new();
    let result = execute(&cli.command, &mut buf, err);
    let written = match &cli.out {
        Some(path) if result.is_ok() => fs::write(path, &buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        _ => out.write_all(&buf).map_err(|e| CliError::Io(e.to_string())),
    };
    match result.and(written) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command, out: &mut Vec<u8>, err: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Grid(a) => emit_json(out, &grid_from(a)?),
        Command::Space(a) => {
            let grid = match &a.grid {
                Some(path) => read_json::<Grid>(path)?,
                None => grid_from(&a.build)?,
            };
            emit_json(out, &Space::build(grid, a.degree).to_file())
        }
        Command::Project(a) => {
            let space = load_space(&a.space)?;
            let u = tilde(&space, &function(&a.function, &a.singular)?)?;
            emit_json(out, &u.to_file())
        }
        Command::Delta(a) => {
            let space = load_space(&a.space)?;
            let u = match a.side {
                None => delta(&space, a.at)?,
                Some(side) => {
                    let node = space
                        .grid()
                        .node_index(a.at)
                        .ok_or_else(|| ultracalc_core::Error::InvalidArgument(format!("{} is not a node", a.at)))?;
                    let side = match side {
                        SideArg::Plus => Side::Plus,
                        SideArg::Minus => Side::Minus,
                    };
                    delta_sided(&space, node, side)?
                }
            };
            emit_json(out, &u.to_file())
        }
        Command::Basis(a) => {
            let space = load_space(&a.space)?;
            let points = if a.points.is_empty() { default_sigma_points(&space) } else { a.points.clone() };
            let pair = basis_pair(&space, &points)?;
            emit_json(out, &pair.to_file())
        }
        Command::Derive(a) => {
            let space = load_space(&a.space)?;
            let u = load_ultrafunction(&space, &a.input)?;
            let op = calculus::build(&space, a.kind.into());
            emit_json(out, &op.apply_n(&u, a.times)?.to_file())
        }
        Command::Integrate(a) => {
            let space = load_space(&a.space)?;
            let u = match (&a.input, &a.function) {
                (Some(path), _) => load_ultrafunction(&space, path)?,
                (None, Some(f)) => tilde(&space, &function(f, &[])?)?,
                (None, None) => Ultrafunction::constant(&space, 1.0),
            };
            let v = calculus::integrate(&u, a.from, a.to)?;
            emit_line(out, &v.to_string())
        }
        Command::Verify(a) => {
            let space = load_space(&a.space)?;
            let suites = verify::Suite::select(&a.suite)
                .ok_or_else(|| CliError::Usage(format!("unknown suite {:?}", a.suite)))?;
            let report = verify::run(&space, &suites, a.trials, a.seed)?;
            match a.format {
                ReportFormat::Text => out.extend_from_slice(report.to_text().as_bytes()),
                ReportFormat::Json => emit_json(out, &report)?,
            }
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Failed("identity defects above tolerance".into()))
            }
        }
        Command::Embed(a) => {
            let space = load_space(&a.space)?;
            let spec = DistributionSpec::new(a.k, function(&a.function, &a.singular)?, "cli");
            emit_json(out, &embed(&space, &spec)?.to_file())
        }
        Command::Pair(a) => run_pair(a, out, err),
        Command::Refine(a) => {
            let cfg: LadderFile = read_json(&a.config)?;
            let mut ladder = Ladder::build(
                Stage::new(Grid::build_uniform(cfg.beta, cfg.ell)?, cfg.degree),
                cfg.policy,
                cfg.levels,
            )?;
            let spec = cfg
                .observables
                .get(&a.observe)
                .ok_or_else(|| CliError::Usage(format!("no observable {:?} in {}", a.observe, a.config.display())))?;
            let target = spec.target();
            register(&mut ladder, &a.observe, spec)?;
            let obs = ladder.observe(&a.observe, target)?;
            out.extend_from_slice(obs.to_csv().as_bytes());
            report_fit(err, &obs);
            Ok(())
        }
        Command::ExportOp(a) => {
            let space = load_space(&a.space)?;
            let kind: DerivKind = a.kind.into();
            let m = calculus::build(&space, kind).matrix();
            match a.format {
                MatrixFormat::Csv => {
                    for i in 0..m.rows() {
                        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
                        emit_line(out, &row.join(","))?;
                    }
                    Ok(())
                }
                MatrixFormat::Json => {
                    #[derive(Serialize)]
                    struct OperatorFile<'a> {
                        kind: DerivKind,
                        space: String,
                        dim: usize,
                        matrix: Vec<&'a [f64]>,
                    }
                    let rows = (0..m.rows()).map(|i| m.row(i)).collect();
                    emit_json(out, &OperatorFile { kind, space: space.hash(), dim: m.rows(), matrix: rows })
                }
            }
        }
        Command::Sample(a) => {
            let space = load_space(&a.space)?;
            let u = load_ultrafunction(&space, &a.input)?;
            let points = match (a.points.is_empty(), a.n) {
                (false, _) => a.points.clone(),
                (true, n) => {
                    let n = n.unwrap_or(101);
                    if n < 2 {
                        return Err(CliError::Usage("--n must be at least 2".into()));
                    }
                    let beta = space.grid().beta();
                    (0..n).map(|i| -beta + 2.0 * beta * i as f64 / (n - 1) as f64).collect()
                }
            };
            emit_line(out, "x,value")?;
            for x in points {
                emit_line(out, &format!("{},{}", x, u.eval(x)))?;
            }
            Ok(())
        }
    }
}

fn run_pair(a: &PairArgs, out: &mut Vec<u8>, err: &mut dyn Write) -> CliResult<()> {
    let space = load_space(&a.space)?;
    let dist: DistributionFile = read_json(&a.dist)?;
    let spec = DistributionSpec::new(dist.k, function(&dist.function, &dist.singular)?, dist.label.clone());
    let phi = match a.support.as_slice() {
        [] => TestFunction::new(function(&a.test, &[])?),
        [lo, hi] => TestFunction::with_support(function(&a.test, &[])?, *lo, *hi),
        _ => return Err(CliError::Usage("--support takes exactly two values lo,hi".into())),
    };
    let Some(levels) = a.refine else {
        let t = embed(&space, &spec)?;
        return emit_line(out, &pair(&space, &t, &phi)?.to_string());
    };
    let mut ladder = Ladder::build(Stage::new(space.grid().clone(), space.degree()), RefinePolicy::DyadicSplit, levels)?;
    ladder.register("pair", move |stage: &Stage<f64>| {
        let s = stage.space();
        pair(&s, &embed(&s, &spec)?, &phi)
    });
    let obs = ladder.observe("pair", a.target)?;
    out.extend_from_slice(obs.to_csv().as_bytes());
    report_fit(err, &obs);
    Ok(())
}

fn register(ladder: &mut Ladder<f64>, label: &str, spec: &ObservableFile) -> CliResult<()> {
    match spec.clone() {
        ObservableFile::L2Error { function: f, singular } => {
            let f = function(&f, &singular)?;
            ladder.register(label, move |s: &Stage<f64>| l2_distance(&f, &tilde(&s.space(), &f)?));
        }
        ObservableFile::ValueAt { function: f, x, .. } => {
            let f = function(&f, &[])?;
            ladder.register(label, move |s: &Stage<f64>| Ok(tilde(&s.space(), &f)?.eval(x)));
        }
        ObservableFile::Integral { function: f, singular, .. } => {
            let f = function(&f, &singular)?;
            ladder.register(label, move |s: &Stage<f64>| {
                let beta = s.grid.beta();
                calculus::integrate(&tilde(&s.space(), &f)?, -beta, beta)
            });
        }
        ObservableFile::Pair { k, function: f, test, support, .. } => {
            let spec = DistributionSpec::new(k, function(&f, &[])?, label);
            let g = function(&test, &[])?;
            let phi = match support {
                Some((lo, hi)) => TestFunction::with_support(g, lo, hi),
                None => TestFunction::new(g),
            };
            ladder.register(label, move |s: &Stage<f64>| {
                let space = s.space();
                pair(&space, &embed(&space, &spec)?, &phi)
            });
        }
    }
    Ok(())
}

fn report_fit(err: &mut dyn Write, obs: &ultracalc_core::refinement::Observation<f64>) {
    let fitted = obs.fitted_order.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into());
    let _ = writeln!(err, "fitted_order={fitted}");
    for flag in &obs.flags {
        let _ = writeln!(err, "flag={}", serde_json::to_string(flag).unwrap_or_default().trim_matches('"'));
    }
}

fn function(src: &str, singular: &[f64]) -> CliResult<FunctionHandle<f64>> {
    let e = expr::parse(src).map_err(|e| CliError::Usage(format!("expression {src:?}: {e}")))?;
    Ok(e.into_handle(singular.to_vec()))
}

fn grid_from(a: &GridArgs) -> CliResult<Grid> {
    match (a.ell, a.h_max) {
        (Some(ell), None) => Ok(Grid::build_uniform(a.beta, ell)?),
        (None, Some(h)) => Ok(Grid::build_tagged(a.beta, &a.tags, h)?),
        (None, None) => Err(CliError::Usage("give --ell, or --h-max with optional --tags".into())),
        (Some(_), Some(_)) => Err(CliError::Usage("--ell and --h-max are exclusive".into())),
    }
}

/// Space used when `--space` is absent.
pub fn default_space() -> Space {
    Space::build(Grid::build_uniform(1.0, 16).expect("valid"), 2)
}

fn load_space(opt: &SpaceOpt) -> CliResult<Space> {
    match &opt.space {
        None => Ok(default_space()),
        Some(path) => Ok(Space::from_file(read_json::<SpaceFile<f64>>(path)?)?),
    }
}

fn load_ultrafunction(space: &Space, path: &Path) -> CliResult<Ultrafunction> {
    let file: UltrafunctionFile<f64> = read_json(path)?;
    Ok(Ultrafunction::from_file(space, &file)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit_json<T: Serialize>(out: &mut Vec<u8>, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(())
}

fn emit_line(out: &mut Vec<u8>, line: &str) -> CliResult<()> {
    out.extend_from_slice(line.as_bytes());
    out.push(b'\n');
    Ok(())
}
