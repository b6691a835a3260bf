//! Command-line driver for the splitting estimator.
//!
//! Five subcommands cover the whole workflow:
//!
//! * `run`: one splitting run, result as JSON.
//! * `replicate`: M independent runs in parallel, summary as CSV or JSON,
//!   optional per-run CSV.
//! * `oracle`: dump a quadrature-grid or spectral solution of the moment
//!   equations, for plotting or cross-checking.
//! * `verify`: the acceptance criteria catalog, one report line per check.
//! * `compare`: splitting cost against direct Monte Carlo over a grid of
//!   target probabilities, with the crossover point.
//!
//! Experiments are described by a JSON config file; every flag overrides
//! the corresponding file field. All artifacts embed a provenance block
//! (seed, digest of the resolved config, build version), CSV floats carry
//! 17 significant digits, and lines end in LF, so outputs are stable and
//! diffable. `AMS_THREADS` caps worker parallelism.
//!
//! Exit codes: 0 success (and all checks passed), 1 verification failure,
//! 2 configuration error, 3 iteration budget exhausted.

use std::env;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use ams_core::oracle::{
    ams_cost, cost_dimensionless_exact, cost_dimensionless_limit, direct_cost,
    solve_functional_equation, solve_refined, spectral_t, spectral_v, CostModel, FunctionalKind,
    GridSolution, SpectralSolution,
};
use ams_core::stats::{run_replications, ReplicationPlan, ReplicationSummary, TestReport};
use ams_core::{run_ams, verify, AmsConfig, AmsError, ModelKind64, ModelSpec};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let runaway = err
                .downcast_ref::<AmsError>()
                .is_some_and(|e| matches!(e, AmsError::MaxIterationsExceeded { .. }));
            ExitCode::from(if runaway { 3 } else { 2 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    init_threads()?;
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Replicate(args) => cmd_replicate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

/// `AMS_THREADS` caps the rayon pool; unset means hardware concurrency.
fn init_threads() -> Result<()> {
    if let Ok(raw) = env::var("AMS_THREADS") {
        let threads: usize = raw
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .with_context(|| format!("AMS_THREADS = {raw:?} is not a positive thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool configured twice")?;
    }
    Ok(())
}

// --- argument surface --------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "ams",
    version,
    about = "Adaptive multilevel splitting: runs, oracles, verification, cost tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One splitting run, result as JSON.
    Run(RunArgs),
    /// Many independent runs with a statistical summary.
    Replicate(ReplicateArgs),
    /// Dump a moment-equation solution (quadrature grid or spectral form).
    Oracle(OracleArgs),
    /// Run acceptance criteria and report pass/fail per check.
    Verify(VerifyArgs),
    /// Splitting cost vs direct Monte Carlo over a probability grid.
    Compare(CompareArgs),
}

/// Problem selection shared by `run` and `replicate`. Every flag overrides
/// the matching config-file field.
#[derive(Args, Clone, Debug)]
struct ProblemArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Model key: exponential, pareto, weibull, or committor.
    #[arg(long)]
    model: Option<String>,
    /// Model parameters, comma separated (pareto exponent, weibull shape,
    /// committor xi0).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    params: Option<Vec<f64>>,
    /// Particle count.
    #[arg(short, long)]
    n: Option<u32>,
    /// Particles killed per iteration.
    #[arg(short, long)]
    k: Option<u32>,
    /// Start level (particles begin above it).
    #[arg(short, long)]
    x: Option<f64>,
    /// Target level.
    #[arg(short, long)]
    a: Option<f64>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration budget per run (default: sized from the hazard gap).
    #[arg(long)]
    max_iterations: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Write the JSON here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplicateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Number of replications (at least 2).
    #[arg(short, long)]
    m_reps: Option<u64>,
    /// csv (plot-ready, default) or json.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Write the summary here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write one CSV row per run to this file (they are large).
    #[arg(long, value_name = "FILE")]
    runs_out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// JSON experiment config supplying n, k, a; flags override.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// grid (quadrature, default) or spectral (closed form).
    #[arg(long, value_enum, default_value_t = SolverArg::Grid)]
    solver: SolverArg,
    /// Which functional of the run to solve for.
    #[arg(long, value_enum, default_value_t = MomentArg::SecondMoment)]
    moment: MomentArg,
    #[arg(short, long)]
    n: Option<u32>,
    #[arg(short, long)]
    k: Option<u32>,
    /// Target level in hazard units (the exponential coordinate).
    #[arg(short, long)]
    a: Option<f64>,
    /// Fixed interval count (even); default is adaptive refinement.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Refinement tolerance on the Richardson estimate.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Refinement cap on the interval count.
    #[arg(long, default_value_t = 1 << 15)]
    max_grid: usize,
    /// Sample count for spectral CSV output.
    #[arg(long, default_value_t = 129)]
    points: usize,
    /// csv (default) or json.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only run criteria whose name contains this substring.
    #[arg(long, value_name = "SUBSTR")]
    only: Option<String>,
    /// List criterion names and exit.
    #[arg(long)]
    list: bool,
    /// Also emit the reports as csv or json.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// JSON experiment config supplying n, k and the cost block.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(short, long)]
    n: Option<u32>,
    #[arg(short, long)]
    k: Option<u32>,
    /// Cost per sample.
    #[arg(long)]
    c0: Option<f64>,
    /// Cost per sample and per log n (sorting / bookkeeping).
    #[arg(long)]
    c1: Option<f64>,
    /// Relative precision both estimators must reach.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Explicit probability grid, comma separated, descending.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Default grid p = e^-1 .. e^-M when --p is absent.
    #[arg(long, default_value_t = 12, value_name = "M")]
    max_exponent: u32,
    /// csv (plot-ready, default) or json.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SolverArg {
    Grid,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MomentArg {
    /// P(run from x reaches a); known exactly, a discretization readout.
    #[value(name = "hitting-probability")]
    HittingProbability,
    /// Second moment of the estimator; variance oracle.
    #[value(name = "second-moment")]
    SecondMoment,
    /// Expected level count; iteration oracle.
    #[value(name = "mean-iterations")]
    MeanIterations,
}

impl MomentArg {
    fn functional(self) -> FunctionalKind {
        match self {
            MomentArg::HittingProbability => FunctionalKind::HittingProbability,
            MomentArg::SecondMoment => FunctionalKind::SecondMoment,
            MomentArg::MeanIterations => FunctionalKind::MeanIterations,
        }
    }

    fn label(self) -> &'static str {
        match self {
            MomentArg::HittingProbability => "hitting-probability",
            MomentArg::SecondMoment => "second-moment",
            MomentArg::MeanIterations => "mean-iterations",
        }
    }
}

// --- config file and resolution ----------------------------------------------

/// On-disk experiment description. Every field is optional so partial
/// files compose with flags; unknown top-level keys are rejected.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    model: Option<ModelSpec>,
    n: Option<u32>,
    k: Option<u32>,
    x: Option<f64>,
    a: Option<f64>,
    m_reps: Option<u64>,
    seed: Option<u64>,
    max_iterations: Option<u64>,
    output: Option<OutputSpec>,
    cost: Option<CostModel>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputSpec {
    format: Option<OutputFormat>,
    path: Option<PathBuf>,
}

fn read_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Fully resolved problem: file fields, flag overrides, defaults. This is
/// the struct the provenance digest is computed over.
#[derive(Clone, Debug, Serialize)]
struct Resolved {
    model: ModelSpec,
    n: u32,
    k: u32,
    x: f64,
    a: f64,
    m_reps: u64,
    seed: u64,
    max_iterations: Option<u64>,
}

impl ProblemArgs {
    fn resolve(&self) -> Result<(Resolved, ConfigFile)> {
        let file = read_config(self.config.as_deref())?;
        let model = match (&self.model, &file.model) {
            (Some(key), _) => ModelSpec::new(key, self.params.as_deref().unwrap_or(&[])),
            (None, Some(spec)) => match &self.params {
                Some(params) => ModelSpec::new(&spec.key, params),
                None => spec.clone(),
            },
            (None, None) => match &self.params {
                Some(_) => bail!("--params given without --model or a config model"),
                None => ModelSpec::exponential(),
            },
        };
        let resolved = Resolved {
            model,
            n: self.n.or(file.n).unwrap_or(100),
            k: self.k.or(file.k).unwrap_or(1),
            x: self.x.or(file.x).unwrap_or(0.0),
            a: self.a.or(file.a).unwrap_or(1.0),
            m_reps: file.m_reps.unwrap_or(10_000),
            seed: self.seed.or(file.seed).unwrap_or(0),
            max_iterations: self.max_iterations.or(file.max_iterations),
        };
        Ok((resolved, file))
    }
}

impl Resolved {
    /// Build the model and a validated run configuration.
    fn prepare(&self) -> Result<(ModelKind64, AmsConfig<f64>)> {
        let model: ModelKind64 = self.model.build()?;
        let config = AmsConfig {
            n: self.n,
            k: self.k,
            x: self.x,
            a: self.a,
            max_iterations: self.max_iterations,
        };
        config.validate(&model)?;
        Ok((model, config))
    }
}

// --- provenance and output ----------------------------------------------------

#[derive(Clone, Debug, Serialize)]
struct Provenance {
    seed: u64,
    config: String,
    build: String,
}

fn provenance(seed: u64, resolved: &impl Serialize) -> Provenance {
    Provenance {
        seed,
        config: config_digest(resolved),
        build: format!("ams {}", env!("CARGO_PKG_VERSION")),
    }
}

/// First 16 hex digits of the SHA-256 of the canonical (declaration-order)
/// JSON serialization.
fn config_digest(value: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    let hash = Sha256::digest(&bytes);
    hash.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// 17 significant decimal digits: round-trips f64 exactly.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV accumulator: `#` provenance comments, then a header, then rows.
/// Lines always end in LF.
struct Csv {
    text: String,
}

impl Csv {
    fn new(prov: &Provenance) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# seed: {}", prov.seed);
        let _ = writeln!(text, "# config: {}", prov.config);
        let _ = writeln!(text, "# build: {}", prov.build);
        Csv { text }
    }

    fn comment(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.text, "# {}", line.as_ref());
    }

    /// Fields are numbers and fixed labels, so no quoting machinery; the
    /// debug assertion catches anything that would need it.
    fn row<S: AsRef<str>>(&mut self, fields: impl IntoIterator<Item = S>) {
        let mut first = true;
        for field in fields {
            let field = field.as_ref();
            debug_assert!(!field.contains([',', '\n']), "CSV field needs quoting");
            if !first {
                self.text.push(',');
            }
            self.text.push_str(field);
            first = false;
        }
        self.text.push('\n');
    }

    fn finish(self) -> String {
        self.text
    }
}

fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => match io::stdout().write_all(content.as_bytes()) {
            // A closed pipe (e.g. piping into head) is not a failure.
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            other => Ok(other?),
        },
    }
}

fn emit_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(path, &text)
}

/// Flag > config file `output` block > per-command default.
fn resolve_output(
    flag_format: Option<OutputFormat>,
    flag_out: Option<PathBuf>,
    file: &ConfigFile,
    default: OutputFormat,
) -> (OutputFormat, Option<PathBuf>) {
    let spec = file.output.clone().unwrap_or_default();
    (
        flag_format.or(spec.format).unwrap_or(default),
        flag_out.or(spec.path),
    )
}

// --- run -----------------------------------------------------------------------

fn cmd_run(args: RunArgs) -> Result<u8> {
    let (resolved, _file) = args.problem.resolve()?;
    let (model, config) = resolved.prepare()?;
    let result = run_ams(&model, &config, resolved.seed)?;
    let doc = json!({
        "J": result.j_count,
        "C": result.corrector,
        "estimate": result.estimate,
        "n_above": result.n_above,
        "samples": result.samples_drawn,
        "levels": result.level_trace,
        "provenance": provenance(resolved.seed, &resolved),
    });
    emit_json(args.out.as_deref(), &doc)?;
    Ok(0)
}

// --- replicate -------------------------------------------------------------------

fn cmd_replicate(args: ReplicateArgs) -> Result<u8> {
    let (mut resolved, file) = args.problem.resolve()?;
    if let Some(m) = args.m_reps {
        resolved.m_reps = m;
    }
    if resolved.m_reps < 2 {
        bail!(
            "m_reps = {} violates m_reps >= 2 (the summary needs a variance)",
            resolved.m_reps
        );
    }
    let (model, config) = resolved.prepare()?;
    let plan = ReplicationPlan {
        m_reps: resolved.m_reps,
        base_seed: resolved.seed,
        keep_runs: args.runs_out.is_some(),
    };
    let started = Instant::now();
    let mut summary = run_replications(&model, &config, &plan)?;
    let wallclock = started.elapsed().as_secs_f64();
    let prov = provenance(resolved.seed, &resolved);

    if let Some(runs_path) = &args.runs_out {
        let mut csv = Csv::new(&prov);
        csv.row(["run", "estimate", "j", "n_above", "samples"]);
        for (i, run) in summary.runs.iter().enumerate() {
            csv.row([
                i.to_string(),
                fmt_float(run.estimate),
                run.j_count.to_string(),
                run.n_above.to_string(),
                run.samples_drawn.to_string(),
            ]);
        }
        emit(Some(runs_path), &csv.finish())?;
        // The summary artifact stays small; per-run data lives in its file.
        summary.runs = Vec::new();
    }

    let (format, out) = resolve_output(args.format, args.out, &file, OutputFormat::Csv);
    match format {
        OutputFormat::Csv => {
            let mut csv = Csv::new(&prov);
            csv.row([
                "n",
                "k",
                "x",
                "a",
                "m_reps",
                "mean_estimate",
                "var_estimate",
                "se_mean",
                "se_variance",
                "mean_j",
                "var_j",
                "se_mean_j",
                "mean_samples",
                "wallclock_s",
            ]);
            csv.row([
                resolved.n.to_string(),
                resolved.k.to_string(),
                fmt_float(resolved.x),
                fmt_float(resolved.a),
                resolved.m_reps.to_string(),
                fmt_float(summary.mean_estimate),
                fmt_float(summary.var_estimate),
                fmt_float(summary.se_mean),
                fmt_float(summary.se_variance),
                fmt_float(summary.mean_j),
                fmt_float(summary.var_j),
                fmt_float(summary.se_mean_j),
                fmt_float(summary.mean_samples),
                fmt_float(wallclock),
            ]);
            emit(out.as_deref(), &csv.finish())?;
        }
        OutputFormat::Json => {
            let doc = json!({
                "config": resolved,
                "summary": summary_json(&summary),
                "wallclock_s": wallclock,
                "provenance": prov,
            });
            emit_json(out.as_deref(), &doc)?;
        }
    }
    Ok(0)
}

fn summary_json(summary: &ReplicationSummary) -> serde_json::Value {
    serde_json::to_value(summary).expect("summary serializes")
}

// --- oracle ----------------------------------------------------------------------

fn cmd_oracle(args: OracleArgs) -> Result<u8> {
    let file = read_config(args.config.as_deref())?;
    let n = u64::from(args.n.or(file.n).unwrap_or(10));
    let k = args.k.or(file.k).unwrap_or(1);
    let a = args.a.or(file.a).unwrap_or(1.0);
    let (format, out) = resolve_output(args.format, args.out, &file, OutputFormat::Csv);

    let params = json!({
        "solver": args.solver,
        "moment": args.moment,
        "n": n, "k": k, "a": a,
        "grid_size": args.grid_size,
        "tol": args.tol,
        "max_grid": args.max_grid,
    });
    let prov = provenance(0, &params);

    match args.solver {
        SolverArg::Grid => {
            let solution = match args.grid_size {
                Some(g) => solve_functional_equation(args.moment.functional(), n, k, a, g)?,
                None => solve_refined(args.moment.functional(), n, k, a, args.tol, args.max_grid)?,
            };
            emit_grid(&solution, args.moment, &prov, format, out.as_deref())
        }
        SolverArg::Spectral => {
            let solution = match args.moment {
                MomentArg::SecondMoment => spectral_v(n, k, a)?,
                MomentArg::MeanIterations => spectral_t(n, k, a)?,
                MomentArg::HittingProbability => bail!(
                    "hitting probability has no spectral form; it is exp(x - a) exactly \
                     (use --solver grid for the discretization readout)"
                ),
            };
            emit_spectral(
                &solution,
                args.moment,
                args.points,
                &prov,
                format,
                out.as_deref(),
            )
        }
    }
}

fn emit_grid(
    solution: &GridSolution<f64>,
    moment: MomentArg,
    prov: &Provenance,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<u8> {
    match format {
        OutputFormat::Csv => {
            let mut csv = Csv::new(prov);
            csv.comment(format!(
                "grid solver: moment {}, n {}, k {}, a {}, intervals {}",
                moment.label(),
                solution.n,
                solution.k,
                solution.a,
                solution.xs.len() - 1
            ));
            csv.row(["x", "value", "error_estimate"]);
            for (&x, &v) in solution.xs.iter().zip(&solution.values) {
                csv.row([
                    fmt_float(x),
                    fmt_float(v),
                    fmt_float(solution.richardson_error),
                ]);
            }
            emit(out, &csv.finish())?;
        }
        OutputFormat::Json => {
            let doc = json!({
                "solver": "grid",
                "moment": moment,
                "n": solution.n,
                "k": solution.k,
                "a": solution.a,
                "intervals": solution.xs.len() - 1,
                "richardson_error": solution.richardson_error,
                "xs": solution.xs,
                "values": solution.values,
                "at_origin": solution.at_origin(),
                "provenance": prov,
            });
            emit_json(out, &doc)?;
        }
    }
    Ok(0)
}

fn emit_spectral(
    solution: &SpectralSolution,
    moment: MomentArg,
    points: usize,
    prov: &Provenance,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<u8> {
    let points = points.max(2);
    let xs: Vec<f64> = (0..points)
        .map(|i| solution.a * i as f64 / (points - 1) as f64)
        .collect();
    match format {
        OutputFormat::Csv => {
            let mut csv = Csv::new(prov);
            csv.comment(format!(
                "spectral solver: moment {}, n {}, k {}, a {}",
                moment.label(),
                solution.n,
                solution.k,
                solution.a
            ));
            csv.row(["x", "value", "error_estimate"]);
            for &x in &xs {
                let z = solution.evaluate_complex(x);
                csv.row([fmt_float(x), fmt_float(z.re), fmt_float(z.im.abs())]);
            }
            emit(out, &csv.finish())?;
        }
        OutputFormat::Json => {
            let complex = |zs: &[Complex64]| -> Vec<serde_json::Value> {
                zs.iter()
                    .map(|z| json!({ "re": z.re, "im": z.im }))
                    .collect()
            };
            let doc = json!({
                "solver": "spectral",
                "moment": moment,
                "n": solution.n,
                "k": solution.k,
                "a": solution.a,
                "exponents": complex(&solution.exponents),
                "weights": complex(&solution.weights),
                "constant": solution.constant,
                "slope": solution.slope,
                "slope_exact": solution.slope_exact.as_ref().map(|r| r.to_string()),
                "at_origin": solution.evaluate(0.0),
                "max_imag_on_grid": solution.max_imag_on(&xs),
                "provenance": prov,
            });
            emit_json(out, &doc)?;
        }
    }
    Ok(0)
}

// --- verify --------------------------------------------------------------------

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    if args.list {
        for (name, _) in verify::CRITERIA {
            println!("{name}");
        }
        return Ok(0);
    }
    let selected: Vec<_> = verify::CRITERIA
        .iter()
        .filter(|(name, _)| {
            args.only
                .as_deref()
                .map(|s| name.contains(s))
                .unwrap_or(true)
        })
        .collect();
    if selected.is_empty() {
        bail!(
            "--only {:?} matches no criterion (try --list)",
            args.only.as_deref().unwrap_or("")
        );
    }

    let mut reports: Vec<TestReport> = Vec::new();
    for (name, criterion) in &selected {
        let batch = criterion();
        for report in &batch {
            println!("{report}");
        }
        let _ = name;
        reports.extend(batch);
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!(
        "{} of {} checks passed across {} criteria",
        reports.len() - failed,
        reports.len(),
        selected.len()
    );

    let params = json!({ "only": args.only });
    let prov = provenance(0, &params);
    match args.format {
        None => {}
        Some(OutputFormat::Csv) => {
            let mut csv = Csv::new(&prov);
            csv.row([
                "name",
                "statistic",
                "threshold",
                "p_value",
                "verdict",
                "context",
            ]);
            for r in &reports {
                csv.row([
                    r.name.clone(),
                    fmt_float(r.statistic),
                    fmt_float(r.threshold),
                    r.p_value.map(fmt_float).unwrap_or_default(),
                    if r.pass { "pass" } else { "fail" }.to_string(),
                    r.context.replace(',', ";"),
                ]);
            }
            emit(args.out.as_deref(), &csv.finish())?;
        }
        Some(OutputFormat::Json) => {
            let doc = json!({
                "reports": reports,
                "passed": failed == 0,
                "provenance": prov,
            });
            emit_json(args.out.as_deref(), &doc)?;
        }
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

// --- compare ----------------------------------------------------------------------

struct CompareRow {
    p: f64,
    dimensionless: f64,
    ams: f64,
    ams_limit: f64,
    direct: f64,
    ratio: f64,
}

fn cmd_compare(args: CompareArgs) -> Result<u8> {
    let file = read_config(args.config.as_deref())?;
    let n = args.n.or(file.n).unwrap_or(100);
    let k = args.k.or(file.k).unwrap_or(1);
    let mut cost = file.cost.unwrap_or_default();
    if let Some(c0) = args.c0 {
        cost.c0 = c0;
    }
    if let Some(c1) = args.c1 {
        cost.c1 = c1;
    }
    if let Some(eps) = args.epsilon {
        cost.epsilon = eps;
    }
    if !(cost.c0 > 0.0 && cost.c1 >= 0.0 && cost.epsilon > 0.0) {
        bail!(
            "cost block violates c0 > 0, c1 >= 0, epsilon > 0: c0 = {}, c1 = {}, epsilon = {}",
            cost.c0,
            cost.c1,
            cost.epsilon
        );
    }
    let grid = match &args.p {
        Some(ps) => {
            if ps.iter().any(|&p| !(0.0 < p && p < 1.0)) {
                bail!("--p values must lie strictly between 0 and 1");
            }
            ps.clone()
        }
        None => (1..=args.max_exponent)
            .map(|m| (-f64::from(m)).exp())
            .collect(),
    };

    let rows = grid
        .iter()
        .map(|&p| {
            let dimensionless = cost_dimensionless_exact(u64::from(n), k, p)?;
            let ams = ams_cost(&cost, u64::from(n), dimensionless);
            let ams_limit = ams_cost(&cost, u64::from(n), cost_dimensionless_limit(p));
            let direct = direct_cost(&cost, p);
            Ok(CompareRow {
                p,
                dimensionless,
                ams,
                ams_limit,
                direct,
                ratio: ams / direct,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let crossover = crossover_index(&rows);
    let monotone = rows.windows(2).all(|w| w[1].ratio < w[0].ratio);
    let crossover_text = match crossover {
        Some(0) => "splitting is cheaper over the whole grid".to_string(),
        Some(i) => format!(
            "splitting overtakes direct sampling between p = {:.6e} and p = {:.6e}",
            rows[i - 1].p,
            rows[i].p
        ),
        None => "direct sampling is cheaper over the whole grid".to_string(),
    };

    let params = json!({ "n": n, "k": k, "cost": cost, "grid": grid });
    let prov = provenance(0, &params);
    let (format, out) = resolve_output(args.format, args.out, &file, OutputFormat::Csv);
    match format {
        OutputFormat::Csv => {
            let mut csv = Csv::new(&prov);
            csv.comment(format!(
                "cost model: c0 {}, c1 {}, epsilon {}",
                cost.c0, cost.c1, cost.epsilon
            ));
            csv.comment(&crossover_text);
            if !monotone {
                csv.comment("warning: cost ratio is not monotone on this grid");
            }
            csv.row([
                "p",
                "n",
                "k",
                "dimensionless",
                "ams_cost",
                "ams_cost_limit",
                "direct_cost",
                "ratio",
            ]);
            for row in &rows {
                csv.row([
                    fmt_float(row.p),
                    n.to_string(),
                    k.to_string(),
                    fmt_float(row.dimensionless),
                    fmt_float(row.ams),
                    fmt_float(row.ams_limit),
                    fmt_float(row.direct),
                    fmt_float(row.ratio),
                ]);
            }
            emit(out.as_deref(), &csv.finish())?;
        }
        OutputFormat::Json => {
            let doc = json!({
                "n": n,
                "k": k,
                "cost": cost,
                "rows": rows.iter().map(|r| json!({
                    "p": r.p,
                    "dimensionless": r.dimensionless,
                    "ams_cost": r.ams,
                    "ams_cost_limit": r.ams_limit,
                    "direct_cost": r.direct,
                    "ratio": r.ratio,
                })).collect::<Vec<_>>(),
                "crossover": crossover_text,
                "ratio_monotone": monotone,
                "provenance": prov,
            });
            emit_json(out.as_deref(), &doc)?;
        }
    }
    Ok(0)
}

/// Index of the first row where splitting is at least as cheap, if any.
fn crossover_index(rows: &[CompareRow]) -> Option<usize> {
    rows.iter().position(|r| r.ratio <= 1.0)
}

// ---------------------------------------------------------------------------
