//! Argument parsing and command dispatch.

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use bumplab_core::bumps::ArgMode;
use bumplab_core::math::conjugate_exponent;
use bumplab_core::search::{generate_instance, GenConfig, GenKind, Instance, Objective, SearchResult};
use bumplab_core::selfimprove::BumpCase;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::commands;
use crate::error::CliError;
use crate::instance::{self, EpsilonDescriptor, EpsilonKind, InstanceFile, YoungDescriptor};
use crate::report::{self, ReportRow};

#[derive(Debug, Parser)]
#[command(name = "bumplab", version, about = "Two-weight bump constants, sparse norms and corona diagnostics on dyadic grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// A_p, separated and entangled bump constants.
    Constants(ReportArgs),
    /// Sawyer testing constant of the sparse operator.
    Testing(ReportArgs),
    /// Lower-bound estimate of the sparse operator norm.
    Norm(ReportArgs),
    /// Stopping-time decomposition diagnostics.
    CoronaReport(ReportArgs),
    /// Constants, testing, norm, corona diagnostics and both objectives.
    VerifyTheorem(VerifyArgs),
    /// Compares entangled bumps built from weaker bumps with separated ones.
    PropEta(PropArgs),
    /// Simulated annealing for large norm-to-constant ratios.
    Search(SearchArgs),
    /// Writes a random instance file.
    Gen(GenArgs),
}

/// Values that replace those of the instance file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub p: Option<f64>,
    /// Bump paired with sigma, e.g. `log-bump:eta=1`.
    #[arg(long = "A", value_name = "FAMILY:eta=R")]
    pub a: Option<String>,
    /// Bump paired with w.
    #[arg(long = "B", value_name = "FAMILY:eta=R")]
    pub b: Option<String>,
    /// Shape of both epsilon functions, e.g. `power:a=0.25`.
    #[arg(long, value_name = "FAMILY:PARAM=R")]
    pub eps: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Append CSV rows to an existing report instead of replacing it.
    #[arg(long)]
    pub append: bool,
    /// No progress lines on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Instance files; repeat for a batch.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Report path (stdout if absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, value_parser = parse_mode, default_value = "one-plus-rho")]
    pub arg_mode: ArgMode,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub report: ReportArgs,
    /// Annealing steps on the theorem ratio before reporting.
    #[arg(long, default_value_t = 0)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PropArgs {
    #[command(flatten)]
    pub report: ReportArgs,
    /// Second parameter of the recipe (defaults to eta).
    #[arg(long)]
    pub eta_prime: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenShape {
    #[arg(long, value_parser = parse_kind, default_value = "lognormal")]
    pub kind: GenKind,
    #[arg(long = "d", default_value_t = 1)]
    pub dim: u32,
    #[arg(long = "L", default_value_t = 4)]
    pub depth: u32,
    /// Spread of the weight family; 0 gives constant weights.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Parameter of the default log bumps and power epsilons.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Random cubes tried on top of the branch family.
    #[arg(long, default_value_t = 16)]
    pub extra_cubes: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub shape: GenShape,
    /// Instance path (stdout if absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Start instances; generated from the shape flags when absent.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    #[command(flatten)]
    pub shape: GenShape,
    /// Independent runs per start (seeds `seed`, `seed + 1`, ...).
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, value_parser = parse_objective, default_value = "theorem-ratio")]
    pub objective: Objective,
    /// Move to the best neighbor at every step.
    #[arg(long)]
    pub greedy: bool,
    #[arg(long, value_parser = parse_mode, default_value = "one-plus-rho")]
    pub arg_mode: ArgMode,
    /// Best instance over all runs.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report path (stdout if absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-step trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn parse_mode(s: &str) -> Result<ArgMode, String> {
    ArgMode::from_name(s).ok_or_else(|| format!("expected one-plus-rho or rho, got `{s}`"))
}

fn parse_kind(s: &str) -> Result<GenKind, String> {
    GenKind::from_name(s).ok_or_else(|| format!("expected lognormal, power-spike or lacunary, got `{s}`"))
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    Objective::from_name(s).ok_or_else(|| format!("expected theorem-ratio or conjecture-ratio, got `{s}`"))
}

/// Splits `family:key=value,key=value`.
fn parse_descriptor(flag: &str, s: &str) -> Result<(String, Vec<(String, f64)>), CliError> {
    let bad = |m: String| CliError::Input(format!("--{flag} {s}: {m}"));
    let (family, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut params = Vec::new();
    for kv in rest.split(',').filter(|x| !x.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{kv}`")))?;
        let v: f64 = v.parse().map_err(|_| bad(format!("`{v}` is not a number")))?;
        params.push((k.to_string(), v));
    }
    Ok((family.to_string(), params))
}

fn young_override(flag: &str, s: &str, p: f64) -> Result<YoungDescriptor, CliError> {
    let (family, params) = parse_descriptor(flag, s)?;
    let mut eta = 0.0;
    for (k, v) in params {
        match k.as_str() {
            "eta" => eta = v,
            _ => return Err(CliError::Input(format!("--{flag} {s}: unknown parameter `{k}`"))),
        }
    }
    Ok(YoungDescriptor { family, p, eta, table: None })
}

fn eps_override(s: &str) -> Result<EpsilonDescriptor, CliError> {
    let (family, params) = parse_descriptor("eps", s)?;
    let (family, key) = match family.as_str() {
        "power" => (EpsilonKind::Power, "a"),
        "log-power" => (EpsilonKind::LogPower, "b"),
        "triple-log" => (EpsilonKind::TripleLog, "eta"),
        _ => return Err(CliError::Input(format!("--eps {s}: unknown family `{family}`"))),
    };
    match params.as_slice() {
        [(k, v)] if k == key || k == "parameter" => Ok(EpsilonDescriptor { family, parameter: *v }),
        _ => Err(CliError::Input(format!("--eps {s}: expected exactly one parameter `{key}`"))),
    }
}

impl Overrides {
    pub fn apply(&self, file: &mut InstanceFile) -> Result<(), CliError> {
        if let Some(p) = self.p {
            if !(p > 1.0 && p.is_finite()) {
                return Err(CliError::Input(format!("--p {p}: must be a finite real > 1")));
            }
            file.p = p;
            file.young.a = file.young.a.with_exponent(p);
            file.young.b = file.young.b.with_exponent(conjugate_exponent(p));
        }
        if let Some(s) = &self.a {
            file.young.a = young_override("A", s, file.p)?;
        }
        if let Some(s) = &self.b {
            file.young.b = young_override("B", s, conjugate_exponent(file.p))?;
        }
        if let Some(s) = &self.eps {
            let e = eps_override(s)?;
            file.epsilon.p = e;
            file.epsilon.p_prime = e;
        }
        if let Some(seed) = self.seed {
            file.seed = seed;
        }
        Ok(())
    }
}

struct Job {
    id: String,
    file: InstanceFile,
    instance: Instance,
}

fn load(path: &Path, overrides: &Overrides) -> Result<Job, CliError> {
    let origin = path.display().to_string();
    let prefix = |e: CliError| match e {
        CliError::Input(m) if !m.starts_with(&origin) => CliError::Input(format!("{origin}: {m}")),
        other => other,
    };
    let mut file = instance::read_instance(path)?;
    overrides.apply(&mut file).map_err(prefix)?;
    let instance = file.to_instance().map_err(prefix)?;
    Ok(Job { id: origin, file, instance })
}

fn load_all(paths: &[PathBuf], overrides: &Overrides) -> Result<Vec<Job>, CliError> {
    paths.iter().map(|p| load(p, overrides)).collect()
}

/// Thread pool capped by `BUMPLAB_THREADS` (unset or 0: one per core).
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let n = match std::env::var("BUMPLAB_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Input(format!("BUMPLAB_THREADS={v}: not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Input(format!("thread pool: {e}")))
}

fn progress(quiet: bool, what: &str, id: &str, started: Instant) {
    if !quiet {
        eprintln!("bumplab: {what} {id} ({:.3} s)", started.elapsed().as_secs_f64());
    }
}

fn write_text(path: Option<&Path>, text: &str, append: bool) -> Result<(), CliError> {
    let io = |e: std::io::Error, p: &Path| CliError::Input(format!("{}: {e}", p.display()));
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
        Some(p) if append => {
            let mut f = OpenOptions::new().create(true).append(true).open(p).map_err(|e| io(e, p))?;
            f.write_all(text.as_bytes()).map_err(|e| io(e, p))
        }
        Some(p) => fs::write(p, text).map_err(|e| io(e, p)),
    }
}

fn emit(rows: &[ReportRow], path: Option<&Path>, out: &OutputArgs) -> Result<(), CliError> {
    match out.format {
        Format::Json => write_text(path, &report::to_json(rows), false),
        Format::Csv => {
            let existing = out.append && path.is_some_and(|p| fs::metadata(p).is_ok_and(|m| m.len() > 0));
            write_text(path, &report::to_csv(rows, !existing), out.append)
        }
    }
}

/// Rows in input order, computed concurrently; the flag reports a norm
/// estimate that stopped before convergence.
fn batch<F>(jobs: &[Job], name: &str, quiet: bool, f: F) -> Result<(Vec<ReportRow>, bool), CliError>
where
    F: Fn(&mut ReportRow, &Job) -> Result<bool, CliError> + Sync,
{
    let results: Vec<Result<(ReportRow, bool), CliError>> = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|job| {
                let started = Instant::now();
                let mut row = ReportRow::new(&job.id, name);
                commands::header(&mut row, &job.instance);
                let ok = f(&mut row, job)?;
                progress(quiet, name, &job.id, started);
                Ok((row, ok))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut converged = true;
    for r in results {
        let (row, ok) = r?;
        converged &= ok;
        rows.push(row);
    }
    Ok((rows, converged))
}

fn finish(rows: &[ReportRow], converged: bool, path: Option<&Path>, out: &OutputArgs) -> Result<i32, CliError> {
    emit(rows, path, out)?;
    if converged {
        Ok(0)
    } else {
        eprintln!("bumplab: {}", CliError::NonConvergence("norm estimate stopped at the iteration cap".into()));
        Ok(3)
    }
}

fn report_command<F>(args: &ReportArgs, name: &str, f: F) -> Result<i32, CliError>
where
    F: Fn(&mut ReportRow, &Job) -> Result<bool, CliError> + Sync,
{
    let jobs = load_all(&args.input, &args.overrides)?;
    let (rows, converged) = batch(&jobs, name, args.out.quiet, f)?;
    finish(&rows, converged, args.output.as_deref(), &args.out)
}

fn bump_case(desc: &YoungDescriptor) -> Result<(BumpCase, f64), CliError> {
    match desc.family.as_str() {
        "log-bump" => Ok((BumpCase::Log, desc.eta)),
        "loglog-bump" => Ok((BumpCase::LogLog, desc.eta)),
        other => Err(CliError::Input(format!("prop-eta needs a log-bump or loglog-bump A, got `{other}`"))),
    }
}

fn verify_command(args: &VerifyArgs) -> Result<i32, CliError> {
    let r = &args.report;
    let mode = r.arg_mode;
    let steps = args.steps;
    report_command(r, "verify-theorem", |row, job| {
        if steps == 0 {
            return commands::verify(row, &job.instance, mode);
        }
        let result = commands::anneal(&job.instance, Objective::TheoremRatio, steps, false, mode)?;
        commands::search_fields(row, Objective::TheoremRatio, steps, &result);
        commands::verify(row, result.best.instance(), mode)
    })
}

fn prop_command(args: &PropArgs) -> Result<i32, CliError> {
    let r = &args.report;
    let jobs = load_all(&r.input, &r.overrides)?;
    let (rows, converged) = batch(&jobs, "prop-eta", r.out.quiet, |row, job| {
        let (case, eta) = bump_case(&job.file.young.a)?;
        commands::prop_eta(row, &job.instance, case, eta, args.eta_prime.unwrap_or(eta), r.arg_mode)?;
        Ok(true)
    })?;
    finish(&rows, converged, r.output.as_deref(), &r.out)
}

fn generated(shape: &GenShape, p: f64, seed: u64, overrides: &Overrides) -> Result<InstanceFile, CliError> {
    let config = GenConfig { scale: shape.scale, eta: shape.eta, extra_cubes: shape.extra_cubes };
    let inst = generate_instance(shape.kind, shape.dim, shape.depth, p, seed, &config)?;
    let mut file = InstanceFile::from_instance(&inst);
    let rest = Overrides { p: None, seed: None, ..overrides.clone() };
    rest.apply(&mut file)?;
    file.to_instance()?;
    Ok(file)
}

fn gen_command(args: &GenArgs) -> Result<i32, CliError> {
    let started = Instant::now();
    let p = args.overrides.p.unwrap_or(2.0);
    let seed = args.overrides.seed.unwrap_or(0);
    let file = generated(&args.shape, p, seed, &args.overrides)?;
    write_text(args.output.as_deref(), &instance::to_json(&file), false)?;
    let id = args.output.as_ref().map_or("-".to_string(), |p| p.display().to_string());
    progress(args.quiet, "gen", &id, started);
    Ok(0)
}

struct Best {
    value: f64,
    run: usize,
    file: InstanceFile,
}

fn search_command(args: &SearchArgs) -> Result<i32, CliError> {
    let restarts = args.restarts.max(1);
    let mut starts: Vec<(String, Instance)> = Vec::new();
    if args.input.is_empty() {
        let p = args.overrides.p.unwrap_or(2.0);
        let seed = args.overrides.seed.unwrap_or(0);
        for r in 0..restarts {
            let s = seed.wrapping_add(r as u64);
            let file = generated(&args.shape, p, s, &args.overrides)?;
            starts.push((format!("{}#{s}", args.shape.kind.name()), file.to_instance()?));
        }
    } else {
        for job in load_all(&args.input, &args.overrides)? {
            for r in 0..restarts {
                let mut inst = job.instance.clone();
                inst.seed = inst.seed.wrapping_add(r as u64);
                starts.push((format!("{}#{}", job.id, inst.seed), inst));
            }
        }
    }

    let best: Mutex<Option<Best>> = Mutex::new(None);
    let results: Vec<Result<(ReportRow, SearchResult), CliError>> = thread_pool()?.install(|| {
        starts
            .par_iter()
            .enumerate()
            .map(|(run, (id, inst))| {
                let started = Instant::now();
                let result = commands::anneal(inst, args.objective, args.steps, args.greedy, args.arg_mode)?;
                let mut row = ReportRow::new(id, "search");
                commands::header(&mut row, inst);
                row.text("arg_mode", args.arg_mode.name());
                commands::search_fields(&mut row, args.objective, args.steps, &result);
                let ev = result.best.evaluation();
                if let Some(t) = ev.theorem_ratio {
                    row.real("theorem_ratio", t);
                }
                if let Some(c) = ev.conjecture_ratio {
                    row.real("conjecture_ratio", c);
                }
                row.real("eps_floor", ev.eps_floor);
                if !ev.floor_relation_holds() {
                    row.flag("floor-relation-violated");
                }
                {
                    let mut guard = best.lock().unwrap_or_else(|e| e.into_inner());
                    let better =
                        guard.as_ref().is_none_or(|b| result.best_value > b.value || (result.best_value == b.value && run < b.run));
                    if better {
                        *guard = Some(Best { value: result.best_value, run, file: InstanceFile::from_instance(result.best.instance()) });
                    }
                }
                progress(args.out.quiet, "search", id, started);
                Ok((row, result))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut trace = String::from("run,step,current,best,accepted,temperature\n");
    for (run, r) in results.into_iter().enumerate() {
        let (row, result) = r?;
        for t in &result.trace {
            trace.push_str(&format!(
                "{run},{},{},{},{},{}\n",
                t.step,
                report::format_real(t.current),
                report::format_real(t.best),
                t.accepted,
                report::format_real(t.temperature)
            ));
        }
        rows.push(row);
    }
    if let Some(path) = &args.trace {
        write_text(Some(path), &trace, false)?;
    }
    if let (Some(path), Some(b)) = (&args.output, best.into_inner().unwrap_or_else(|e| e.into_inner())) {
        write_text(Some(path), &instance::to_json(&b.file), false)?;
    }
    emit(&rows, args.report.as_deref(), &args.out)?;
    Ok(0)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Constants(a) => report_command(a, "constants", |row, job| {
            commands::constants(row, &job.instance)?;
            Ok(true)
        }),
        Command::Testing(a) => report_command(a, "testing", |row, job| {
            commands::testing(row, &job.instance)?;
            Ok(true)
        }),
        Command::Norm(a) => report_command(a, "norm", |row, job| Ok(commands::norm(row, &job.instance)?.1)),
        Command::CoronaReport(a) => {
            let mode = a.arg_mode;
            report_command(a, "corona-report", move |row, job| {
                commands::corona(row, &job.instance, mode)?;
                Ok(true)
            })
        }
        Command::VerifyTheorem(a) => verify_command(a),
        Command::PropEta(a) => prop_command(a),
        Command::Search(a) => search_command(a),
        Command::Gen(a) => gen_command(a),
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bumplab: {e}");
            e.exit_code()
        }
    }
}
