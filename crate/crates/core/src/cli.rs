//! Config file format and the command-line commands.
//!
//! A config file is one JSON document:
//!
//! ```json
//! {
//!   "space": [{"name": "epochs", "lower": 1, "upper": 100},
//!             {"name": "units", "lower": 16, "upper": 256}],
//!   "objective": {"kind": "surrogate_unimodal"},
//!   "ba": {"n": 10, "m": 7, "e": 3, "nep": 4, "nsp": 1, "ngh": 1, "seed": 42},
//!   "stopping": {"max_iterations": 100, "target_fitness": 0.9963},
//!   "experiment": {"baselines": ["random_search"], "repeats": 20}
//! }
//! ```
//!
//! Exit codes: 0 success, 1 configuration error, 2 objective failure, 3 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::engine::{self, BAConfig, Candidate, RunOptions, StoppingCriteria};
use crate::harness::{self, BudgetMode, ExperimentConfig, HarnessError, Method, StatsSummary};
use crate::objective::protocol::{serve, ServeFault};
use crate::objective::{BuildError, Objective, ObjectiveSpec, Surrogate, UnimodalSettings};
use crate::space::{ParamSpace, ParamVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_OBJECTIVE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const TRACE_JSON: &str = "trace.json";
pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const TRIALS_CSV: &str = "trials.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// The `ba` section: algorithm parameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaSection {
    pub n: usize,
    pub m: usize,
    pub e: usize,
    pub nep: usize,
    pub nsp: usize,
    pub ngh: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_baselines() -> Vec<Method> {
    vec![Method::RandomSearch]
}

fn default_repeats() -> usize {
    10
}

/// The `experiment` section, used by `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_baselines")]
    pub baselines: Vec<Method>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub budget_mode: BudgetMode,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            baselines: default_baselines(),
            repeats: default_repeats(),
            budget_mode: BudgetMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub space: ParamSpace,
    pub objective: ObjectiveSpec,
    pub ba: BaSection,
    #[serde(default)]
    pub stopping: StoppingCriteria,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Objective(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Objective(_) => EXIT_OBJECTIVE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Spawn(_) => CliError::Objective(format!("objective: {e}")),
            _ => CliError::Config(format!("objective: {e}")),
        }
    }
}

impl ConfigFile {
    /// Parses a config document; errors name the offending field and position.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Config(format!("config: {inner}"))
            } else {
                CliError::Config(format!("config field `{path}`: {inner}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn ba_config(&self) -> BAConfig {
        let b = &self.ba;
        BAConfig {
            n: b.n,
            m: b.m,
            e: b.e,
            nep: b.nep,
            nsp: b.nsp,
            ngh: b.ngh,
            stopping: self.stopping.clone(),
            seed: b.seed,
        }
    }

    /// Hard validation of every section; returns guideline warnings.
    pub fn validate(&self) -> Result<Vec<engine::ConfigWarning>, CliError> {
        let warnings = engine::validate(&self.ba_config()).map_err(|e| CliError::Config(format!("ba: {e}")))?;
        self.objective.validate_for(&self.space)?;
        if let Some(exp) = &self.experiment {
            if exp.repeats < 1 {
                return Err(CliError::Config("experiment.repeats must be at least 1".into()));
            }
        }
        Ok(warnings)
    }

    /// This config with every default written out.
    pub fn effective(&self) -> ConfigFile {
        let mut c = self.clone();
        c.objective = self.objective.resolved();
        c
    }
}

#[derive(Debug, Parser)]
#[command(name = "optba", version, about = "Bees Algorithm hyperparameter search over integer grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimisation and write trace.json and convergence.csv.
    Run(Manifest),
    /// Compare against baselines and write trials.csv and summary.json.
    Bench(Manifest),
    /// Check a config file and print guideline warnings.
    Validate(Manifest),
    /// Act as an evaluator child serving the unimodal surrogate over stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Manifest {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces `ba.seed` (the master seed for `bench`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allow replacing existing output files.
    #[arg(long)]
    pub overwrite: bool,
    #[arg(long, env = "OPTBA_WORKERS", default_value_t = 1)]
    pub workers: usize,
    /// Record population snapshots in the trace.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [49i64, 108])]
    pub optimum: Vec<i64>,
    #[arg(long, default_value_t = 0.9963)]
    pub peak: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [2e-5f64, 1e-6])]
    pub coeffs: Vec<f64>,
    /// Misbehave on purpose: nan, malformed, wrong-id, shuffle, hang, exit-after=N,
    /// bad-handshake.
    #[arg(long, hide = true)]
    pub fault: Option<String>,
}

fn parse_fault(s: &str) -> Result<ServeFault, CliError> {
    Ok(match s {
        "none" => ServeFault::None,
        "nan" => ServeFault::NanFitness,
        "malformed" => ServeFault::Malformed,
        "wrong-id" => ServeFault::WrongId,
        "shuffle" => ServeFault::Shuffle,
        "hang" => ServeFault::Hang,
        "bad-handshake" => ServeFault::BadHandshake,
        other => match other.strip_prefix("exit-after=").and_then(|n| n.parse().ok()) {
            Some(n) => ServeFault::ExitAfter(n),
            None => return Err(CliError::Config(format!("unknown fault `{other}`"))),
        },
    })
}

/// Output paths, refusing to clobber existing files unless asked.
fn prepare_outputs(manifest: &Manifest, names: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    let dir = manifest
        .out
        .as_ref()
        .ok_or_else(|| CliError::Config("--out <dir> is required".into()))?;
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if !manifest.overwrite {
        if let Some(existing) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::Io(format!(
                "{} already exists; pass --overwrite to replace it",
                existing.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(paths)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn load(manifest: &Manifest) -> Result<(ConfigFile, Vec<engine::ConfigWarning>), CliError> {
    let mut config = ConfigFile::load(&manifest.config)?;
    if let Some(seed) = manifest.seed {
        config.ba.seed = seed;
    }
    let warnings = config.validate()?;
    Ok((config, warnings))
}

/// `best: {name:value,...} fitness=<number>`
pub fn best_line(space: &ParamSpace, best: &Candidate) -> String {
    format!("best: {} fitness={}", space.format_params(&best.params), best.fitness)
}

pub fn cmd_run(manifest: &Manifest, out: &mut dyn Write) -> Result<(), CliError> {
    let (config, warnings) = load(manifest)?;
    let paths = prepare_outputs(manifest, &[TRACE_JSON, CONVERGENCE_CSV])?;
    for w in &warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let objective = config.objective.build(&config.space)?;
    let options = RunOptions {
        workers: manifest.workers,
        snapshots: manifest.verbose > 0,
        objective_spec: Some(config.objective.resolved()),
    };
    match engine::run_with(&config.space, &config.ba_config(), objective.as_ref(), &options) {
        Ok(trace) => {
            write_file(&paths[0], &trace.to_json())?;
            write_file(&paths[1], &trace.to_csv())?;
            let _ = writeln!(out, "stop: {:?} after {} evaluations", trace.stop_reason, trace.total_evaluations);
            let _ = writeln!(out, "{}", best_line(&config.space, &trace.best));
            Ok(())
        }
        Err(failure) => {
            if let Some(partial) = &failure.partial {
                write_file(&paths[0], &partial.to_json())?;
                write_file(&paths[1], &partial.to_csv())?;
            }
            Err(CliError::Objective(failure.error.to_string()))
        }
    }
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    config: ConfigFile,
    oracle: Option<&'a Candidate>,
    summary: &'a StatsSummary,
}

pub fn cmd_bench(manifest: &Manifest, out: &mut dyn Write) -> Result<(), CliError> {
    let (mut config, warnings) = load(manifest)?;
    let experiment = config.experiment.get_or_insert_with(ExperimentSection::default).clone();
    let paths = prepare_outputs(manifest, &[TRIALS_CSV, SUMMARY_JSON])?;
    for w in &warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let exp = ExperimentConfig {
        space: config.space.clone(),
        objective: config.objective.clone(),
        ba: config.ba_config(),
        baselines: experiment.baselines.clone(),
        repeats: experiment.repeats,
        budget_mode: experiment.budget_mode,
        workers: manifest.workers,
    };
    let comparison = harness::compare(&exp).map_err(|e| match e {
        HarnessError::InvalidConfig(_) => CliError::Config(e.to_string()),
        HarnessError::Build(b) => CliError::from(b),
        HarnessError::Engine(engine::EngineError::InvalidConfig(_)) => CliError::Config(e.to_string()),
        _ => CliError::Objective(e.to_string()),
    })?;
    write_file(&paths[0], &comparison.trials_csv(&config.space))?;
    let doc = SummaryDocument {
        config: config.effective(),
        oracle: comparison.oracle.as_ref(),
        summary: &comparison.summary,
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("summary serialises");
    json.push('\n');
    write_file(&paths[1], &json)?;
    if let Some(o) = &comparison.oracle {
        let _ = writeln!(out, "oracle: {} fitness={}", config.space.format_params(&o.params), o.fitness);
    }
    let _ = write!(out, "{}", comparison.summary.table());
    Ok(())
}

pub fn cmd_validate(manifest: &Manifest, out: &mut dyn Write) -> Result<(), CliError> {
    let (config, warnings) = load(manifest)?;
    for w in &warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(
        out,
        "ok: {} domains, {} grid points, {} evaluations per iteration",
        config.space.dims(),
        config.space.cardinality(),
        config.ba_config().evaluations_per_iteration()
    );
    Ok(())
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let fault = args.fault.as_deref().map(parse_fault).transpose()?.unwrap_or_default();
    let surface = Surrogate::from_settings(UnimodalSettings {
        optimum: args.optimum.clone(),
        peak: args.peak,
        coeffs: args.coeffs.clone(),
    })?;
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    serve(
        stdin,
        stdout,
        |req| {
            let v = ParamVector::new(req.params.iter().map(|(_, x)| *x).collect());
            surface.evaluate(&v, req.id).map_err(|e| e.to_string())
        },
        fault,
    )
    .map_err(|e| CliError::Io(e.to_string()))
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(m) => cmd_run(m, out),
        Command::Bench(m) => cmd_bench(m, out),
        Command::Validate(m) => cmd_validate(m, out),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
