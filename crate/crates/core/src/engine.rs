//! The Bees Algorithm loop.
//!
//! Each iteration sorts the population by fitness, takes the best `m` bees as sites,
//! sends `nep` recruits to each of the top `e` (elite) sites and `nsp` recruits to the
//! other `m - e`, keeps the fittest bee per site, and replaces the remaining `n - m`
//! bees with fresh uniform scouts.
//!
//! All random draws happen on the calling thread in a fixed order (population, then
//! recruits site by site in rank order, then scouts). Only the fitness evaluations
//! are farmed out to workers, so a seeded run produces the same trace whatever the
//! worker count.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::objective::{Objective, ObjectiveError, ObjectiveSpec};
use crate::rng::{seeded, SearchRng};
use crate::space::{ParamSpace, ParamVector, SpaceError};

fn default_max_iterations() -> u32 {
    100
}

fn default_patience() -> Option<u32> {
    Some(10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingCriteria {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    /// Stop after this many consecutive iterations without a best-so-far gain larger
    /// than `improvement_epsilon`. `None` disables the check.
    #[serde(default = "default_patience")]
    pub patience: Option<u32>,
    #[serde(default, rename = "epsilon", alias = "improvement_epsilon")]
    pub improvement_epsilon: f64,
    /// Stop as soon as the best fitness reaches this value.
    #[serde(default)]
    pub target_fitness: Option<f64>,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        StoppingCriteria {
            max_iterations: default_max_iterations(),
            patience: default_patience(),
            improvement_epsilon: 0.0,
            target_fitness: None,
        }
    }
}

impl StoppingCriteria {
    /// Only the iteration cap.
    pub fn iterations(max_iterations: u32) -> Self {
        StoppingCriteria { max_iterations, patience: None, improvement_epsilon: 0.0, target_fitness: None }
    }
}

/// Control parameters of the algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BAConfig {
    /// Population size.
    pub n: usize,
    /// Number of sites chosen for local search.
    pub m: usize,
    /// Number of elite sites among the `m`.
    pub e: usize,
    /// Recruits per elite site.
    pub nep: usize,
    /// Recruits per non-elite site.
    pub nsp: usize,
    /// Neighbourhood radius in grid steps.
    pub ngh: u32,
    #[serde(default)]
    pub stopping: StoppingCriteria,
    #[serde(default)]
    pub seed: u64,
}

impl BAConfig {
    /// `n = 10, m = 7, e = 3, nep = 4, nsp = 1, ngh = 1`: 19 evaluations per iteration.
    pub fn standard() -> Self {
        BAConfig {
            n: 10,
            m: 7,
            e: 3,
            nep: 4,
            nsp: 1,
            ngh: 1,
            stopping: StoppingCriteria::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stopping(mut self, stopping: StoppingCriteria) -> Self {
        self.stopping = stopping;
        self
    }

    /// `e * nep + (m - e) * nsp + (n - m)`.
    pub fn evaluations_per_iteration(&self) -> usize {
        self.e * self.nep + (self.m - self.e) * self.nsp + (self.n - self.m)
    }
}

/// A soft guideline the configuration does not follow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigWarning(pub String);

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("objective failed at {params} (evaluation {eval_id}): {source}")]
    ObjectiveFailure {
        params: ParamVector,
        eval_id: u64,
        #[source]
        source: ObjectiveError,
    },
}

/// Checks hard invariants and returns guideline warnings.
pub fn validate(config: &BAConfig) -> Result<Vec<ConfigWarning>, EngineError> {
    let invalid = |msg: String| Err(EngineError::InvalidConfig(msg));
    for (name, value) in [("n", config.n), ("m", config.m), ("e", config.e), ("nep", config.nep), ("nsp", config.nsp)] {
        if value < 1 {
            return invalid(format!("{name} must be at least 1"));
        }
    }
    if config.ngh < 1 {
        return invalid("ngh must be at least 1".into());
    }
    if config.e > config.m {
        return invalid(format!("e ≤ m violated (e={}, m={})", config.e, config.m));
    }
    if config.m > config.n {
        return invalid(format!("m ≤ n violated (m={}, n={})", config.m, config.n));
    }
    let s = &config.stopping;
    if s.max_iterations < 1 {
        return invalid("stopping.max_iterations must be at least 1".into());
    }
    if s.patience == Some(0) {
        return invalid("stopping.patience must be at least 1".into());
    }
    if !(s.improvement_epsilon.is_finite() && s.improvement_epsilon >= 0.0) {
        return invalid(format!("stopping.epsilon must be finite and >= 0, got {}", s.improvement_epsilon));
    }
    if s.target_fitness.is_some_and(|t| !t.is_finite()) {
        return invalid("stopping.target_fitness must be finite".into());
    }
    let mut warnings = Vec::new();
    if config.nep <= config.nsp {
        warnings.push(ConfigWarning(format!(
            "nep ≤ nsp (nep={}, nsp={}): elite sites should get more recruits than other sites",
            config.nep, config.nsp
        )));
    }
    Ok(warnings)
}

/// One evaluated bee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub params: ParamVector,
    pub fitness: f64,
    pub eval_id: u64,
}

/// Total order used everywhere candidates are ranked: fitness descending, then
/// parameters ascending (lexicographic), then `eval_id` ascending.
pub fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then_with(|| a.params.cmp(&b.params))
        .then_with(|| a.eval_id.cmp(&b.eval_id))
}

pub fn sort_population(mut population: Vec<Candidate>) -> Vec<Candidate> {
    population.sort_by(rank);
    population
}

fn fittest<'a>(candidates: impl IntoIterator<Item = &'a Candidate>) -> Option<&'a Candidate> {
    candidates.into_iter().min_by(|a, b| rank(a, b))
}

/// Hands out evaluation ids and runs batches of evaluations, optionally on a
/// dedicated thread pool. Results always come back in submission order.
pub struct Evaluator<'o> {
    objective: &'o dyn Objective,
    pool: Option<rayon::ThreadPool>,
    next_id: u64,
}

impl<'o> Evaluator<'o> {
    pub fn new(objective: &'o dyn Objective, workers: usize) -> Self {
        let pool = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("failed to build evaluation pool")
        });
        Evaluator { objective, pool, next_id: 0 }
    }

    /// Evaluations issued so far.
    pub fn issued(&self) -> u64 {
        self.next_id
    }

    pub fn objective(&self) -> &'o dyn Objective {
        self.objective
    }

    pub fn evaluate_batch(&mut self, batch: Vec<ParamVector>) -> Result<Vec<Candidate>, EngineError> {
        let first = self.next_id;
        self.next_id += batch.len() as u64;
        let objective = self.objective;
        let eval = |(i, params): (usize, ParamVector)| {
            let eval_id = first + i as u64;
            match objective.evaluate(&params, eval_id).and_then(crate::objective::finite) {
                Ok(fitness) => Ok(Candidate { params, fitness, eval_id }),
                Err(source) => Err(EngineError::ObjectiveFailure { params, eval_id, source }),
            }
        };
        let results: Vec<Result<Candidate, EngineError>> = match &self.pool {
            Some(pool) => pool.install(|| batch.into_par_iter().enumerate().map(eval).collect()),
            None => batch.into_iter().enumerate().map(eval).collect(),
        };
        results.into_iter().collect()
    }
}

/// Scouts `config.n` uniform bees and evaluates them.
pub fn initialize(
    space: &ParamSpace,
    config: &BAConfig,
    rng: &mut SearchRng,
    evaluator: &mut Evaluator<'_>,
) -> Result<Vec<Candidate>, EngineError> {
    let params = (0..config.n).map(|_| space.sample_uniform(rng)).collect();
    evaluator.evaluate_batch(params)
}

/// Neighbour draws for one site. On a single-point space the only "neighbour" is the
/// site itself.
fn draw_recruits(
    space: &ParamSpace,
    site: &ParamVector,
    recruits: usize,
    ngh: u32,
    rng: &mut SearchRng,
) -> Result<Vec<ParamVector>, EngineError> {
    (0..recruits)
        .map(|_| match space.neighbor(site, ngh, rng) {
            Err(SpaceError::NeighborhoodEmpty) => Ok(site.clone()),
            other => other.map_err(EngineError::from),
        })
        .collect()
}

/// Sends `recruits` bees to the neighbourhood of `site` and returns the fittest of the
/// site and its recruits.
pub fn local_search_site(
    site: &Candidate,
    recruits: usize,
    space: &ParamSpace,
    ngh: u32,
    rng: &mut SearchRng,
    evaluator: &mut Evaluator<'_>,
) -> Result<Candidate, EngineError> {
    let batch = draw_recruits(space, &site.params, recruits, ngh, rng)?;
    let scored = evaluator.evaluate_batch(batch)?;
    Ok(fittest(std::iter::once(site).chain(&scored)).cloned().expect("site is present"))
}

/// `count` fresh uniform scouts.
pub fn global_search(
    count: usize,
    space: &ParamSpace,
    rng: &mut SearchRng,
    evaluator: &mut Evaluator<'_>,
) -> Result<Vec<Candidate>, EngineError> {
    let params = (0..count).map(|_| space.sample_uniform(rng)).collect();
    evaluator.evaluate_batch(params)
}

/// Per-iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: u32,
    pub evaluations_this_iter: u64,
    pub best_so_far: Candidate,
    pub population_best: Candidate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_snapshot: Option<Vec<Candidate>>,
}

/// Mutable state carried between iterations.
pub struct SearchState {
    pub population: Vec<Candidate>,
    pub best: Candidate,
    pub rng: SearchRng,
    pub iteration: u32,
}

impl SearchState {
    pub fn new(population: Vec<Candidate>, rng: SearchRng) -> Self {
        let best = fittest(&population).cloned().expect("population is non-empty");
        SearchState { population, best, rng, iteration: 0 }
    }
}

/// One iteration of the main loop. Replaces `state.population` with the `m` updated
/// sites followed by `n - m` new scouts.
pub fn step(
    state: &mut SearchState,
    config: &BAConfig,
    space: &ParamSpace,
    evaluator: &mut Evaluator<'_>,
    snapshot: bool,
) -> Result<IterationReport, EngineError> {
    let sorted = sort_population(std::mem::take(&mut state.population));
    let sites = &sorted[..config.m];

    let mut batch = Vec::with_capacity(config.evaluations_per_iteration());
    let mut spans = Vec::with_capacity(config.m);
    for (rank, site) in sites.iter().enumerate() {
        let recruits = if rank < config.e { config.nep } else { config.nsp };
        spans.push(batch.len()..batch.len() + recruits);
        batch.extend(draw_recruits(space, &site.params, recruits, config.ngh, &mut state.rng)?);
    }
    let scout_count = config.n - config.m;
    batch.extend((0..scout_count).map(|_| space.sample_uniform(&mut state.rng)));

    let issued = batch.len() as u64;
    let scored = match evaluator.evaluate_batch(batch) {
        Ok(scored) => scored,
        Err(e) => {
            state.population = sorted;
            return Err(e);
        }
    };

    let mut population: Vec<Candidate> = sites
        .iter()
        .zip(spans)
        .map(|(site, span)| {
            fittest(std::iter::once(site).chain(&scored[span])).cloned().expect("site is present")
        })
        .collect();
    population.extend_from_slice(&scored[scored.len() - scout_count..]);

    if let Some(top) = fittest(&scored) {
        if rank(top, &state.best) == Ordering::Less {
            state.best = top.clone();
        }
    }
    let population_best = fittest(&population).cloned().expect("population is non-empty");
    let report = IterationReport {
        iteration: state.iteration,
        evaluations_this_iter: issued,
        best_so_far: state.best.clone(),
        population_best,
        population_snapshot: snapshot.then(|| population.clone()),
    };
    state.population = population;
    state.iteration += 1;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxIterations,
    Patience,
    TargetReached,
    /// The objective failed; the trace is partial.
    Aborted,
}

/// Everything needed to audit or replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub space: ParamSpace,
    pub config: BAConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<ConfigWarning>,
    pub initial_population: Vec<Candidate>,
    pub reports: Vec<IterationReport>,
    pub stop_reason: StopReason,
    /// Evaluations issued by the engine, cache hits included.
    pub total_evaluations: u64,
    /// Evaluations that reached the underlying objective, when a cache reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinct_evaluations: Option<u64>,
    pub best: Candidate,
}

impl RunTrace {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serialises");
        s.push('\n');
        s
    }

    /// Convergence table: `iteration,evaluations_cum,best_fitness,<one column per domain>`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string(), "evaluations_cum".into(), "best_fitness".into()];
        header.extend(self.space.names().map(str::to_owned));
        w.write_record(&header)?;
        let mut cumulative = self.initial_population.len() as u64;
        for r in &self.reports {
            cumulative += r.evaluations_this_iter;
            let mut row = vec![r.iteration.to_string(), cumulative.to_string(), r.best_so_far.fitness.to_string()];
            row.extend(r.best_so_far.params.values().iter().map(i64::to_string));
            w.write_record(&row)?;
        }
        w.flush()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Knobs that do not change the outcome of a run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Threads for objective evaluation; 0 or 1 evaluates inline.
    pub workers: usize,
    /// Record the full population in every report.
    pub snapshots: bool,
    /// Echoed into the trace.
    pub objective_spec: Option<ObjectiveSpec>,
}

/// A failed run, with the trace up to the failure when one exists.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunError {
    #[source]
    pub error: EngineError,
    pub partial: Option<Box<RunTrace>>,
}

impl From<EngineError> for RunError {
    fn from(error: EngineError) -> Self {
        RunError { error, partial: None }
    }
}

pub fn run(space: &ParamSpace, config: &BAConfig, objective: &dyn Objective) -> Result<RunTrace, RunError> {
    run_with(space, config, objective, &RunOptions::default())
}

/// Runs the algorithm to completion.
pub fn run_with(
    space: &ParamSpace,
    config: &BAConfig,
    objective: &dyn Objective,
    options: &RunOptions,
) -> Result<RunTrace, RunError> {
    let warnings = validate(config)?;
    let distinct_before = objective.distinct_evaluations();
    let mut evaluator = Evaluator::new(objective, options.workers);
    let mut rng = seeded(config.seed);
    let stopping = &config.stopping;

    let initial = initialize(space, config, &mut rng, &mut evaluator)?;
    let mut state = SearchState::new(initial.clone(), rng);
    let mut reports = Vec::new();
    let reached = |best: &Candidate| stopping.target_fitness.is_some_and(|t| best.fitness >= t);

    let mut stale = 0u32;
    let mut reference = state.best.fitness;
    let outcome = loop {
        if reached(&state.best) {
            break Ok(StopReason::TargetReached);
        }
        if stopping.patience.is_some_and(|p| stale >= p) {
            break Ok(StopReason::Patience);
        }
        if state.iteration >= stopping.max_iterations {
            break Ok(StopReason::MaxIterations);
        }
        match step(&mut state, config, space, &mut evaluator, options.snapshots) {
            Ok(report) => reports.push(report),
            Err(e) => break Err(e),
        }
        if state.best.fitness - reference > stopping.improvement_epsilon {
            reference = state.best.fitness;
            stale = 0;
        } else {
            stale += 1;
        }
    };

    let distinct = match (distinct_before, objective.distinct_evaluations()) {
        (Some(before), Some(after)) => Some(after - before),
        _ => None,
    };
    let trace = |stop_reason| RunTrace {
        space: space.clone(),
        config: config.clone(),
        objective: options.objective_spec.clone(),
        warnings: warnings.clone(),
        initial_population: initial.clone(),
        reports: reports.clone(),
        stop_reason,
        total_evaluations: evaluator.issued(),
        distinct_evaluations: distinct,
        best: state.best.clone(),
    };
    match outcome {
        Ok(reason) => Ok(trace(reason)),
        Err(error) => Err(RunError { error, partial: Some(Box::new(trace(StopReason::Aborted))) }),
    }
}
