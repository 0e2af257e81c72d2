//! Paired-seed comparisons against random and exhaustive grid search.
//!
//! Trial `i` uses the seed `mix_seed(master, i)` for every method, so adding trials
//! never changes earlier ones. Success means finding the exact grid argmax, which is
//! computed once by exhaustive evaluation whenever the space is small enough.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, rank, BAConfig, Candidate, EngineError, Evaluator, RunOptions, RunTrace};
use crate::objective::{BuildError, Objective, ObjectiveSpec};
use crate::rng::{mix_seed, seeded};
use crate::space::{ParamSpace, DEFAULT_ENUMERATION_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bees,
    RandomSearch,
    GridSearch,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bees => "bees",
            Method::RandomSearch => "random_search",
            Method::GridSearch => "grid_search",
        }
    }
}

/// How the random-search budget is derived from the bees run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Exactly the evaluations the paired bees run issued.
    #[default]
    MatchTotalEvaluations,
    /// The nominal bees budget, `n + max_iterations * per-iteration evaluations`,
    /// whether or not the bees run stopped early.
    MatchIterations,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub space: ParamSpace,
    pub objective: ObjectiveSpec,
    /// Its `seed` is the master seed for the trials.
    pub ba: BAConfig,
    pub baselines: Vec<Method>,
    pub repeats: usize,
    pub budget_mode: BudgetMode,
    /// Trials run concurrently on this many threads.
    pub workers: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("trial {trial}, {method}: {source}")]
    Trial {
        trial: usize,
        method: &'static str,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Result of a baseline search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrace {
    pub best: Candidate,
    pub total_evaluations: u64,
    /// `(evaluations so far, best fitness)` at every improvement.
    pub improvements: Vec<(u64, f64)>,
}

/// `budget` independent uniform draws.
pub fn run_random_search(
    space: &ParamSpace,
    budget: u64,
    seed: u64,
    objective: &dyn Objective,
) -> Result<BaselineTrace, EngineError> {
    if budget < 1 {
        return Err(EngineError::InvalidConfig("random search budget must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let mut evaluator = Evaluator::new(objective, 1);
    let points = (0..budget).map(|_| space.sample_uniform(&mut rng)).collect();
    let scored = evaluator.evaluate_batch(points)?;
    let mut improvements = Vec::new();
    let mut best: Option<&Candidate> = None;
    for (i, c) in scored.iter().enumerate() {
        if best.is_none_or(|b| rank(c, b).is_lt()) {
            best = Some(c);
            improvements.push((i as u64 + 1, c.fitness));
        }
    }
    Ok(BaselineTrace { best: best.cloned().expect("budget >= 1"), total_evaluations: budget, improvements })
}

/// Evaluates every grid point once and returns the argmax under the engine's
/// ranking, with the number of evaluations.
pub fn run_grid_search(space: &ParamSpace, objective: &dyn Objective) -> Result<(Candidate, u64), EngineError> {
    let points: Vec<_> = space.enumerate_grid_with_limit(DEFAULT_ENUMERATION_LIMIT)?.collect();
    let mut evaluator = Evaluator::new(objective, 1);
    let scored = evaluator.evaluate_batch(points)?;
    let best = scored.iter().min_by(|a, b| rank(a, b)).cloned().expect("space is non-empty");
    Ok((best, scored.len() as u64))
}

/// One method's outcome in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    pub seed: u64,
    pub total_evaluations: u64,
    pub best: Candidate,
    /// `None` when no oracle argmax is available.
    pub success: Option<bool>,
    pub evals_to_optimum: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub success_rate: Option<f64>,
    pub mean_evals_to_optimum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub methods: Vec<MethodSummary>,
}

impl StatsSummary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<14} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>10}\n",
            "method", "trials", "mean", "std", "median", "min", "max", "success", "evals_opt"
        );
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        for m in &self.methods {
            out.push_str(&format!(
                "{:<14} {:>6} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>8} {:>10}\n",
                m.method.as_str(),
                m.trials,
                m.mean,
                m.std_dev,
                m.median,
                m.min,
                m.max,
                opt(m.success_rate, 3),
                opt(m.mean_evals_to_optimum, 1),
            ));
        }
        out
    }
}

fn summarize(method: Method, records: &[&TrialRecord]) -> MethodSummary {
    let mut values: Vec<f64> = records.iter().map(|r| r.best.fitness).collect();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_dev = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let median = if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 };
    let known: Vec<bool> = records.iter().filter_map(|r| r.success).collect();
    let success_rate = (known.len() == n).then(|| known.iter().filter(|s| **s).count() as f64 / n as f64);
    let to_opt: Vec<u64> = records.iter().filter_map(|r| r.evals_to_optimum).collect();
    let mean_evals_to_optimum =
        (!to_opt.is_empty()).then(|| to_opt.iter().sum::<u64>() as f64 / to_opt.len() as f64);
    MethodSummary {
        method,
        trials: n,
        // Clamp away rounding so that min <= mean <= max holds exactly.
        mean: mean.clamp(values[0], values[n - 1]),
        std_dev,
        median,
        min: values[0],
        max: values[n - 1],
        success_rate,
        mean_evals_to_optimum,
    }
}

/// Everything a comparison produced.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub summary: StatsSummary,
    /// Sorted by trial, then method.
    pub trials: Vec<TrialRecord>,
    pub oracle: Option<Candidate>,
    /// Bees traces by trial index.
    pub bees_traces: Vec<RunTrace>,
}

impl Comparison {
    /// Per-trial CSV:
    /// `trial,method,seed,total_evaluations,best_fitness,success,evals_to_optimum,<domains>`.
    pub fn write_trials_csv<W: Write>(&self, space: &ParamSpace, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "trial", "method", "seed", "total_evaluations", "best_fitness", "success", "evals_to_optimum",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(space.names().map(str::to_owned));
        w.write_record(&header)?;
        for r in &self.trials {
            let mut row = vec![
                r.trial.to_string(),
                r.method.as_str().to_string(),
                r.seed.to_string(),
                r.total_evaluations.to_string(),
                r.best.fitness.to_string(),
                r.success.map_or(String::new(), |s| s.to_string()),
                r.evals_to_optimum.map_or(String::new(), |e| e.to_string()),
            ];
            row.extend(r.best.params.values().iter().map(i64::to_string));
            w.write_record(&row)?;
        }
        w.flush()
    }

    pub fn trials_csv(&self, space: &ParamSpace) -> String {
        let mut buf = Vec::new();
        self.write_trials_csv(space, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn judge(best: &Candidate, oracle: Option<&Candidate>) -> (Option<bool>, Option<u64>) {
    match oracle {
        Some(o) => {
            let hit = best.params == o.params;
            (Some(hit), hit.then_some(best.eval_id + 1))
        }
        None => (None, None),
    }
}

/// Runs `repeats` paired trials of the bees algorithm and each requested baseline.
pub fn compare(config: &ExperimentConfig) -> Result<Comparison, HarnessError> {
    if config.repeats < 1 {
        return Err(HarnessError::InvalidConfig("repeats must be at least 1".into()));
    }
    engine::validate(&config.ba)?;
    config.objective.validate_for(&config.space)?;

    let enumerable = config.space.cardinality() <= DEFAULT_ENUMERATION_LIMIT;
    let oracle = if enumerable {
        let objective = config.objective.build(&config.space)?;
        Some(run_grid_search(&config.space, objective.as_ref())?)
    } else {
        None
    };
    if config.baselines.contains(&Method::GridSearch) && oracle.is_none() {
        return Err(HarnessError::InvalidConfig(format!(
            "grid_search needs an enumerable space; this one has {} points",
            config.space.cardinality()
        )));
    }
    let oracle_best = oracle.as_ref().map(|(c, _)| c);

    let run_trial = |trial: usize| -> Result<(Vec<TrialRecord>, RunTrace), HarnessError> {
        let seed = mix_seed(config.ba.seed, trial as u64);
        let wrap = |method: Method| move |source| HarnessError::Trial { trial, method: method.as_str(), source };
        let mut records = Vec::new();

        let objective = config.objective.build(&config.space)?;
        let ba = config.ba.clone().with_seed(seed);
        let options = RunOptions { workers: 1, snapshots: false, objective_spec: Some(config.objective.resolved()) };
        let trace = engine::run_with(&config.space, &ba, objective.as_ref(), &options)
            .map_err(|e| wrap(Method::Bees)(e.error))?;
        let (success, evals_to_optimum) = judge(&trace.best, oracle_best);
        records.push(TrialRecord {
            trial,
            method: Method::Bees,
            seed,
            total_evaluations: trace.total_evaluations,
            best: trace.best.clone(),
            success,
            evals_to_optimum,
        });

        for &method in &config.baselines {
            match method {
                Method::Bees => {}
                Method::RandomSearch => {
                    let budget = match config.budget_mode {
                        BudgetMode::MatchTotalEvaluations => trace.total_evaluations,
                        BudgetMode::MatchIterations => {
                            (config.ba.n + config.ba.stopping.max_iterations as usize * config.ba.evaluations_per_iteration())
                                as u64
                        }
                    };
                    let objective = config.objective.build(&config.space)?;
                    let result = run_random_search(&config.space, budget, seed, objective.as_ref())
                        .map_err(wrap(method))?;
                    let (success, evals_to_optimum) = judge(&result.best, oracle_best);
                    records.push(TrialRecord {
                        trial,
                        method,
                        seed,
                        total_evaluations: result.total_evaluations,
                        best: result.best,
                        success,
                        evals_to_optimum,
                    });
                }
                Method::GridSearch => {
                    let (best, evaluations) = oracle.clone().expect("checked above");
                    let (success, evals_to_optimum) = judge(&best, oracle_best);
                    records.push(TrialRecord {
                        trial,
                        method,
                        seed,
                        total_evaluations: evaluations,
                        best,
                        success,
                        evals_to_optimum,
                    });
                }
            }
        }
        Ok((records, trace))
    };

    let outcomes: Vec<Result<_, HarnessError>> = if config.workers > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .expect("failed to build trial pool")
            .install(|| (0..config.repeats).into_par_iter().map(run_trial).collect())
    } else {
        (0..config.repeats).map(run_trial).collect()
    };

    let mut trials = Vec::new();
    let mut bees_traces = Vec::new();
    for outcome in outcomes {
        let (records, trace) = outcome?;
        trials.extend(records);
        bees_traces.push(trace);
    }
    trials.sort_by_key(|r| (r.trial, r.method));

    let mut methods = vec![Method::Bees];
    methods.extend(config.baselines.iter().copied().filter(|m| *m != Method::Bees));
    methods.dedup();
    let summary = StatsSummary {
        methods: methods
            .into_iter()
            .map(|m| {
                let rs: Vec<&TrialRecord> = trials.iter().filter(|r| r.method == m).collect();
                summarize(m, &rs)
            })
            .collect(),
    };
    Ok(Comparison { summary, trials, oracle: oracle.map(|(c, _)| c), bees_traces })
}
