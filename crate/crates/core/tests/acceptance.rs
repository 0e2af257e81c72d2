//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each, and exits
//! non-zero if any fail.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use optba::engine::{self, RunTrace};
use optba::harness::{compare, run_grid_search, Comparison};
use optba::objective::{
    Bump, ExternalEvaluator, ExternalSettings, ObjectiveError, ObjectiveKind,
};
use optba::prelude::*;
use optba::rng::seeded;

const BIN: &str = env!("CARGO_BIN_EXE_optba");

fn standard_space() -> ParamSpace {
    ParamSpace::new(vec![
        ParamDomain::new("epochs", 1, 100).unwrap(),
        ParamDomain::new("units", 16, 256).unwrap(),
    ])
    .unwrap()
}

fn grid_20x20() -> ParamSpace {
    ParamSpace::new(vec![ParamDomain::new("x", 0, 19).unwrap(), ParamDomain::new("y", 0, 19).unwrap()]).unwrap()
}

/// Bowl peaking at (15, 14) with three bumps that are strict local maxima under the
/// one-step neighbourhood: (3, 3), (17, 2) and (2, 17).
fn deceptive_surface() -> MultimodalSettings {
    MultimodalSettings {
        optimum: vec![15, 14],
        peak: 0.9,
        coeffs: vec![1e-3, 1e-3],
        bumps: vec![
            Bump { center: vec![3, 3], height: 0.2, width: 2.0 },
            Bump { center: vec![17, 2], height: 0.12, width: 1.5 },
            Bump { center: vec![2, 17], height: 0.12, width: 1.5 },
        ],
        verify: true,
    }
}

fn standard_config_text(seed: u64, objective: &str) -> String {
    format!(
        r#"{{
  "space": [{{"name": "epochs", "lower": 1, "upper": 100}}, {{"name": "units", "lower": 16, "upper": 256}}],
  "objective": {objective},
  "ba": {{"n": 10, "m": 7, "e": 3, "nep": 4, "nsp": 1, "ngh": 1, "seed": {seed}}},
  "stopping": {{"max_iterations": 100, "patience": null, "target_fitness": 0.9963}}
}}"#
    )
}

struct Gate {
    traces: Vec<RunTrace>,
    failures: usize,
}

impl Gate {
    fn check(&mut self, name: &str, f: impl FnOnce(&mut Vec<RunTrace>) -> Result<String, String>) {
        let mut traces = Vec::new();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut traces)))
            .unwrap_or_else(|p| {
                Err(p.downcast_ref::<String>().cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into()))
            });
        self.traces.extend(traces);
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1(traces: &mut Vec<RunTrace>) -> Result<String, String> {
    let mut ba = BAConfig::standard().with_seed(20_240_131);
    ba.stopping = StoppingCriteria {
        max_iterations: 100,
        patience: None,
        improvement_epsilon: 0.0,
        target_fitness: Some(0.9963),
    };
    let config = ExperimentConfig {
        space: standard_space(),
        objective: ObjectiveSpec::default_surrogate(),
        ba,
        baselines: vec![],
        repeats: 50,
        budget_mode: BudgetMode::MatchTotalEvaluations,
        workers: 1,
    };
    let start = Instant::now();
    let cmp = compare(&config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let hits = cmp
        .bees_traces
        .iter()
        .filter(|t| t.stop_reason == StopReason::TargetReached && t.best.params.values() == [49, 108])
        .count();
    traces.extend(cmp.bees_traces.iter().cloned());
    let rate = hits as f64 / 50.0;
    ensure(rate >= 0.95, || format!("{hits}/50 trials recovered (49, 108)"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{hits}/50 trials stopped TargetReached at (49, 108) in {elapsed:.2?}"))
}

fn deceptive_comparison() -> Result<Comparison, String> {
    let mut ba = BAConfig::standard().with_seed(7);
    // 10 + 20 * 19 = 390 evaluations, within the 400 budget.
    ba.stopping = StoppingCriteria::iterations(20);
    let config = ExperimentConfig {
        space: grid_20x20(),
        objective: ObjectiveSpec::new(ObjectiveKind::SurrogateMultimodal(deceptive_surface())),
        ba,
        baselines: vec![Method::RandomSearch],
        repeats: 100,
        budget_mode: BudgetMode::MatchTotalEvaluations,
        workers: 4,
    };
    compare(&config).map_err(|e| e.to_string())
}

fn criterion_2(traces: &mut Vec<RunTrace>) -> Result<String, String> {
    let space = grid_20x20();
    let surface = Surrogate::multimodal(&space, deceptive_surface()).map_err(|e| e.to_string())?;
    let (oracle, evals) = run_grid_search(&space, &surface).map_err(|e| e.to_string())?;
    ensure(oracle.params.values() == [15, 14] && evals == 400, || format!("oracle argmax {}", oracle.params))?;

    let cmp = deceptive_comparison()?;
    traces.extend(cmp.bees_traces.iter().cloned());
    ensure(cmp.oracle.as_ref().map(|o| &o.params) == Some(&oracle.params), || "harness oracle differs".into())?;
    for pair in cmp.trials.chunks(2) {
        ensure(pair[0].total_evaluations <= 400, || format!("bees used {}", pair[0].total_evaluations))?;
        ensure(pair[0].total_evaluations == pair[1].total_evaluations, || {
            format!("trial {} budgets differ", pair[0].trial)
        })?;
    }
    let bees = cmp.summary.method(Method::Bees).and_then(|m| m.success_rate).unwrap();
    let random = cmp.summary.method(Method::RandomSearch).and_then(|m| m.success_rate).unwrap();
    ensure(bees > random && bees >= 0.90, || format!("bees {bees:.2} vs random {random:.2}"))?;
    Ok(format!("success over 100 paired seeds: bees {bees:.2}, random search {random:.2}"))
}

fn criterion_3(all: &[RunTrace]) -> Result<String, String> {
    let mut iterations = 0;
    for t in all {
        let expected = (t.config.e * t.config.nep + (t.config.m - t.config.e) * t.config.nsp + (t.config.n - t.config.m)) as u64;
        ensure(expected == 19, || format!("config {:?} is not the standard configuration", t.config))?;
        for r in &t.reports {
            ensure(r.evaluations_this_iter == 19, || format!("iteration {} issued {}", r.iteration, r.evaluations_this_iter))?;
            iterations += 1;
        }
        ensure(t.total_evaluations == 10 + 19 * t.reports.len() as u64, || "total mismatch".into())?;
    }
    Ok(format!("19 evaluations in each of {iterations} iterations across {} traces", all.len()))
}

fn criterion_4(all: &[RunTrace]) -> Result<String, String> {
    for t in all {
        let mut prev = t.initial_population.iter().map(|c| c.fitness).fold(f64::MIN, f64::max);
        for r in &t.reports {
            ensure(r.best_so_far.fitness >= prev, || format!("best-so-far dropped at iteration {}", r.iteration))?;
            prev = r.best_so_far.fitness;
        }
    }
    Ok(format!("best-so-far non-decreasing in all {} traces", all.len()))
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn criterion_5() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("standard.json");
    fs::write(&config, standard_config_text(42, r#"{"kind": "surrogate_unimodal"}"#)).unwrap();
    let mut outputs = Vec::new();
    for (label, workers) in [("a", "1"), ("b", "8"), ("c", "1"), ("d", "8")] {
        let out = dir.path().join(label);
        let res = run_cli(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers, "--seed", "42"]);
        ensure(res.status.success(), || String::from_utf8_lossy(&res.stderr).into_owned())?;
        outputs.push((fs::read(out.join("trace.json")).unwrap(), fs::read(out.join("convergence.csv")).unwrap()));
    }
    for o in &outputs[1..] {
        ensure(*o == outputs[0], || "outputs differ between invocations".into())?;
    }
    Ok(format!(
        "4 runs (workers 1, 8, 1, 8) byte-identical: trace.json {} bytes, convergence.csv {} bytes",
        outputs[0].0.len(),
        outputs[0].1.len()
    ))
}

fn criterion_6(traces: &mut Vec<RunTrace>) -> Result<String, String> {
    let mut rng = seeded(606);
    let mut checked_success = 0;
    let mut points = 0;
    for k in 0..10u64 {
        let side = 20 + 6 * (k as i64 % 6);
        let space = ParamSpace::new(vec![
            ParamDomain::new("a", 0, side - 1).unwrap(),
            ParamDomain::new("b", 0, 2499 / side - 1).unwrap(),
        ])
        .unwrap();
        ensure(space.cardinality() <= 2500, || "grid too large".into())?;
        points += space.cardinality();
        let settings = MultimodalSettings::random(&space, 2 + (k as usize % 3), &mut rng).map_err(|e| e.to_string())?;
        let surface = Surrogate::multimodal(&space, settings.clone()).map_err(|e| e.to_string())?;
        let (argmax, _) = run_grid_search(&space, &surface).map_err(|e| e.to_string())?;
        ensure(&argmax.params == surface.optimum(), || {
            format!("surface {k}: oracle {} vs planted {}", argmax.params, surface.optimum())
        })?;

        let mut ba = BAConfig::standard().with_seed(1000 + k);
        ba.stopping = StoppingCriteria::iterations(30);
        let cmp = compare(&ExperimentConfig {
            space: space.clone(),
            objective: ObjectiveSpec::new(ObjectiveKind::SurrogateMultimodal(settings)),
            ba,
            baselines: vec![],
            repeats: 5,
            budget_mode: BudgetMode::MatchTotalEvaluations,
            workers: 1,
        })
        .map_err(|e| e.to_string())?;
        for rec in &cmp.trials {
            if rec.success == Some(true) {
                ensure(rec.best.params == argmax.params, || format!("trial marked success at {}", rec.best.params))?;
                checked_success += 1;
            } else {
                ensure(rec.best.params != argmax.params, || "argmax reached but not marked success".into())?;
            }
        }
        traces.extend(cmp.bees_traces);
    }
    Ok(format!(
        "10 random surfaces ({points} grid points total): oracle = planted optimum; {checked_success}/50 successful trials match it"
    ))
}

fn criterion_7() -> Result<String, String> {
    let space = standard_space();
    let mut rng = seeded(7_000);
    let mut boundary_hits = 0;
    for i in 0..10_000 {
        // Mix interior and boundary centres.
        let center = match i % 4 {
            0 => ParamVector::new(vec![1, 16]),
            1 => ParamVector::new(vec![100, 256]),
            _ => space.sample_uniform(&mut rng),
        };
        let v = space.neighbor(&center, 1, &mut rng).map_err(|e| e.to_string())?;
        ensure(v != center, || format!("returned centre {center}"))?;
        ensure(space.validate(&v).is_ok(), || format!("{v} out of bounds"))?;
        for (a, b) in v.values().iter().zip(center.values()) {
            ensure((a - b).abs() <= 1, || format!("{v} is more than one step from {center}"))?;
        }
        if i % 4 < 2 {
            boundary_hits += 1;
        }
    }
    Ok(format!("10000 draws ({boundary_hits} at corners): within one step, never the centre, always in bounds"))
}

fn external(fault: Option<&str>, timeout_secs: f64) -> Result<ExternalEvaluator, String> {
    let mut command = vec![BIN.to_string(), "serve".into()];
    if let Some(f) = fault {
        command.push(format!("--fault={f}"));
    }
    ExternalEvaluator::spawn(&ExternalSettings { command, timeout_secs }, &standard_space()).map_err(|e| e.to_string())
}

fn criterion_8() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inproc = dir.path().join("inproc.json");
    let child = dir.path().join("child.json");
    fs::write(&inproc, standard_config_text(99, r#"{"kind": "surrogate_unimodal"}"#)).unwrap();
    fs::write(&child, standard_config_text(99, &format!(r#"{{"kind": "external", "command": [{:?}, "serve"], "timeout_secs": 30}}"#, BIN))).unwrap();
    let mut finals = Vec::new();
    let mut csvs = Vec::new();
    for (cfg, out, workers) in [(&inproc, "a", "1"), (&child, "b", "4")] {
        let out = dir.path().join(out);
        let res = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers]);
        ensure(res.status.success(), || String::from_utf8_lossy(&res.stderr).into_owned())?;
        let stdout = String::from_utf8(res.stdout).unwrap();
        finals.push(stdout.lines().last().unwrap_or_default().to_string());
        csvs.push(fs::read_to_string(out.join("convergence.csv")).unwrap());
    }
    ensure(finals[0] == finals[1], || format!("{finals:?}"))?;
    ensure(csvs[0] == csvs[1], || "convergence traces differ".into())?;

    let p = ParamVector::new(vec![49, 108]);
    let ok = external(None, 30.0)?;
    ensure(ok.evaluate(&p, 0) == Ok(0.9963), || "echo mismatch".into())?;
    drop(ok);

    let nan = external(Some("nan"), 30.0)?.evaluate(&p, 0);
    ensure(matches!(nan, Err(ObjectiveError::Protocol(_))), || format!("NaN fitness gave {nan:?}"))?;
    let malformed = external(Some("malformed"), 30.0)?.evaluate(&p, 0);
    ensure(matches!(malformed, Err(ObjectiveError::Protocol(_))), || format!("malformed gave {malformed:?}"))?;
    let wrong = external(Some("wrong-id"), 30.0)?.evaluate(&p, 0);
    ensure(matches!(wrong, Err(ObjectiveError::Protocol(_))), || format!("wrong id gave {wrong:?}"))?;

    let shuffled = Arc::new(external(Some("shuffle"), 30.0)?);
    let barrier = Arc::new(Barrier::new(2));
    let handles: Vec<_> = [vec![49, 108], vec![50, 108]]
        .into_iter()
        .map(|v| {
            let (ev, barrier) = (Arc::clone(&shuffled), Arc::clone(&barrier));
            std::thread::spawn(move || {
                barrier.wait();
                ev.evaluate(&ParamVector::new(v), 0)
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    ensure(results[0] == Ok(0.9963) && results[1].as_ref().is_ok_and(|f| (f - 0.99628).abs() < 1e-12), || {
        format!("out-of-order replies resolved to {results:?}")
    })?;

    let hang = external(Some("hang"), 0.3)?;
    let start = Instant::now();
    let timed_out = hang.evaluate(&p, 0);
    ensure(matches!(timed_out, Err(ObjectiveError::Timeout(_))), || format!("hang gave {timed_out:?}"))?;
    ensure(start.elapsed() < Duration::from_secs(5), || "timeout took too long".into())?;

    let dies = external(Some("exit-after=1"), 30.0)?.evaluate(&p, 0);
    ensure(matches!(dies, Err(ObjectiveError::ChildExited(_))), || format!("child death gave {dies:?}"))?;

    // A dying child aborts a CLI run with exit 2 and a partial trace on disk.
    let dying = dir.path().join("dying.json");
    fs::write(&dying, standard_config_text(99, &format!(r#"{{"kind": "external", "command": [{:?}, "serve", "--fault=exit-after=15"]}}"#, BIN))).unwrap();
    let out = dir.path().join("dying_out");
    let res = run_cli(&["run", "--config", dying.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    ensure(res.status.code() == Some(2), || format!("exit {:?}", res.status.code()))?;
    let partial: RunTrace = serde_json::from_slice(&fs::read(out.join("trace.json")).unwrap()).map_err(|e| e.to_string())?;
    ensure(partial.stop_reason == StopReason::Aborted, || "partial trace not marked aborted".into())?;

    Ok(format!(
        "child run matches in-process run ({}); NaN, malformed, wrong id, out-of-order, timeout and child death behave as documented",
        finals[0]
    ))
}

fn criterion_9(traces: &mut Vec<RunTrace>) -> Result<String, String> {
    let space = ParamSpace::new(vec![
        ParamDomain::new("epochs", 49, 49).unwrap(),
        ParamDomain::new("units", 108, 108).unwrap(),
    ])
    .unwrap();
    let surface = Surrogate::unimodal(&space, UnimodalSettings::default()).map_err(|e| e.to_string())?;
    let mut config = BAConfig::standard().with_seed(3);
    config.stopping.target_fitness = Some(0.9963);
    let trace = engine::run(&space, &config, &surface).map_err(|e| e.to_string())?;
    ensure(trace.stop_reason == StopReason::TargetReached, || format!("{:?}", trace.stop_reason))?;
    ensure(trace.reports.is_empty() && trace.total_evaluations == 10, || {
        format!("{} iterations, {} evaluations", trace.reports.len(), trace.total_evaluations)
    })?;
    let detail = format!("stopped after initialization, {} evaluations, best {}", trace.total_evaluations, trace.best.params);
    traces.push(trace);
    Ok(detail)
}

fn main() {
    // Nothing to do for `cargo test -- --list` and similar probes.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut gate = Gate { traces: Vec::new(), failures: 0 };
    gate.check("1 planted-optimum recovery", criterion_1);
    gate.check("2 global-optimum escape", criterion_2);
    let bees_traces: Vec<RunTrace> = gate.traces.clone();
    gate.check("3 evaluation accounting", |_| criterion_3(&bees_traces));
    gate.check("5 determinism across worker counts", |_| criterion_5());
    gate.check("6 oracle equivalence", criterion_6);
    gate.check("7 neighbourhood semantics", |_| criterion_7());
    gate.check("8 protocol conformance", |_| criterion_8());
    gate.check("9 early termination", criterion_9);
    let all = gate.traces.clone();
    gate.check("4 monotone elitism", |_| criterion_4(&all));
    if gate.failures > 0 {
        println!("{} acceptance criteria failed", gate.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
