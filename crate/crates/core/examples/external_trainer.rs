// Drive an out-of-process evaluator over the line-delimited JSON protocol. By default
// this spawns `optba serve`, the reference child; set `OPTBA_TRAINER` to use your own
// trainer:
//
// cargo build && cargo run --example external_trainer
// OPTBA_TRAINER="python3 my_trainer.py" cargo run --example external_trainer

use std::error::Error;
use std::path::PathBuf;

use optba::engine::{self, RunOptions};
use optba::objective::{ExternalSettings, ObjectiveKind};
use optba::prelude::*;

/// The `optba` binary sits one directory above the example binaries.
fn reference_child() -> Option<Vec<String>> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?;
    let dir = if dir.ends_with("examples") || dir.ends_with("deps") { dir.parent()? } else { dir };
    let bin: PathBuf = dir.join(format!("optba{}", std::env::consts::EXE_SUFFIX));
    bin.exists().then(|| vec![bin.to_string_lossy().into_owned(), "serve".into()])
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let custom: Vec<String> = std::env::var("OPTBA_TRAINER")
        .map(|v| v.split_whitespace().map(String::from).collect())
        .unwrap_or_default();
    let command = if custom.is_empty() {
        match reference_child() {
            Some(c) => c,
            None => {
                println!("optba binary not built yet; run `cargo build` first");
                return Ok(());
            }
        }
    } else {
        custom
    };
    println!("evaluator: {}", command.join(" "));

    let space = ParamSpace::new(vec![ParamDomain::new("epochs", 1, 100)?, ParamDomain::new("units", 16, 256)?])?;
    let spec = ObjectiveSpec::new(ObjectiveKind::External(ExternalSettings { command, timeout_secs: 60.0 }));
    let objective = spec.build(&space)?;
    let config = BAConfig::standard().with_seed(8).with_stopping(StoppingCriteria {
        target_fitness: Some(0.9963),
        ..StoppingCriteria::iterations(100)
    });
    let options = RunOptions { workers: 4, objective_spec: Some(spec), ..RunOptions::default() };
    let trace = engine::run_with(&space, &config, objective.as_ref(), &options)?;
    println!(
        "best {} fitness={} after {} evaluations ({:?})",
        space.format_params(&trace.best.params),
        trace.best.fitness,
        trace.total_evaluations,
        trace.stop_reason
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
