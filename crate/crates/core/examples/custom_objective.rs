// Optimise your own function: either a closure over the integer coordinates or a
// type implementing `Objective`. Evaluations run on four threads.
//
// cargo run --example custom_objective

use std::error::Error;

use optba::engine::{self, RunOptions};
use optba::objective::{from_fn, Objective, ObjectiveError};
use optba::prelude::*;

/// Pretend validation accuracy of a model with `layers` layers and batch size `2^log_batch`.
struct ToyTrainer;

impl Objective for ToyTrainer {
    fn evaluate(&self, params: &ParamVector, _eval_id: u64) -> Result<f64, ObjectiveError> {
        let (layers, log_batch) = (params[0] as f64, params[1] as f64);
        Ok(0.95 - 0.004 * (layers - 6.0).powi(2) - 0.01 * (log_batch - 5.0).powi(2))
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let space = ParamSpace::new(vec![ParamDomain::new("layers", 1, 12)?, ParamDomain::new("log_batch", 3, 9)?])?;
    let config = BAConfig::standard().with_seed(5).with_stopping(StoppingCriteria::iterations(30));
    let options = RunOptions { workers: 4, ..RunOptions::default() };

    let trace = engine::run_with(&space, &config, &ToyTrainer, &options)?;
    println!("trait objective: {} = {:.4}", space.format_params(&trace.best.params), trace.best.fitness);
    assert_eq!(trace.best.params.values(), [6, 5]);

    // Widths are multiples of 8 between 8 and 512.
    let widths = ParamSpace::new(vec![ParamDomain::with_step("width", 8, 512, 8)?])?;
    let closure = from_fn(|p: &[i64]| 1.0 / (1.0 + ((p[0] - 200) as f64).abs()));
    let trace = engine::run_with(&widths, &config, &closure, &options)?;
    println!("closure objective: {} = {}", widths.format_params(&trace.best.params), trace.best.fitness);
    assert_eq!(trace.best.params.values(), [200]);
    println!("{}", trace.to_csv().lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
