// Tune (epochs, units) on the default surrogate with the standard configuration:
// 10 scouts, 7 sites, 3 elite, 4/1 recruits, one-step neighbourhood.
//
// cargo run --example standard_config

use std::error::Error;

use optba::engine;
use optba::prelude::*;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let space = ParamSpace::new(vec![
        ParamDomain::new("epochs", 1, 100)?,
        ParamDomain::new("units", 16, 256)?,
    ])?;
    let surface = Surrogate::unimodal(&space, UnimodalSettings::default())?;

    let config = BAConfig::standard().with_seed(42).with_stopping(StoppingCriteria {
        max_iterations: 100,
        patience: None,
        improvement_epsilon: 0.0,
        target_fitness: Some(0.9963),
    });
    println!("{} evaluations per iteration", config.evaluations_per_iteration());

    let trace = engine::run(&space, &config, &surface)?;
    for r in trace.reports.iter().step_by(5) {
        println!(
            "iteration {:>3}: best {} = {:.6}",
            r.iteration,
            space.format_params(&r.best_so_far.params),
            r.best_so_far.fitness
        );
    }
    println!(
        "stopped ({:?}) after {} evaluations at {} fitness={}",
        trace.stop_reason,
        trace.total_evaluations,
        space.format_params(&trace.best.params),
        trace.best.fitness
    );
    assert_eq!(trace.stop_reason, StopReason::TargetReached);
    assert_eq!(trace.best.params.values(), [49, 108]);
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
