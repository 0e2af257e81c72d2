// Plant a random multimodal surface, confirm its optimum by exhaustive grid search,
// and check that the Bees Algorithm finds the same point.
//
// cargo run --example grid_oracle

use std::error::Error;

use optba::engine;
use optba::harness::run_grid_search;
use optba::prelude::*;
use optba::rng::seeded;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let space = ParamSpace::new(vec![ParamDomain::new("a", 0, 39)?, ParamDomain::new("b", 0, 49)?])?;
    let mut rng = seeded(11);
    let settings = MultimodalSettings::random(&space, 3, &mut rng)?;
    let surface = Surrogate::multimodal(&space, settings)?;
    println!("planted optimum {} with {} decoys", surface.optimum(), surface.bumps().len());

    let (oracle, evaluated) = run_grid_search(&space, &surface)?;
    println!("grid search: {} = {} after {evaluated} evaluations", oracle.params, oracle.fitness);
    assert_eq!(&oracle.params, surface.optimum());

    let config = BAConfig::standard()
        .with_seed(3)
        .with_stopping(StoppingCriteria { target_fitness: Some(oracle.fitness), ..StoppingCriteria::iterations(200) });
    let trace = engine::run(&space, &config, &surface)?;
    println!(
        "bees: {} = {} after {} evaluations ({:?})",
        trace.best.params, trace.best.fitness, trace.total_evaluations, trace.stop_reason
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
