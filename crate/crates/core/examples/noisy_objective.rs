// Noisy evaluations: the same point scores differently on each call, but the noise
// is keyed to the evaluation id, so a seeded run is still reproducible.
//
// cargo run --example noisy_objective

use std::error::Error;

use optba::engine;
use optba::objective::NoiseSpec;
use optba::prelude::*;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let space = ParamSpace::new(vec![ParamDomain::new("epochs", 1, 100)?, ParamDomain::new("units", 16, 256)?])?;
    let mut spec = ObjectiveSpec::default_surrogate();
    spec.noise = Some(NoiseSpec { stddev: 0.0005, seed: 17 });
    let objective = spec.build(&space)?;

    let config = BAConfig::standard().with_seed(21).with_stopping(StoppingCriteria::iterations(60));
    let first = engine::run(&space, &config, objective.as_ref())?;
    let second = engine::run(&space, &config, objective.as_ref())?;
    assert_eq!(first.best, second.best);

    let clean = Surrogate::unimodal(&space, UnimodalSettings::default())?;
    println!(
        "best observed {} = {:.5} (noise-free value {:.5})",
        space.format_params(&first.best.params),
        first.best.fitness,
        clean.fitness(&first.best.params)
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
