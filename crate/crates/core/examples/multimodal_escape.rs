// A 20x20 grid with three decoy peaks. Compares the Bees Algorithm against random
// search at the same evaluation budget over 100 paired seeds.
//
// cargo run --release --example multimodal_escape

use std::error::Error;

use optba::harness::compare;
use optba::objective::{Bump, ObjectiveKind};
use optba::prelude::*;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let space = ParamSpace::new(vec![ParamDomain::new("x", 0, 19)?, ParamDomain::new("y", 0, 19)?])?;
    let surface = MultimodalSettings {
        optimum: vec![15, 14],
        peak: 0.9,
        coeffs: vec![1e-3, 1e-3],
        bumps: vec![
            Bump { center: vec![3, 3], height: 0.2, width: 2.0 },
            Bump { center: vec![17, 2], height: 0.12, width: 1.5 },
            Bump { center: vec![2, 17], height: 0.12, width: 1.5 },
        ],
        verify: true,
    };

    let config = ExperimentConfig {
        space,
        objective: ObjectiveSpec::new(ObjectiveKind::SurrogateMultimodal(surface)),
        ba: BAConfig::standard().with_seed(7).with_stopping(StoppingCriteria::iterations(20)),
        baselines: vec![Method::RandomSearch],
        repeats: 100,
        budget_mode: BudgetMode::MatchTotalEvaluations,
        workers: 4,
    };
    let result = compare(&config)?;
    if let Some(o) = &result.oracle {
        println!("global optimum {} = {}", o.params, o.fitness);
    }
    print!("{}", result.summary.table());

    let rate = |m| result.summary.method(m).and_then(|s| s.success_rate).unwrap_or(0.0);
    assert!(rate(Method::Bees) > rate(Method::RandomSearch));
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
