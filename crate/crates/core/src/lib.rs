//! Bees Algorithm search over integer hyperparameter grids.
//!
//! The crate is organised around five pieces:
//!
//! - [`space`]: integer parameter domains, uniform sampling and `ngh`-step neighbourhoods.
//! - [`engine`]: the Bees Algorithm loop (site selection, elite/non-elite recruitment,
//!   global scouting, stopping) and the [`engine::RunTrace`] it produces.
//! - [`objective`]: fitness functions, including planted-optimum surrogate surfaces,
//!   integer Rastrigin, memoisation, seeded noise and an external-process evaluator
//!   speaking a newline-delimited JSON protocol.
//! - [`harness`]: random and exhaustive grid baselines and paired-seed comparisons.
//! - [`cli`]: the config file format and the `run` / `bench` / `validate` commands.
//!
//! ```
//! use optba::prelude::*;
//!
//! let space = ParamSpace::new(vec![
//!     ParamDomain::new("epochs", 1, 100)?,
//!     ParamDomain::new("units", 16, 256)?,
//! ])?;
//! let objective = Surrogate::unimodal(&space, UnimodalSettings::default())?;
//! let mut config = BAConfig::standard();
//! config.stopping.target_fitness = Some(0.9963);
//! let trace = optba::engine::run(&space, &config, &objective)?;
//! assert!(trace.best.fitness <= 0.9963);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cli;
pub mod engine;
pub mod harness;
pub mod objective;
pub mod rng;
pub mod space;

pub mod prelude {
    pub use crate::engine::{BAConfig, Candidate, RunOptions, RunTrace, StopReason, StoppingCriteria};
    pub use crate::harness::{BudgetMode, ExperimentConfig, Method};
    pub use crate::objective::{
        MultimodalSettings, Objective, ObjectiveError, ObjectiveSpec, Surrogate, UnimodalSettings,
    };
    pub use crate::space::{ParamDomain, ParamSpace, ParamVector, SpaceError};
}
