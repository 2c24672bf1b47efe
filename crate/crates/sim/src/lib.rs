//! Synthetic worlds and a deterministic crowd simulator that drives the
//! route service end to end.

pub mod behavior;
pub mod error;
pub mod report;
pub mod scenario;
pub mod world;

pub use behavior::{Accuracy, BehaviorModel};
pub use error::SimError;
pub use report::{Outcome, RequestRow, ScenarioReport, Summary};
pub use scenario::{run_scenario, ScenarioRun};
pub use world::{generate_world, Sizes, World};
