//! Scenario files, reports, the three-party canonical example and the
//! self-test driver.

mod canonical;
mod report;
mod scenario;
mod selftest;

pub use canonical::{
    canonical_example, canonical_plan, canonical_with_state, literal_operator_residual, literal_operators,
    LiteralOperators,
};
pub use report::{run_plan, run_scenario, run_scenario_path, CheckResult, MeasureRow, ResourceReport, RunSpec};
pub use scenario::{uniform_superposition, CheckId, InputState, Scenario, SEED_ENV};
pub use selftest::self_test;
