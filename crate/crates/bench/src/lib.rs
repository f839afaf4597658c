//! Fixtures shared by the benchmarks.

use blockres::block::BlockMeasurement;
use blockres::conversion::{convert_forward, ConversionPlan};
use blockres::harness::canonical_plan;
use blockres::quantum::{random_density_matrix, SubsystemLayout};
use blockres::DensityMatrix;

/// A plan with its random full-rank input and forward output.
pub struct Fixture {
    pub name: &'static str,
    pub plan: ConversionPlan,
    pub input: DensityMatrix,
    pub output: DensityMatrix,
}

fn fixture(name: &'static str, plan: ConversionPlan, seed: u64) -> Fixture {
    let dim = plan.system().local_dim();
    let input = random_density_matrix(&SubsystemLayout::single("A", dim), dim, seed).expect("valid rank");
    let output = convert_forward(&input, &plan).expect("plan accepts its own system").output;
    Fixture { name, plan, input, output }
}

/// Small to mid-sized plans: total dimension 64, 162 and 216.
pub fn fixtures() -> Vec<Fixture> {
    vec![
        fixture("coarse_d2_r2_n2", canonical_plan(), 1),
        fixture(
            "fine_ranks122_n3",
            ConversionPlan::fine(BlockMeasurement::contiguous(&[1, 2, 2]).expect("ranks"), 3).expect("plan"),
            2,
        ),
        fixture(
            "coarse_d3_r2_n2",
            ConversionPlan::coarse(BlockMeasurement::equal(3, 2).expect("ranks"), 2, 2).expect("plan"),
            3,
        ),
    ]
}
