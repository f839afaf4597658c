//! The three-party four-level example: `d = 2` blocks of rank 2 on `A`, two
//! ancillas `B`, `C` with the same structure, starting in `|0><0|`.

use super::report::{run_plan, CheckResult, ResourceReport, RunSpec};
use super::scenario::CheckId;
use crate::block::BlockMeasurement;
use crate::conversion::{transfer_maps, ConversionPlan};
use crate::error::Result;
use crate::lbicc::{build_coarse_feedback, build_coarse_measurement};
use crate::linalg::{self, c, CMatrix};
use crate::quantum::{random_density_matrix, DensityMatrix, OutcomePolicy, SubsystemLayout};
use crate::rng::SeedTree;

pub fn canonical_plan() -> ConversionPlan {
    ConversionPlan::coarse(BlockMeasurement::equal(2, 2).expect("valid"), 2, 2).expect("equal ranks")
}

fn ket_bra(pairs: &[(usize, usize)]) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for &(r, s) in pairs {
        m[(r, s)] = c(1.0, 0.0);
    }
    m
}

/// Hand-written operators of the example: `C_ij`, `K_0`, `K_1`, `U_0`, `U_1`.
pub struct LiteralOperators {
    pub transfer: [[CMatrix; 2]; 2],
    pub measurement: [CMatrix; 2],
    pub feedback: [CMatrix; 2],
}

pub fn literal_operators() -> LiteralOperators {
    let p0 = ket_bra(&[(0, 0), (1, 1)]);
    let p1 = ket_bra(&[(2, 2), (3, 3)]);
    let m00 = ket_bra(&[(0, 0), (1, 1)]);
    let m01 = ket_bra(&[(0, 2), (1, 3)]);
    let m10 = ket_bra(&[(2, 0), (3, 1)]);
    let m11 = ket_bra(&[(2, 2), (3, 3)]);
    let h = c(0.5f64.sqrt(), 0.0);
    let k0 = (&p0 * &m00 * &p0 + &p0 * &m01 * &p1) * h;
    let k1 = (&p1 * &m10 * &p0 - &p1 * &m11 * &p1) * h;
    LiteralOperators {
        transfer: [
            [ket_bra(&[(0, 0), (1, 1)]), ket_bra(&[(2, 2), (3, 3)])],
            [ket_bra(&[(2, 0), (3, 1)]), ket_bra(&[(0, 2), (1, 3)])],
        ],
        measurement: [k0, k1],
        feedback: [CMatrix::identity(4, 4), &p0 - &p1],
    }
}

/// Largest entrywise gap between the built and hand-written operators.
pub fn literal_operator_residual() -> Result<f64> {
    let plan = canonical_plan();
    let lit = literal_operators();
    let maps = transfer_maps(&plan);
    let m = plan.ancilla_measurement();
    let ks = build_coarse_measurement(&m)?;
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max(linalg::max_abs_diff(&maps[i][j], &lit.transfer[i][j]));
        }
        worst = worst.max(linalg::max_abs_diff(&ks.operators()[i], &lit.measurement[i]));
        worst = worst.max(linalg::max_abs_diff(build_coarse_feedback(&m, i)?.matrix(), &lit.feedback[i]));
    }
    Ok(worst)
}

/// Runs the full cycle on `rho_a` with every check plus the literal-operator comparison.
pub fn canonical_with_state(rho_a: &DensityMatrix, seed: u64) -> Result<ResourceReport> {
    let plan = canonical_plan();
    let checks: Vec<CheckId> = CheckId::ALL.into_iter().filter(|c| *c != CheckId::ExpectedValue).collect();
    let mut report = run_plan(&RunSpec {
        name: "three_four_level_parties",
        plan: &plan,
        input: rho_a,
        checks: &checks,
        seed,
        policy: OutcomePolicy::All,
        expected_bits: None,
    })?;
    report.push(CheckResult::bounded("literal_operators", literal_operator_residual()?, 1e-15));
    Ok(report)
}

/// Full-rank random `ρ_A` drawn from `seed`.
pub fn canonical_example(seed: u64) -> Result<ResourceReport> {
    let rho =
        random_density_matrix(&SubsystemLayout::single("A", 4), 4, SeedTree::new(seed).named("input_state").seed())?;
    canonical_with_state(&rho, seed)
}
