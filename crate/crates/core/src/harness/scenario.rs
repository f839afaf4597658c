use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::block::{BlockMeasurement, MeasurementSpec};
use crate::conversion::{ConversionPlan, PlanSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, CVector};
use crate::quantum::{random_density_matrix, DensityMatrix, OutcomePolicy, SubsystemLayout};
use crate::rng::SeedTree;
use crate::serial::{matrix_from_json, JsonMatrix};

/// Environment variable that replaces the scenario seed.
pub const SEED_ENV: &str = "BLOCKRES_SEED";

/// Named checks a scenario can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    /// Forward output equals the closed-form correlated state.
    ForwardClosedForm,
    /// Matrix-element and entropy embedding residuals.
    Embedding,
    /// Sandwich on the forward output closes at `C_R(ρ_A)`.
    SandwichCertified,
    /// `C_R(ρ_A)`, every stage's entanglement and the final `C_R` agree.
    EqualityChain,
    /// Reverse protocol returns `ρ_A`.
    RoundTrip,
    /// Every outcome branch gives the same corrected state.
    OutcomeIndependence,
    /// `C_R` never increases along the transcript.
    Monotonicity,
    /// Reduced-state block coherence stays below the initial entanglement.
    ReducedCoherenceBound,
    /// Unitarity, projector permutation and block-incoherence of the unitary.
    UnitaryCertificate,
    /// `C_R(ρ_A)` equals `expected_bits`.
    ExpectedValue,
}

impl CheckId {
    pub const ALL: [CheckId; 10] = [
        CheckId::ForwardClosedForm,
        CheckId::Embedding,
        CheckId::SandwichCertified,
        CheckId::EqualityChain,
        CheckId::RoundTrip,
        CheckId::OutcomeIndependence,
        CheckId::Monotonicity,
        CheckId::ReducedCoherenceBound,
        CheckId::UnitaryCertificate,
        CheckId::ExpectedValue,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }
}

/// Source of the system state `ρ_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputState {
    /// Row-major `[re, im]` pairs.
    Explicit(JsonMatrix),
    /// Ginibre state of the given rank; the seed defaults to one derived from the scenario seed.
    Random {
        rank: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Uniform superposition of the first basis vector of each listed block.
    PureSuperposition(Vec<usize>),
}

fn default_policy() -> OutcomePolicy {
    OutcomePolicy::All
}

/// A forward-and-reverse run with the checks to evaluate on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub plan: PlanSpec,
    /// Explicit block bases for `A`; contiguous computational blocks otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_structure: Option<MeasurementSpec>,
    pub input_state: InputState,
    /// Every check runs when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckId>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub outcome_policy: OutcomePolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_bits: Option<f64>,
}

fn at(path: &str, message: impl ToString) -> Error {
    Error::Scenario { path: path.to_string(), message: message.to_string() }
}

impl Scenario {
    /// Parses JSON, reporting schema errors with their field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            at(&path, e.into_inner())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Replaces the seed with `BLOCKRES_SEED` when that variable holds an integer.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| at(SEED_ENV, format!("`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn checks(&self) -> Vec<CheckId> {
        let mut ids = self.checks.clone().unwrap_or_else(|| {
            CheckId::ALL
                .iter()
                .copied()
                .filter(|c| *c != CheckId::ExpectedValue || self.expected_bits.is_some())
                .collect()
        });
        ids.sort();
        ids.dedup();
        ids
    }

    /// Checks plan, structure and state dimensions without running anything.
    pub fn validate(&self) -> Result<()> {
        let plan = self.plan()?;
        let dim = plan.system().local_dim();
        match &self.input_state {
            InputState::Explicit(rows) => {
                let m = matrix_from_json(rows).map_err(|e| at("input_state.explicit", e))?;
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(at(
                        "input_state.explicit",
                        format!("matrix is {}x{}, system dimension is {dim}", m.nrows(), m.ncols()),
                    ));
                }
            }
            InputState::Random { rank, .. } => {
                if *rank == 0 || *rank > dim {
                    return Err(at("input_state.random.rank", format!("rank {rank} out of range 1..={dim}")));
                }
            }
            InputState::PureSuperposition(blocks) => {
                let mut seen = vec![false; plan.block_count()];
                if blocks.is_empty() {
                    return Err(at("input_state.pure_superposition", "no blocks listed"));
                }
                for (k, &b) in blocks.iter().enumerate() {
                    if b >= seen.len() || std::mem::replace(&mut seen[b], true) {
                        return Err(at(
                            &format!("input_state.pure_superposition[{k}]"),
                            format!("block {b} is out of range or repeated"),
                        ));
                    }
                }
            }
        }
        if self.checks.as_ref().is_some_and(|c| c.contains(&CheckId::ExpectedValue)) && self.expected_bits.is_none() {
            return Err(at("expected_bits", "required by the expected_value check"));
        }
        Ok(())
    }

    pub fn plan(&self) -> Result<ConversionPlan> {
        let system = self
            .system_structure
            .as_ref()
            .map(|s| BlockMeasurement::from_spec(s).map_err(|e| at("system_structure", e)))
            .transpose()?;
        ConversionPlan::from_spec(&self.plan, system)
    }

    /// The system state `ρ_A` on a subsystem labelled `A`.
    pub fn input(&self, plan: &ConversionPlan) -> Result<DensityMatrix> {
        let layout = SubsystemLayout::single("A", plan.system().local_dim());
        match &self.input_state {
            InputState::Explicit(rows) => {
                let m = matrix_from_json(rows)?;
                DensityMatrix::new(layout, m).map_err(|e| at("input_state.explicit", e))
            }
            InputState::Random { rank, seed } => {
                let seed = seed.unwrap_or_else(|| SeedTree::new(self.seed).named("input_state").seed());
                random_density_matrix(&layout, *rank, seed)
            }
            InputState::PureSuperposition(blocks) => Ok(uniform_superposition(plan.system(), blocks)),
        }
    }
}

/// `Σ_{i∈blocks} |0^(i)> / √b` as a density matrix on `A`.
pub fn uniform_superposition(m: &BlockMeasurement, blocks: &[usize]) -> DensityMatrix {
    let norm = c(1.0 / (blocks.len() as f64).sqrt(), 0.0);
    let psi = blocks.iter().fold(CVector::zeros(m.local_dim()), |acc, &b| acc + m.basis_vector(b, 0) * norm);
    DensityMatrix::pure(SubsystemLayout::single("A", m.local_dim()), &psi).expect("unit vector")
}
