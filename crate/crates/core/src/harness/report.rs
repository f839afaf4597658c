use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::scenario::{CheckId, Scenario};
use crate::conversion::{
    closed_form_output, convert_forward, unitary_certification_suite, verify_embedding, ConversionPlan, ForwardRecord,
    PlanSpec,
};
use crate::error::Result;
use crate::lbicc::{run_reverse_protocol, verify_reduced_coherence_bound, ProtocolTranscript};
use crate::measures::{relative_entropy_block_coherence, EntanglementSandwich};
use crate::quantum::{DensityMatrix, OutcomePolicy};
use crate::rng::SeedTree;
use crate::tol;

/// Pass/fail of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    /// Passes when `residual <= tolerance` (NaN fails).
    pub fn bounded(id: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self { id: id.into(), passed: residual <= tolerance, residual, tolerance, detail: None }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    /// Forces a failure regardless of the residual.
    pub fn require(mut self, condition: bool, why: &str) -> Self {
        if !condition {
            self.passed = false;
            self.detail = Some(why.to_string());
        }
        self
    }
}

/// One row of the measure table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub stage: String,
    pub measure: String,
    pub value_bits: f64,
}

/// Outcome of a scenario, the canonical example or the self-test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResourceReport {
    pub scenario: String,
    pub passed: bool,
    pub seed: u64,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSpec>,
    pub checks: Vec<CheckResult>,
    pub measures: Vec<MeasureRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<ForwardRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<ProtocolTranscript>,
    pub elapsed_ms: f64,
}

impl ResourceReport {
    pub fn new(scenario: impl Into<String>, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            passed: true,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            plan: None,
            checks: Vec::new(),
            measures: Vec::new(),
            forward: None,
            transcript: None,
            elapsed_ms: 0.0,
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn measure(&self, stage: &str, measure: &str) -> Option<f64> {
        self.measures.iter().find(|r| r.stage == stage && r.measure == measure).map(|r| r.value_bits)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The measure table as `stage,measure,value_bits` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.measures {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Copy with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self { elapsed_ms: 0.0, ..self.clone() }
    }

    fn push_stage(&mut self, stage: &str, c_r: f64, sandwich: Option<&EntanglementSandwich>) {
        let mut row = |measure: &str, value_bits: f64| {
            self.measures.push(MeasureRow { stage: stage.into(), measure: measure.into(), value_bits })
        };
        row("c_r", c_r);
        if let Some(s) = sandwich {
            row("e_lower", s.lower);
            row("e_upper", s.upper);
            if let Some(v) = s.certified_value {
                row("e_certified", v);
            }
        }
    }
}

/// Everything a single forward-and-reverse run needs.
#[derive(Debug, Clone)]
pub struct RunSpec<'a> {
    pub name: &'a str,
    pub plan: &'a ConversionPlan,
    pub input: &'a DensityMatrix,
    pub checks: &'a [CheckId],
    pub seed: u64,
    pub policy: OutcomePolicy,
    pub expected_bits: Option<f64>,
}

/// Loads, validates and runs a scenario.
pub fn run_scenario(scenario: &Scenario) -> Result<ResourceReport> {
    scenario.validate()?;
    let plan = scenario.plan()?;
    let input = scenario.input(&plan)?;
    let checks = scenario.checks();
    run_plan(&RunSpec {
        name: &scenario.name,
        plan: &plan,
        input: &input,
        checks: &checks,
        seed: scenario.seed,
        policy: scenario.outcome_policy,
        expected_bits: scenario.expected_bits,
    })
}

/// Runs a scenario file, honouring the seed override from the environment.
pub fn run_scenario_path(path: impl AsRef<std::path::Path>) -> Result<ResourceReport> {
    let mut scenario = Scenario::from_path(path)?;
    scenario.apply_seed_env()?;
    run_scenario(&scenario)
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Forward conversion, reverse protocol and the requested checks.
pub fn run_plan(spec: &RunSpec<'_>) -> Result<ResourceReport> {
    let start = Instant::now();
    let tree = SeedTree::new(spec.seed);
    let plan = spec.plan;
    let rho = spec.input.relabel(vec!["A"])?;
    let policy = match spec.policy {
        OutcomePolicy::Sample(s) => OutcomePolicy::Sample(tree.named("outcomes").child(s).seed()),
        p => p,
    };

    let c_r_input = relative_entropy_block_coherence(&rho, &plan.system_structure())?;
    let forward = convert_forward(&rho, plan)?;
    let transcript = run_reverse_protocol(&forward.output, plan, policy)?;

    let mut report = ResourceReport::new(spec.name, spec.seed);
    report.plan = Some(plan.to_spec());
    report.push_stage("input", c_r_input, None);
    report.push_stage("forward", forward.record.c_r_output_bits, Some(&forward.record.sandwich));
    for step in &transcript.steps {
        report.push_stage(&format!("after_{}", step.subsystem), step.c_r_bits, step.sandwich.as_ref());
    }

    let final_state = transcript.final_state().expect("stages stored").relabel(vec!["A"])?;
    for &id in spec.checks {
        let name = id.name();
        let result = match id {
            CheckId::ForwardClosedForm => {
                let closed = closed_form_output(&rho, plan)?;
                CheckResult::bounded(name, forward.output.max_distance(&closed), tol::STATE_IDENTITY)
            }
            CheckId::Embedding => {
                let emb = verify_embedding(&rho, &forward.output, plan)?;
                CheckResult::bounded(name, emb.max_residual(), tol::STATE_IDENTITY)
            }
            CheckId::SandwichCertified => {
                let s = &forward.record.sandwich;
                match s.certified_value {
                    Some(v) => CheckResult::bounded(name, (v - c_r_input).abs(), tol::CHAIN),
                    None => CheckResult::bounded(name, s.width(), tol::CERTIFY)
                        .require(false, "forward sandwich did not close"),
                }
            }
            CheckId::EqualityChain => {
                let mut values = vec![c_r_input];
                values.extend(transcript.chain_values());
                let open = std::iter::once(&transcript.initial.sandwich)
                    .chain(transcript.steps.iter().map(|s| &s.sandwich))
                    .flatten()
                    .any(|s| !s.certified);
                let detail = format!("values {values:?}");
                CheckResult::bounded(name, spread(&values), tol::CHAIN)
                    .with_detail(detail)
                    .require(!open, "an intermediate sandwich did not close")
            }
            CheckId::RoundTrip => CheckResult::bounded(name, final_state.max_distance(&rho), tol::STATE_IDENTITY),
            CheckId::OutcomeIndependence => {
                let all = if policy == OutcomePolicy::All {
                    transcript.max_branch_distance()
                } else {
                    run_reverse_protocol(&forward.output, plan, OutcomePolicy::All)?.max_branch_distance()
                };
                CheckResult::bounded(name, all.unwrap_or(0.0), tol::STATE_IDENTITY)
            }
            CheckId::Monotonicity => CheckResult::bounded(name, transcript.monotonicity_violation(), tol::ENTROPY),
            CheckId::ReducedCoherenceBound => {
                let cert = verify_reduced_coherence_bound(&transcript)?;
                CheckResult::bounded(name, (cert.max_reduced_bits - cert.bound_bits).max(0.0), tol::ENTROPY)
                    .with_detail(format!("bound {:.12} bits, final {:.12} bits", cert.bound_bits, cert.final_bits))
            }
            CheckId::UnitaryCertificate => {
                let cert = unitary_certification_suite(plan, 20, tree.named("unitary").seed())?;
                let residual = cert.unitarity_residual.max(cert.permutation_residual);
                CheckResult::bounded(name, residual, crate::conversion::UNITARITY_BOUND)
                    .require(cert.block_incoherence.passed, "unitary produced block coherence from an incoherent state")
            }
            CheckId::ExpectedValue => match spec.expected_bits {
                Some(e) => CheckResult::bounded(name, (c_r_input - e).abs(), tol::STATE_IDENTITY),
                None => {
                    CheckResult::bounded(name, f64::NAN, tol::STATE_IDENTITY).require(false, "no expected value given")
                }
            },
        };
        report.push(result);
    }
    report.forward = Some(forward.record);
    report.transcript = Some(transcript);
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
