//! Reverse protocol: local block-incoherent measurements with classical
//! communication (LBICC) that hand the block coherence stored in the ancillas
//! back to the system.
//!
//! Each step measures one ancilla with `K_l`, sends `l` to the next party,
//! which applies the block-phase correction `U_l = Σ_k e^{iφ_k^l} P_k`, and
//! discards the measured ancilla. Phases are the Fourier family
//! `φ_k^l = 2πkl/d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::block::{BlockMeasurement, MultipartiteBlockStructure};
use crate::conversion::{AncillaMode, ConversionPlan};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::measures::{entanglement_sandwich, relative_entropy_block_coherence, EntanglementSandwich};
use crate::quantum::{
    apply_unitary, measure_and_collapse, partial_trace, DensityMatrix, KrausChannel, OutcomePolicy, SubsystemLayout,
    UnitaryOperator,
};
use crate::rng::SeedTree;
use crate::serial::{matrix_digest, matrix_to_json, JsonMatrix};
use crate::tol;

const LOCAL: &str = "local";

pub fn fourier_phase(k: usize, l: usize, d: usize) -> f64 {
    2.0 * PI * ((k * l) % d) as f64 / d as f64
}

fn phase(theta: f64) -> num_complex::Complex64 {
    c(theta.cos(), theta.sin())
}

fn require_outcomes(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidMeasurement(format!("at least two outcomes are required, got d = {d}")));
    }
    Ok(())
}

/// `K_l = (1/√d) Σ_k e^{−iφ_k^l} |l><k|` for `l = 0 … d−1`.
pub fn build_fine_measurement(d: usize) -> Result<KrausChannel> {
    require_outcomes(d)?;
    let norm = 1.0 / (d as f64).sqrt();
    let ops = (0..d)
        .map(|l| {
            let mut k_l = CMatrix::zeros(d, d);
            for k in 0..d {
                k_l[(l, k)] = phase(-fourier_phase(k, l, d)) * norm;
            }
            k_l
        })
        .collect();
    let m = BlockMeasurement::equal(d, 1)?;
    Ok(KrausChannel::new(SubsystemLayout::single(LOCAL, d), ops)?
        .with_certification(MultipartiteBlockStructure::single(LOCAL, m)))
}

/// `U_l = Σ_k e^{iφ_k^l} |k><k|`.
pub fn build_fine_feedback(d: usize, l: usize) -> Result<UnitaryOperator> {
    require_outcomes(d)?;
    block_phase_feedback(&BlockMeasurement::equal(d, 1)?, l)
}

/// `K_j = (1/√d) Σ_k e^{−iφ_k^j} P_j M_jk P_k` with `M_jk = Σ_l |l^(j)><l^(k)|`.
pub fn build_coarse_measurement(m: &BlockMeasurement) -> Result<KrausChannel> {
    let d = m.block_count();
    require_outcomes(d)?;
    let r = m.require_equal_rank()?;
    let norm = 1.0 / (d as f64).sqrt();
    let ops = (0..d)
        .map(|j| {
            let mut k_j = CMatrix::zeros(m.local_dim(), m.local_dim());
            for k in 0..d {
                let w = phase(-fourier_phase(k, j, d)) * norm;
                for l in 0..r {
                    k_j += linalg::outer(m.basis_vector(j, l), m.basis_vector(k, l)) * w;
                }
            }
            k_j
        })
        .collect();
    Ok(KrausChannel::new(SubsystemLayout::single(LOCAL, m.local_dim()), ops)?
        .with_certification(MultipartiteBlockStructure::single(LOCAL, m.clone())))
}

/// `U_j = Σ_k e^{iφ_k^j} P_k`; requires equal block ranks.
pub fn build_coarse_feedback(m: &BlockMeasurement, j: usize) -> Result<UnitaryOperator> {
    m.require_equal_rank()?;
    block_phase_feedback(m, j)
}

/// `Σ_k e^{iφ_k^l} P_k` for blocks of any rank.
pub fn block_phase_feedback(m: &BlockMeasurement, l: usize) -> Result<UnitaryOperator> {
    detuned_feedback(m, l, 0.0)
}

/// `Σ_k e^{i(φ_k^l + klδ)} P_k`: still block-diagonal, no longer matched to the measurement.
pub fn detuned_feedback(m: &BlockMeasurement, l: usize, delta: f64) -> Result<UnitaryOperator> {
    let d = m.block_count();
    if l >= d {
        return Err(Error::OutcomeOutOfRange { index: l, count: d });
    }
    let u = (0..d).fold(CMatrix::zeros(m.local_dim(), m.local_dim()), |acc, k| {
        acc + m.projector(k) * phase(fourier_phase(k, l, d) + (k * l) as f64 * delta)
    });
    UnitaryOperator::new(SubsystemLayout::single(LOCAL, m.local_dim()), u)
}

/// Measurement resolution used by a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Rank-1 computational blocks on the measured subsystem.
    Fine,
    /// Equal-rank blocks; individual vectors inside a block are never resolved.
    Coarse,
}

impl From<AncillaMode> for Variant {
    fn from(mode: AncillaMode) -> Self {
        match mode {
            AncillaMode::Fine => Variant::Fine,
            AncillaMode::Coarse { .. } => Variant::Coarse,
        }
    }
}

/// Correction applied by the receiving party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "delta")]
pub enum FeedbackRule {
    /// `U_l` matched to the measurement.
    Optimal,
    /// No correction.
    Skip,
    /// [`detuned_feedback`] with the given offset.
    Detuned(f64),
}

/// Probability of one measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub index: usize,
    pub probability: f64,
}

/// One measurement-and-feedback step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub subsystem: String,
    pub feedback_subsystem: String,
    pub channel: String,
    /// Reported outcome; `None` when every branch was kept.
    pub outcome: Option<usize>,
    pub probability: Option<f64>,
    pub outcomes: Vec<OutcomeRecord>,
    /// Largest distance between corrected branch states, under the `all` policy.
    pub branch_distance: Option<f64>,
    pub c_r_bits: f64,
    pub sandwich: Option<EntanglementSandwich>,
    pub state_digest: String,
}

fn measurement_for(m: &BlockMeasurement, variant: Variant) -> Result<(KrausChannel, String)> {
    match variant {
        Variant::Fine => {
            if !m.is_computational() || m.equal_rank() != Some(1) {
                return Err(Error::InvalidMeasurement("fine measurement needs rank-1 computational blocks".into()));
            }
            Ok((build_fine_measurement(m.block_count())?, format!("fine_fourier_d{}", m.block_count())))
        }
        Variant::Coarse => {
            let r = m.require_equal_rank()?;
            Ok((build_coarse_measurement(m)?, format!("coarse_fourier_d{}_r{}", m.block_count(), r)))
        }
    }
}

fn feedback_for(m: &BlockMeasurement, l: usize, rule: FeedbackRule) -> Result<Option<UnitaryOperator>> {
    Ok(match rule {
        FeedbackRule::Optimal => Some(block_phase_feedback(m, l)?),
        FeedbackRule::Skip => None,
        FeedbackRule::Detuned(delta) => Some(detuned_feedback(m, l, delta)?),
    })
}

/// Measures `measured`, corrects `feedback`, traces out `measured`.
///
/// Returns the remaining state and its block structure.
pub fn lbicc_step(
    state: &DensityMatrix,
    structure: &MultipartiteBlockStructure,
    measured: &str,
    feedback: &str,
    variant: Variant,
    policy: OutcomePolicy,
) -> Result<(DensityMatrix, MultipartiteBlockStructure, StepRecord)> {
    lbicc_step_with(state, structure, measured, feedback, variant, policy, FeedbackRule::Optimal)
}

pub fn lbicc_step_with(
    state: &DensityMatrix,
    structure: &MultipartiteBlockStructure,
    measured: &str,
    feedback: &str,
    variant: Variant,
    policy: OutcomePolicy,
    rule: FeedbackRule,
) -> Result<(DensityMatrix, MultipartiteBlockStructure, StepRecord)> {
    if measured == feedback {
        return Err(Error::InvalidMeasurement(format!("measured and feedback subsystem are both {measured}")));
    }
    if state.layout() != structure.layout() {
        return Err(Error::LayoutMismatch {
            expected: structure.layout().to_string(),
            found: state.layout().to_string(),
        });
    }
    let layout = state.layout();
    let m_meas = structure.measurement(measured)?;
    let m_fb = structure.measurement(feedback)?;
    if m_fb.block_count() != m_meas.block_count() {
        return Err(Error::InvalidMeasurement(format!(
            "{measured} has {} blocks, {feedback} has {}",
            m_meas.block_count(),
            m_fb.block_count()
        )));
    }
    let (local, channel) = measurement_for(m_meas, variant)?;
    let full = local.embed(layout, measured)?;
    let branches = measure_and_collapse(state, &full, policy)?;

    let keep: Vec<&str> = layout.labels().iter().map(String::as_str).filter(|l| *l != measured).collect();
    let mut corrected = Vec::new();
    for b in &branches {
        let Some(post) = &b.post_state else { continue };
        let post = match feedback_for(m_fb, b.index, rule)? {
            Some(u) => apply_unitary(post, &UnitaryOperator::local(layout, feedback, &u)?)?,
            None => post.clone(),
        };
        corrected.push((b.index, b.probability, partial_trace(&post, &keep)?));
    }

    let all = policy == OutcomePolicy::All;
    let branch_distance = all.then(|| {
        let mut worst: f64 = 0.0;
        for (a, (_, _, x)) in corrected.iter().enumerate() {
            for (_, _, y) in &corrected[a + 1..] {
                worst = worst.max(x.max_distance(y));
            }
        }
        worst
    });
    let next = if all {
        // unconditional output: Σ_l p_l ρ_l
        let total: f64 = corrected.iter().map(|(_, p, _)| p).sum();
        let dim = corrected[0].2.dim();
        let mix =
            corrected.iter().fold(CMatrix::zeros(dim, dim), |acc, (_, p, s)| acc + s.matrix() * c(p / total, 0.0));
        DensityMatrix::from_parts(corrected[0].2.layout().clone(), mix)
    } else {
        corrected[0].2.clone()
    };
    let next_structure = structure.restrict(&keep)?;
    let c_r_bits = relative_entropy_block_coherence(&next, &next_structure)?;
    let sandwich = if keep.len() >= 2 { Some(entanglement_sandwich(&next, &next_structure)?) } else { None };
    let record = StepRecord {
        subsystem: measured.to_string(),
        feedback_subsystem: feedback.to_string(),
        channel,
        outcome: (!all).then(|| corrected[0].0),
        probability: (!all).then(|| corrected[0].1),
        outcomes: branches.iter().map(|b| OutcomeRecord { index: b.index, probability: b.probability }).collect(),
        branch_distance,
        c_r_bits,
        sandwich,
        state_digest: matrix_digest(next.matrix()),
    };
    Ok((next, next_structure, record))
}

/// Options for [`run_reverse_protocol_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseOptions {
    pub policy: OutcomePolicy,
    /// Ancilla measurement order; defaults to `Bn, …, B1`.
    pub order: Option<Vec<String>>,
    pub rule: FeedbackRule,
}

impl Default for ReverseOptions {
    fn default() -> Self {
        Self { policy: OutcomePolicy::All, order: None, rule: FeedbackRule::Optimal }
    }
}

/// Block coherence and entanglement of the state fed into the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialRecord {
    pub c_r_bits: f64,
    pub sandwich: Option<EntanglementSandwich>,
    pub state_digest: String,
}

/// Full record of a reverse run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub initial: InitialRecord,
    pub steps: Vec<StepRecord>,
    pub final_state: JsonMatrix,
    #[serde(skip)]
    stages: Vec<(DensityMatrix, MultipartiteBlockStructure)>,
}

impl ProtocolTranscript {
    /// States and structures after 0, 1, … steps.
    pub fn stages(&self) -> &[(DensityMatrix, MultipartiteBlockStructure)] {
        &self.stages
    }

    pub fn initial_state(&self) -> Option<&DensityMatrix> {
        self.stages.first().map(|s| &s.0)
    }

    pub fn final_state(&self) -> Option<&DensityMatrix> {
        self.stages.last().map(|s| &s.0)
    }

    /// C_R of the full remaining state at each stage.
    pub fn c_r_values(&self) -> Vec<f64> {
        std::iter::once(self.initial.c_r_bits).chain(self.steps.iter().map(|s| s.c_r_bits)).collect()
    }

    /// Entanglement value per multi-party stage, then C_R of the last stage.
    pub fn chain_values(&self) -> Vec<f64> {
        let sandwiches = std::iter::once(&self.initial.sandwich).chain(self.steps.iter().map(|s| &s.sandwich));
        sandwiches
            .zip(self.c_r_values())
            .map(|(s, c)| s.as_ref().map_or(c, EntanglementSandwich::value_or_upper))
            .collect()
    }

    /// Largest increase of C_R between consecutive stages (0 when monotone).
    pub fn monotonicity_violation(&self) -> f64 {
        self.c_r_values().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Largest outcome-independence distance over steps that kept every branch.
    pub fn max_branch_distance(&self) -> Option<f64> {
        self.steps.iter().filter_map(|s| s.branch_distance).reduce(f64::max)
    }

    /// Whether every kept measurement's probabilities sum to one.
    pub fn probability_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| (s.outcomes.iter().map(|o| o.probability).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Runs the optimal protocol on a forward output of `plan`.
pub fn run_reverse_protocol(
    output_state: &DensityMatrix,
    plan: &ConversionPlan,
    policy: OutcomePolicy,
) -> Result<ProtocolTranscript> {
    run_reverse_protocol_with(output_state, plan, &ReverseOptions { policy, ..Default::default() })
}

pub fn run_reverse_protocol_with(
    output_state: &DensityMatrix,
    plan: &ConversionPlan,
    options: &ReverseOptions,
) -> Result<ProtocolTranscript> {
    let structure = plan.structure();
    if output_state.layout() != structure.layout() {
        return Err(Error::PlanMismatch(format!(
            "state layout {} does not match plan layout {}",
            output_state.layout(),
            structure.layout()
        )));
    }
    let n = plan.ancilla_count();
    let order: Vec<String> = match &options.order {
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort();
            let mut expected: Vec<String> = (1..=n).map(|k| format!("B{k}")).collect();
            expected.sort();
            if sorted != expected {
                return Err(Error::PlanMismatch(format!("order {o:?} is not a permutation of the ancillas")));
            }
            o.clone()
        }
        None => (1..=n).rev().map(|k| format!("B{k}")).collect(),
    };
    let variant = Variant::from(plan.mode());
    let seeds = match options.policy {
        OutcomePolicy::Sample(s) => Some(SeedTree::new(s)),
        _ => None,
    };

    let initial = InitialRecord {
        c_r_bits: relative_entropy_block_coherence(output_state, &structure)?,
        sandwich: Some(entanglement_sandwich(output_state, &structure)?),
        state_digest: matrix_digest(output_state.matrix()),
    };
    let mut stages = vec![(output_state.clone(), structure)];
    let mut steps = Vec::with_capacity(n);
    for (t, measured) in order.iter().enumerate() {
        let feedback = order.get(t + 1).map_or("A", String::as_str);
        let policy = match (&seeds, options.policy) {
            (Some(tree), _) => OutcomePolicy::Sample(tree.child(t as u64).seed()),
            (None, p) => p,
        };
        let (state, structure) = stages.last().expect("non-empty");
        let (next, next_structure, record) =
            lbicc_step_with(state, structure, measured, feedback, variant, policy, options.rule)?;
        stages.push((next, next_structure));
        steps.push(record);
    }
    let final_state = matrix_to_json(stages.last().expect("non-empty").0.matrix());
    Ok(ProtocolTranscript { initial, steps, final_state, stages })
}

/// Check that block coherence of every reduced stage state stays below the
/// entanglement of the protocol's input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoherenceCertificate {
    /// Certified entanglement of the initial state, or its upper bound.
    pub bound_bits: f64,
    /// Largest C_R over all stages and all reductions of each stage.
    pub max_reduced_bits: f64,
    /// C_R of the final stage.
    pub final_bits: f64,
    pub satisfied: bool,
    /// `bound − final` is within the saturation tolerance.
    pub saturated: bool,
}

/// Tolerance for calling the reduced-coherence bound saturated.
pub const SATURATION: f64 = 1e-8;

/// Evaluates C_R on every reduction of every stage against the initial bound.
pub fn verify_reduced_coherence_bound(transcript: &ProtocolTranscript) -> Result<ReducedCoherenceCertificate> {
    let (first, first_structure) =
        transcript.stages().first().ok_or(Error::EmptyInput("transcript without stored states"))?;
    let bound_bits = entanglement_sandwich(first, first_structure)?.value_or_upper();
    let mut max_reduced_bits: f64 = 0.0;
    for (state, structure) in transcript.stages() {
        let labels = state.layout().labels();
        for mask in 1u32..(1 << labels.len()) {
            let keep: Vec<&str> =
                (0..labels.len()).filter(|i| mask >> i & 1 == 1).map(|i| labels[i].as_str()).collect();
            let reduced = partial_trace(state, &keep)?;
            let value = relative_entropy_block_coherence(&reduced, &structure.restrict(&keep)?)?;
            max_reduced_bits = max_reduced_bits.max(value);
        }
    }
    let (last, last_structure) = transcript.stages().last().expect("non-empty");
    let final_bits = relative_entropy_block_coherence(last, last_structure)?;
    Ok(ReducedCoherenceCertificate {
        bound_bits,
        max_reduced_bits,
        final_bits,
        satisfied: max_reduced_bits <= bound_bits + tol::ENTROPY,
        saturated: (bound_bits - final_bits).abs() < SATURATION,
    })
}
