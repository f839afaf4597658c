use std::time::Instant;

use rand::Rng as _;

use super::report::{CheckResult, ResourceReport};
use crate::block::{
    block_dephase, random_block_incoherent_kraus, random_block_incoherent_state, BlockMeasurement,
    MultipartiteBlockStructure,
};
use crate::conversion::{
    build_unitary, convert_forward, convert_with_ancillas, unitary_certification_suite, verify_embedding,
    ConversionPlan,
};
use crate::error::Result;
use crate::lbicc::run_reverse_protocol;
use crate::measures::{entanglement_sandwich, relative_entropy_block_coherence};
use crate::quantum::{quantum_relative_entropy, random_density_matrix, KrausChannel, OutcomePolicy, SubsystemLayout};
use crate::rng::{Rng, SeedTree};
use crate::tol;

/// Worst residual of one property across trials.
struct Tally {
    id: &'static str,
    tolerance: f64,
    worst: f64,
    failed_trial: Option<usize>,
}

impl Tally {
    fn new(id: &'static str, tolerance: f64) -> Self {
        Self { id, tolerance, worst: 0.0, failed_trial: None }
    }

    fn record(&mut self, trial: usize, residual: f64) {
        if (residual.is_nan() || residual > self.tolerance) && self.failed_trial.is_none() {
            self.failed_trial = Some(trial);
        }
        if residual > self.worst || residual.is_nan() {
            self.worst = residual;
        }
    }

    fn finish(self) -> CheckResult {
        let r = CheckResult::bounded(self.id, self.worst, self.tolerance);
        match self.failed_trial {
            Some(t) => r.require(false, &format!("first failure at trial {t}")),
            None => r,
        }
    }
}

fn random_ranks(rng: &mut Rng, blocks: usize, max_rank: usize) -> Vec<usize> {
    (0..blocks).map(|_| rng.random_range(1..=max_rank)).collect()
}

fn random_structure(rng: &mut Rng, parties: usize) -> Result<MultipartiteBlockStructure> {
    let labels: Vec<String> = (0..parties).map(|k| format!("S{k}")).collect();
    let ms = (0..parties)
        .map(|_| {
            let blocks = rng.random_range(1..=3);
            let ranks = random_ranks(rng, blocks, 2);
            if rng.random_bool(0.5) {
                BlockMeasurement::random_rotated(&ranks, rng)
            } else {
                BlockMeasurement::contiguous(&ranks)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let layout = SubsystemLayout::new(ms.iter().map(BlockMeasurement::local_dim).collect(), labels)?;
    MultipartiteBlockStructure::new(layout, ms)
}

fn random_plan(rng: &mut Rng) -> Result<ConversionPlan> {
    let d = rng.random_range(2..=3);
    if rng.random_bool(0.5) {
        let n = rng.random_range(1..=3);
        let ranks = random_ranks(rng, d, 2);
        ConversionPlan::fine(BlockMeasurement::contiguous(&ranks)?, n)
    } else {
        let n = rng.random_range(1..=2);
        ConversionPlan::coarse(BlockMeasurement::equal(d, 2)?, n, 2)
    }
}

/// Local BI channel on `A`, the controlled block shift, then a local BI
/// channel on the last ancilla.
fn random_entangling_bi_channel(plan: &ConversionPlan, rng: &mut Rng) -> Result<KrausChannel> {
    let structure = plan.structure();
    let layout = structure.layout();
    let local = |label: &str, rng: &mut Rng| -> Result<KrausChannel> {
        let single = structure.restrict(&[label])?;
        random_block_incoherent_kraus(&single, 2, rng)?.embed(layout, label)
    };
    let before = local("A", rng)?;
    let last = layout.labels().last().expect("non-empty").clone();
    let after = local(&last, rng)?;
    let u = KrausChannel::from_unitary(&build_unitary(plan)?);
    Ok(after.after(&u.after(&before)?)?.with_certification(structure))
}

/// Runs every property suite for `trials` random instances.
///
/// `tau_ent` replaces the entropy tolerance; an unrealistically small value
/// makes the entropic checks fail and shows the residual accounting.
pub fn self_test(trials: usize, seed: u64, tau_ent: Option<f64>) -> Result<ResourceReport> {
    let start = Instant::now();
    let tau = tau_ent.unwrap_or(tol::ENTROPY);
    let tree = SeedTree::new(seed);
    let mut report = ResourceReport::new("selftest", seed);

    let mut idempotent = Tally::new("dephasing_idempotent", tol::EQUAL);
    let mut trace = Tally::new("dephasing_trace_purity", tol::TRACE);
    let mut rel_ent = Tally::new("relative_entropy_nonnegative", tau);
    let mut closed = Tally::new("coherence_closed_form", tau);
    let mut ordering = Tally::new("sandwich_ordering", tau);
    let mut monotone_map = Tally::new("block_incoherent_map_bound", tau);
    let mut equality = Tally::new("forward_equalities", tau);
    let mut embedding = Tally::new("embedding", tol::STATE_IDENTITY);
    let mut round_trip = Tally::new("round_trip", tol::STATE_IDENTITY);
    let mut independence = Tally::new("outcome_independence", tol::STATE_IDENTITY);
    let mut monotonicity = Tally::new("transcript_monotonicity", tau);

    for t in 0..trials {
        let mut rng = tree.named("structure").child(t as u64).rng();
        let parties = rng.random_range(1..=3);
        let s = random_structure(&mut rng, parties)?;
        let dim = s.layout().total_dim();
        let rho = random_density_matrix(s.layout(), rng.random_range(1..=dim), rng.random())?;
        let d1 = block_dephase(&rho, &s)?;
        idempotent.record(t, block_dephase(&d1, &s)?.max_distance(&d1));
        let trace_gap = (crate::linalg::trace(d1.matrix()).re - 1.0).abs();
        trace.record(t, trace_gap.max(d1.purity() - rho.purity()));
        let sigma = random_density_matrix(s.layout(), rng.random_range(1..=dim), rng.random())?;
        let r = quantum_relative_entropy(&rho, &sigma)?;
        rel_ent.record(t, (-r).max(0.0));
        let c_r = relative_entropy_block_coherence(&rho, &s)?;
        closed.record(t, (quantum_relative_entropy(&rho, &d1)? - c_r).abs());
        let sw = entanglement_sandwich(&rho, &s)?;
        // C_R bounds the entanglement only when the dephased state is separable.
        ordering.record(t, if sw.upper_valid { (sw.lower - sw.upper).max(0.0) } else { 0.0 });

        let mut rng = tree.named("plan").child(t as u64).rng();
        let plan = random_plan(&mut rng)?;
        let a = SubsystemLayout::single("A", plan.system().local_dim());
        let rho_a = random_density_matrix(&a, rng.random_range(1..=a.total_dim()), rng.random())?;
        let c_a = relative_entropy_block_coherence(&rho_a, &plan.system_structure())?;

        let ch = random_entangling_bi_channel(&plan, &mut rng)?;
        let full_layout = plan.layout();
        let anc_labels: Vec<&str> = full_layout.labels()[1..].iter().map(String::as_str).collect();
        let anc = plan.structure().restrict(&anc_labels)?;
        let sigma = random_block_incoherent_state(&anc, 2, rng.random())?;
        let mapped = convert_with_ancillas(&rho_a, &sigma, &ch, &plan.structure())?;
        let msw = entanglement_sandwich(&mapped, &plan.structure())?;
        monotone_map.record(t, (msw.lower - c_a).max(0.0));

        let fwd = convert_forward(&rho_a, &plan)?;
        let rec = &fwd.record;
        let cert_gap = rec.sandwich.certified_value.map_or(f64::INFINITY, |v| (v - c_a).abs());
        equality.record(t, cert_gap.max((rec.c_r_output_bits - c_a).abs()));
        embedding.record(t, verify_embedding(&rho_a, &fwd.output, &plan)?.max_residual());
        let tr = run_reverse_protocol(&fwd.output, &plan, OutcomePolicy::All)?;
        let fin = tr.final_state().expect("stages stored").relabel(vec!["A"])?;
        round_trip.record(t, fin.max_distance(&rho_a));
        independence.record(t, tr.max_branch_distance().unwrap_or(0.0));
        monotonicity.record(t, tr.monotonicity_violation());
    }

    let mut unitary = Tally::new("unitary_certificate", crate::conversion::UNITARITY_BOUND);
    let mut k = 0;
    for d in [2, 3] {
        for r in [2, 3] {
            for n in [1, 2] {
                let plan = ConversionPlan::coarse(BlockMeasurement::equal(d, r)?, n, r)?;
                let cert = unitary_certification_suite(&plan, 10, tree.named("unitary").child(k).seed())?;
                let bi = if cert.block_incoherence.passed { 0.0 } else { f64::INFINITY };
                unitary.record(k as usize, cert.unitarity_residual.max(cert.permutation_residual).max(bi));
                k += 1;
            }
        }
    }

    for tally in [
        idempotent,
        trace,
        rel_ent,
        closed,
        ordering,
        monotone_map,
        equality,
        embedding,
        round_trip,
        independence,
        monotonicity,
        unitary,
    ] {
        report.push(tally.finish());
    }
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
