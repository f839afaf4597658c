//! Library results compared against the reference computations in `common`.

mod common;

use blockres::block::{
    block_dephase, dephasing_channel, is_block_diagonal, random_block_incoherent_state,
    verify_block_incoherent_channel, BlockMeasurement, MultipartiteBlockStructure,
};
use blockres::conversion::{
    build_um_coarse, build_um_fine, convert_forward, transfer_maps, unitary_certification_suite, verify_embedding,
    ConversionPlan,
};
use blockres::harness::{canonical_plan, literal_operators, uniform_superposition};
use blockres::lbicc::{
    build_coarse_measurement, build_fine_feedback, build_fine_measurement, lbicc_step, run_reverse_protocol,
    run_reverse_protocol_with, verify_reduced_coherence_bound, FeedbackRule, ReverseOptions, Variant,
};
use blockres::linalg::{self, c, CMatrix};
use blockres::measures::{entanglement_lower_bound, entanglement_sandwich, relative_entropy_block_coherence};
use blockres::quantum::{
    apply_channel, apply_unitary, partial_trace, quantum_relative_entropy, random_density_matrix, random_unitary,
    tensor_product, von_neumann_entropy, Bipartition, DensityMatrix, KrausChannel, OutcomePolicy, SubsystemLayout,
    UnitaryOperator,
};
use blockres::rng::rng_from_seed;
use common::*;

fn single(dim: usize) -> SubsystemLayout {
    SubsystemLayout::single("A", dim)
}

fn ket(dim: usize, k: usize) -> CMatrix {
    let mut v = CMatrix::zeros(dim, 1);
    v[(k, 0)] = c(1.0, 0.0);
    v
}

fn proj(dim: usize, ks: &[usize]) -> CMatrix {
    ks.iter().fold(CMatrix::zeros(dim, dim), |acc, &k| acc + &ket(dim, k) * ket(dim, k).adjoint())
}

fn c_r_oracle(rho: &CMatrix, projectors: &[Vec<CMatrix>]) -> f64 {
    entropy_oracle(&dephase_oracle(rho, projectors)) - entropy_oracle(rho)
}

fn contiguous_projectors(ranks: &[usize]) -> Vec<CMatrix> {
    let dim: usize = ranks.iter().sum();
    let mut start = 0;
    ranks
        .iter()
        .map(|&r| {
            let p = proj(dim, &(start..start + r).collect::<Vec<_>>());
            start += r;
            p
        })
        .collect()
}

/// `Σ_{ij} P_i ρ P_j ⊗ |t_i…><t_j…|` assembled entrywise.
fn correlated_oracle(rho: &CMatrix, ps: &[CMatrix], tags: &[CMatrix], n: usize) -> CMatrix {
    let mut out: Option<CMatrix> = None;
    for i in 0..ps.len() {
        for j in 0..ps.len() {
            let ti = (1..n).fold(tags[i].clone(), |acc, _| kron_oracle(&acc, &tags[i]));
            let tj = (1..n).fold(tags[j].clone(), |acc, _| kron_oracle(&acc, &tags[j]));
            let term = kron_oracle(&(&ps[i] * rho * &ps[j]), &(&ti * tj.adjoint()));
            out = Some(match out {
                Some(o) => o + term,
                None => term,
            });
        }
    }
    out.unwrap()
}

#[test]
fn kronecker_matches_entrywise() {
    let a = random_density_matrix(&single(2), 2, 1).unwrap();
    let b = random_density_matrix(&SubsystemLayout::single("B", 3), 3, 2).unwrap();
    let t = tensor_product(&[a.clone(), b.clone()]).unwrap();
    assert!(linalg::max_abs_diff(t.matrix(), &kron_oracle(a.matrix(), b.matrix())) < 1e-15);
}

#[test]
fn ancillas_traced_out_leave_dephased_system() {
    let plan = canonical_plan();
    let rho = random_density_matrix(&single(4), 4, 3).unwrap();
    let out = convert_forward(&rho, &plan).unwrap().output;
    let reduced = partial_trace_oracle(out.matrix(), &[4, 4, 4], &[0]);
    let lib = partial_trace(&out, &["A"]).unwrap();
    let dephased = dephase_oracle(rho.matrix(), &[contiguous_projectors(&[2, 2])]);
    assert!(linalg::max_abs_diff(&reduced, &dephased) < 1e-12);
    assert!(linalg::max_abs_diff(lib.matrix(), &reduced) < 1e-12);
}

#[test]
fn entropy_of_quarter_half_spectrum() {
    let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5, 0.), c(0.25, 0.), c(0.25, 0.)]));
    let s = DensityMatrix::new(single(3), m.clone()).unwrap();
    assert!((von_neumann_entropy(&s).unwrap() - 1.5).abs() < 1e-12);
    assert!((entropy_oracle(&m) - 1.5).abs() < 1e-12);
}

#[test]
fn plus_state_against_maximally_mixed_is_one_bit() {
    let plus = DensityMatrix::new(single(2), CMatrix::from_element(2, 2, c(0.5, 0.0))).unwrap();
    let mixed = DensityMatrix::maximally_mixed(single(2));
    assert!((quantum_relative_entropy(&plus, &mixed).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn unitary_conjugation_keeps_entropy() {
    let mut rng = rng_from_seed(4);
    for seed in 0..5 {
        let rho = random_density_matrix(&single(5), 3, seed).unwrap();
        let u = UnitaryOperator::new(single(5), random_unitary(5, &mut rng)).unwrap();
        let out = apply_unitary(&rho, &u).unwrap();
        assert!((entropy_oracle(out.matrix()) - entropy_oracle(rho.matrix())).abs() < 1e-10);
        assert!((von_neumann_entropy(&out).unwrap() - entropy_oracle(rho.matrix())).abs() < 1e-10);
    }
}

#[test]
fn complete_channel_preserves_trace() {
    let m = BlockMeasurement::contiguous(&[2, 1, 2]).unwrap();
    let s = MultipartiteBlockStructure::single("A", m);
    let ch = blockres::block::random_block_incoherent_kraus(&s, 3, &mut rng_from_seed(5)).unwrap();
    let rho = random_density_matrix(&single(5), 5, 6).unwrap();
    let out = apply_channel(&rho, &ch).unwrap();
    assert!((linalg::trace(out.matrix()).re - 1.0).abs() < 1e-12);
}

#[test]
fn canonical_measurement_on_last_party_is_fair() {
    let plan = canonical_plan();
    let rho = random_density_matrix(&single(4), 4, 7).unwrap();
    let out = convert_forward(&rho, &plan).unwrap().output;
    let lit = literal_operators();
    let id16 = CMatrix::identity(16, 16);
    for k in &lit.measurement {
        let full = kron_oracle(&id16, k);
        let p = (&full * out.matrix() * full.adjoint()).trace().re;
        assert!((p - 0.5).abs() < 1e-12, "{p}");
    }
}

#[test]
fn canonical_dephasing_matches_projector_sandwich() {
    let plan = canonical_plan();
    let rho = random_density_matrix(&single(4), 4, 8).unwrap();
    let out = convert_forward(&rho, &plan).unwrap().output;
    let ps = contiguous_projectors(&[2, 2]);
    let oracle = dephase_oracle(out.matrix(), &[ps.clone(), ps.clone(), ps.clone()]);
    let lib = block_dephase(&out, &plan.structure()).unwrap();
    assert!(linalg::max_abs_diff(lib.matrix(), &oracle) < 1e-14);
    // surviving pattern: P_i ρ P_i ⊗ |t_i t_i><t_i t_i|
    let tags = [ket(4, 0), ket(4, 2)];
    let diag_only = correlated_oracle(&dephase_oracle(rho.matrix(), std::slice::from_ref(&ps)), &ps, &tags, 2);
    assert!(linalg::max_abs_diff(&oracle, &diag_only) < 1e-14);
}

#[test]
fn sampled_block_incoherent_states_are_fixed_points() {
    let ms = vec![BlockMeasurement::contiguous(&[1, 2]).unwrap(), BlockMeasurement::equal(2, 1).unwrap()];
    let layout = SubsystemLayout::new(vec![3, 2], vec!["A", "B"]).unwrap();
    let s = MultipartiteBlockStructure::new(layout, ms).unwrap();
    for seed in 0..10 {
        let sigma = random_block_incoherent_state(&s, 3, seed).unwrap();
        assert!(is_block_diagonal(&sigma, &s).unwrap());
        let oracle = dephase_oracle(sigma.matrix(), &[contiguous_projectors(&[1, 2]), contiguous_projectors(&[1, 1])]);
        assert!(linalg::max_abs_diff(sigma.matrix(), &oracle) < 1e-12);
    }
    let a = random_block_incoherent_state(&s, 3, 1).unwrap();
    let b = random_block_incoherent_state(&s, 3, 2).unwrap();
    assert!(a.max_distance(&b) > 1e-9);
}

#[test]
fn fourier_rank_one_measurement_is_complete_and_incoherent() {
    for d in 2..=5 {
        let ch = build_fine_measurement(d).unwrap();
        let sum = ch.operators().iter().fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
        assert!(linalg::max_abs_diff(&sum, &CMatrix::identity(d, d)) < 1e-12);
    }
    let s = MultipartiteBlockStructure::single("local", BlockMeasurement::equal(2, 1).unwrap());
    assert!(verify_block_incoherent_channel(&build_fine_measurement(2).unwrap(), &s, 30, 1).unwrap().passed);
}

#[test]
fn literal_canonical_measurement_is_complete_and_incoherent() {
    let lit = literal_operators();
    let ch = KrausChannel::new(SubsystemLayout::single("C", 4), lit.measurement.to_vec()).unwrap();
    assert!(ch.completeness_residual() < 1e-12);
    let s = MultipartiteBlockStructure::single("C", BlockMeasurement::equal(2, 2).unwrap());
    assert!(verify_block_incoherent_channel(&ch, &s, 30, 2).unwrap().passed);
}

#[test]
fn conversion_unitary_certifies_over_fifty_trials() {
    let cert = unitary_certification_suite(&canonical_plan(), 50, 9).unwrap();
    assert!(cert.passed);
    assert_eq!(cert.block_incoherence.trials, 50);
}

#[test]
fn coherence_matches_direct_minimization() {
    for seed in 0..2 {
        let rho = random_density_matrix(&single(4), 4, 100 + seed).unwrap();
        let s = MultipartiteBlockStructure::single("A", BlockMeasurement::equal(2, 2).unwrap());
        let closed = relative_entropy_block_coherence(&rho, &s).unwrap();
        let minimized = min_relative_entropy_to_block_diagonal(rho.matrix(), &[2, 2], 20, seed);
        assert!((closed - minimized).abs() < 1e-4, "{closed} vs {minimized}");
    }
}

#[test]
fn system_cut_of_correlated_state_equals_coherence() {
    let plan = ConversionPlan::fine(BlockMeasurement::equal(2, 2).unwrap(), 2).unwrap();
    let rho = random_density_matrix(&single(4), 3, 11).unwrap();
    let out = convert_forward(&rho, &plan).unwrap().output;
    let cut = Bipartition::new(out.layout(), &["A"]).unwrap();
    let lib = entanglement_lower_bound(&out, &cut).unwrap();
    let oracle = entropy_oracle(&partial_trace_oracle(out.matrix(), &[4, 2, 2], &[0])) - entropy_oracle(out.matrix());
    let c_a = c_r_oracle(rho.matrix(), &[contiguous_projectors(&[2, 2])]);
    assert!((lib - c_a).abs() < 1e-8 && (oracle - c_a).abs() < 1e-8);
}

#[test]
fn forward_outputs_keep_both_entropies() {
    for (plan, dim) in [
        (ConversionPlan::fine(BlockMeasurement::contiguous(&[1, 2]).unwrap(), 2).unwrap(), 3),
        (canonical_plan(), 4),
        (ConversionPlan::coarse(BlockMeasurement::equal(3, 2).unwrap(), 1, 2).unwrap(), 6),
    ] {
        let rho = random_density_matrix(&single(dim), dim, 12).unwrap();
        let out = convert_forward(&rho, &plan).unwrap().output;
        let sys: Vec<CMatrix> = plan.system().projectors();
        let anc: Vec<CMatrix> = plan.ancilla_measurement().projectors();
        let mut all = vec![sys.clone()];
        all.extend(std::iter::repeat_n(anc, plan.ancilla_count()));
        let s_out = entropy_oracle(out.matrix());
        let s_in = entropy_oracle(rho.matrix());
        let sd_out = entropy_oracle(&dephase_oracle(out.matrix(), &all));
        let sd_in = entropy_oracle(&dephase_oracle(rho.matrix(), &[sys]));
        assert!((s_out - s_in).abs() < 1e-10 && (sd_out - sd_in).abs() < 1e-10);
        let c_out = relative_entropy_block_coherence(&out, &plan.structure()).unwrap();
        assert!((c_out - (sd_in - s_in)).abs() < 1e-8);
        let cert = entanglement_sandwich(&out, &plan.structure()).unwrap();
        assert!((cert.certified_value.unwrap() - (sd_in - s_in)).abs() < 1e-8);
    }
}

#[test]
fn two_block_superposition_certifies_one_bit() {
    let plan = canonical_plan();
    let rho = uniform_superposition(plan.system(), &[0, 1]);
    let out = convert_forward(&rho, &plan).unwrap().output;
    let s = entanglement_sandwich(&out, &plan.structure()).unwrap();
    assert!((s.certified_value.unwrap() - 1.0).abs() < 1e-10);
    let fine = ConversionPlan::fine(BlockMeasurement::contiguous(&[2, 2]).unwrap(), 1).unwrap();
    let out = convert_forward(&rho, &fine).unwrap().output;
    let s = entanglement_sandwich(&out, &fine.structure()).unwrap();
    assert!((s.certified_value.unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn unequal_system_ranks_give_explicit_fine_unitary() {
    let plan = ConversionPlan::fine(BlockMeasurement::contiguous(&[2, 1]).unwrap(), 2).unwrap();
    let u = build_um_fine(&plan).unwrap();
    let x = proj(2, &[]) + &ket(2, 1) * ket(2, 0).adjoint() + &ket(2, 0) * ket(2, 1).adjoint();
    let p0 = proj(3, &[0, 1]);
    let p1 = proj(3, &[2]);
    let id2 = CMatrix::identity(2, 2);
    let oracle = kron_oracle(&kron_oracle(&p0, &id2), &id2) + kron_oracle(&kron_oracle(&p1, &x), &x);
    assert_eq!(u.matrix().nrows(), 12);
    assert!(linalg::max_abs_diff(u.matrix(), &oracle) < 1e-15);
}

#[test]
fn canonical_unitary_matches_hand_written_form() {
    let u = build_um_coarse(&canonical_plan()).unwrap();
    let lit = literal_operators();
    let ps = [proj(4, &[0, 1]), proj(4, &[2, 3])];
    let mut oracle = CMatrix::zeros(64, 64);
    for i in 0..2 {
        for j1 in 0..2 {
            for j2 in 0..2 {
                let b = &ps[(i + j1) % 2] * &lit.transfer[i][j1] * &ps[j1];
                let cc = &ps[(i + j2) % 2] * &lit.transfer[i][j2] * &ps[j2];
                oracle += kron_oracle(&kron_oracle(&ps[i], &b), &cc);
            }
        }
    }
    assert!(linalg::max_abs_diff(u.matrix(), &oracle) < 1e-15);
}

#[test]
fn transfer_maps_permute_projectors() {
    let plan = ConversionPlan::coarse(BlockMeasurement::equal(3, 2).unwrap(), 1, 2).unwrap();
    let u = build_um_coarse(&plan).unwrap();
    assert!(linalg::max_abs_diff(&(u.matrix() * u.matrix().adjoint()), &CMatrix::identity(36, 36)) < 1e-12);
    let maps = transfer_maps(&plan);
    let ps = contiguous_projectors(&[2, 2, 2]);
    for i in 0..3 {
        for j in 0..3 {
            let moved = &maps[i][j] * &ps[j] * maps[i][j].adjoint();
            assert!(linalg::max_abs_diff(&moved, &ps[(i + j) % 3]) < 1e-12);
        }
    }
}

#[test]
fn canonical_embedding_residuals_over_fifty_states() {
    let plan = canonical_plan();
    for seed in 0..50 {
        let rho = random_density_matrix(&single(4), 1 + (seed as usize % 4), 200 + seed).unwrap();
        let out = convert_forward(&rho, &plan).unwrap().output;
        assert!(verify_embedding(&rho, &out, &plan).unwrap().max_residual() < 1e-10);
    }
}

#[test]
fn rank_one_fourier_rows_and_sign_feedback() {
    let ch = build_fine_measurement(2).unwrap();
    let h = 0.5f64.sqrt();
    let k0 = CMatrix::from_row_slice(2, 2, &[c(h, 0.), c(h, 0.), c(0., 0.), c(0., 0.)]);
    let k1 = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(h, 0.), c(-h, 0.)]);
    assert!(linalg::max_abs_diff(&ch.operators()[0], &k0) < 1e-15);
    assert!(linalg::max_abs_diff(&ch.operators()[1], &k1) < 1e-15);
    let u1 = build_fine_feedback(2, 1).unwrap();
    assert!(linalg::max_abs_diff(u1.matrix(), &(proj(2, &[0]) - proj(2, &[1]))) < 1e-15);
}

#[test]
fn coarse_measurement_equals_hand_written_operators() {
    let ch = build_coarse_measurement(&BlockMeasurement::equal(2, 2).unwrap()).unwrap();
    let lit = literal_operators();
    for (a, b) in ch.operators().iter().zip(&lit.measurement) {
        assert!(linalg::max_abs_diff(a, b) < 1e-15);
    }
    let big = build_coarse_measurement(&BlockMeasurement::equal(3, 2).unwrap()).unwrap();
    let sum = big.operators().iter().fold(CMatrix::zeros(6, 6), |acc, k| acc + k.adjoint() * k);
    assert!(linalg::max_abs_diff(&sum, &CMatrix::identity(6, 6)) < 1e-12);
}

#[test]
fn one_step_shortens_the_correlated_state() {
    let plan = ConversionPlan::fine(BlockMeasurement::equal(2, 1).unwrap(), 2).unwrap();
    let rho = random_density_matrix(&single(2), 2, 13).unwrap();
    let out = convert_forward(&rho, &plan).unwrap().output;
    let (next, _, rec) = lbicc_step(&out, &plan.structure(), "B2", "B1", Variant::Fine, OutcomePolicy::All).unwrap();
    let ps = contiguous_projectors(&[1, 1]);
    let oracle = correlated_oracle(rho.matrix(), &ps, &[ket(2, 0), ket(2, 1)], 1);
    assert!(linalg::max_abs_diff(next.matrix(), &oracle) < 1e-10);
    assert!(rec.branch_distance.unwrap() < 1e-10);
}

#[test]
fn canonical_chain_and_round_trip() {
    let plan = canonical_plan();
    let rho = random_density_matrix(&single(4), 4, 14).unwrap();
    let out = convert_forward(&rho, &plan).unwrap().output;
    let t = run_reverse_protocol(&out, &plan, OutcomePolicy::All).unwrap();
    let fin = t.final_state().unwrap();
    assert!(linalg::max_abs_diff(fin.matrix(), rho.matrix()) < 1e-10);
    let c_a = c_r_oracle(rho.matrix(), &[contiguous_projectors(&[2, 2])]);
    for v in t.chain_values() {
        assert!((v - c_a).abs() < 1e-8);
    }
}

#[test]
fn four_stage_fine_transcript_has_constant_value() {
    let plan = ConversionPlan::fine(BlockMeasurement::equal(2, 1).unwrap(), 3).unwrap();
    let rho = random_density_matrix(&single(2), 2, 15).unwrap();
    let out = convert_forward(&rho, &plan).unwrap().output;
    let t = run_reverse_protocol(&out, &plan, OutcomePolicy::All).unwrap();
    assert_eq!(t.stages().len(), 4);
    let c_a = c_r_oracle(rho.matrix(), &[contiguous_projectors(&[1, 1])]);
    for (state, _) in t.stages() {
        let parties = state.layout().len();
        let dims = state.layout().dims().to_vec();
        // system cut, from independent entropies
        let value = if parties > 1 {
            entropy_oracle(&partial_trace_oracle(state.matrix(), &dims, &[0])) - entropy_oracle(state.matrix())
        } else {
            c_r_oracle(state.matrix(), &[contiguous_projectors(&[1, 1])])
        };
        assert!((value - c_a).abs() < 1e-8);
    }
    for s in std::iter::once(&t.initial.sandwich).chain(t.steps.iter().map(|s| &s.sandwich)).flatten() {
        assert!(s.certified && (s.certified_value.unwrap() - c_a).abs() < 1e-8);
    }
}

#[test]
fn reduced_coherence_bound_saturates_only_for_matched_feedback() {
    let plan = ConversionPlan::fine(BlockMeasurement::equal(3, 1).unwrap(), 2).unwrap();
    let rho = random_density_matrix(&single(3), 1, 16).unwrap();
    let out = convert_forward(&rho, &plan).unwrap().output;
    let optimal =
        verify_reduced_coherence_bound(&run_reverse_protocol(&out, &plan, OutcomePolicy::All).unwrap()).unwrap();
    assert!(optimal.satisfied && optimal.saturated);
    let opts = ReverseOptions { rule: FeedbackRule::Detuned(0.9), ..Default::default() };
    let off = verify_reduced_coherence_bound(&run_reverse_protocol_with(&out, &plan, &opts).unwrap()).unwrap();
    assert!(off.satisfied && off.final_bits < off.bound_bits - 1e-6);
    let skip = ReverseOptions { rule: FeedbackRule::Skip, ..Default::default() };
    assert!(verify_reduced_coherence_bound(&run_reverse_protocol_with(&out, &plan, &skip).unwrap()).unwrap().satisfied);
}

#[test]
fn block_incoherent_input_stays_at_zero() {
    let plan = canonical_plan();
    let sigma = block_dephase(&random_density_matrix(&single(4), 4, 17).unwrap(), &plan.system_structure()).unwrap();
    let out = convert_forward(&sigma, &plan).unwrap().output;
    let t = run_reverse_protocol(&out, &plan, OutcomePolicy::All).unwrap();
    assert!(t.c_r_values().iter().all(|v| v.abs() < 1e-10));
    let cert = verify_reduced_coherence_bound(&t).unwrap();
    assert!(cert.bound_bits.abs() < 1e-10 && cert.max_reduced_bits.abs() < 1e-10);
}

#[test]
fn product_of_incoherent_states_stays_incoherent_under_a_step() {
    let plan = canonical_plan();
    let s = plan.structure();
    let sigma = random_block_incoherent_state(&s, 1, 18).unwrap();
    let (next, next_s, rec) = lbicc_step(&sigma, &s, "B2", "B1", Variant::Coarse, OutcomePolicy::All).unwrap();
    assert!(is_block_diagonal(&next, &next_s).unwrap());
    assert!(rec.c_r_bits.abs() < 1e-10);
}

#[test]
fn dephasing_channel_matches_dephasing_map() {
    let plan = canonical_plan();
    let rho = convert_forward(&random_density_matrix(&single(4), 4, 19).unwrap(), &plan).unwrap().output;
    let via_channel = apply_channel(&rho, &dephasing_channel(&plan.structure())).unwrap();
    let direct = block_dephase(&rho, &plan.structure()).unwrap();
    assert!(via_channel.max_distance(&direct) < 1e-14);
}
