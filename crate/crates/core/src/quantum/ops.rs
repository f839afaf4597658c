//! State-level operations: products, partial traces, entropies, channel application
//! and measurement.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quantum::channel::KrausChannel;
use crate::quantum::layout::SubsystemLayout;
use crate::quantum::state::{DensityMatrix, UnitaryOperator};
use crate::rng::rng_from_seed;
use crate::tol;

fn same_layout(a: &SubsystemLayout, b: &SubsystemLayout) -> Result<()> {
    if a != b {
        return Err(Error::LayoutMismatch { expected: a.to_string(), found: b.to_string() });
    }
    Ok(())
}

/// Kronecker product of states; layouts are concatenated in order.
pub fn tensor_product(states: &[DensityMatrix]) -> Result<DensityMatrix> {
    if states.is_empty() {
        return Err(Error::EmptyInput("state list"));
    }
    let layout = SubsystemLayout::concat(states.iter().map(|s| s.layout()))?;
    let matrix = linalg::kron_all(states.iter().map(|s| s.matrix()));
    Ok(DensityMatrix::from_parts(layout, matrix))
}

/// Reduced state on `keep`, ordered as in the input layout.
pub fn partial_trace<S: AsRef<str>>(state: &DensityMatrix, keep: &[S]) -> Result<DensityMatrix> {
    let layout = state.layout();
    let (kept_layout, positions) = layout.restrict(keep)?;
    let traced_dims: Vec<usize> =
        (0..layout.len()).filter(|i| !positions.contains(i)).map(|i| layout.dims()[i]).collect();
    let traced_total: usize = traced_dims.iter().product();
    let kept_total = kept_layout.total_dim();

    // group full indices by their traced multi-index
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(kept_total); traced_total];
    for x in 0..layout.total_dim() {
        let digits = layout.digits(x);
        let (mut k, mut t) = (0usize, 0usize);
        for (i, (&digit, &dim)) in digits.iter().zip(layout.dims()).enumerate() {
            if positions.contains(&i) {
                k = k * dim + digit;
            } else {
                t = t * dim + digit;
            }
        }
        groups[t].push((x, k));
    }

    let rho = state.matrix();
    let mut out = CMatrix::zeros(kept_total, kept_total);
    for group in &groups {
        for &(x1, k1) in group {
            for &(x2, k2) in group {
                out[(k1, k2)] += rho[(x1, x2)];
            }
        }
    }
    Ok(DensityMatrix::from_parts(kept_layout, out))
}

/// Shannon entropy in bits of a (possibly slightly perturbed) spectrum.
///
/// Negative round-off is clamped to zero, values under the eigenvalue clamp
/// are dropped, and the remainder is renormalized.
pub fn spectrum_entropy(eigenvalues: &[f64]) -> f64 {
    let clamped: Vec<f64> = eigenvalues.iter().map(|&x| if x < tol::EIG_CLAMP { 0.0 } else { x }).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -clamped
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| {
            let p = x / total;
            p * p.log2()
        })
        .sum::<f64>()
}

pub(crate) fn matrix_entropy(m: &CMatrix) -> Result<f64> {
    let residual = linalg::hermiticity_residual(m);
    if residual > tol::HERMITIAN {
        return Err(Error::NotHermitian { residual });
    }
    Ok(spectrum_entropy(&linalg::eigvalsh(m)?))
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(state: &DensityMatrix) -> Result<f64> {
    matrix_entropy(state.matrix())
}

/// `tr ρ(log₂ρ − log₂σ)` in bits; `+∞` when the support of `rho` is not
/// contained in the support of `sigma`.
pub fn quantum_relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_layout(rho.layout(), sigma.layout())?;
    let (sig_vals, sig_vecs) = linalg::eigh(sigma.matrix())?;
    let r = rho.matrix();
    let mut cross = 0.0;
    for (k, &mu) in sig_vals.iter().enumerate() {
        let v = sig_vecs.column(k);
        let weight = (v.adjoint() * r * v)[(0, 0)].re;
        if mu < tol::EIG_CLAMP {
            if weight > tol::SUPPORT {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += weight * mu.log2();
    }
    let neg_entropy = -von_neumann_entropy(rho)?;
    Ok(neg_entropy - cross)
}

/// `U ρ U†`.
pub fn apply_unitary(state: &DensityMatrix, u: &UnitaryOperator) -> Result<DensityMatrix> {
    same_layout(u.layout(), state.layout())?;
    let out = linalg::sandwich(u.matrix(), state.matrix());
    Ok(DensityMatrix::from_parts(state.layout().clone(), out))
}

/// `Σ_l K_l ρ K_l†`.
pub fn apply_channel(state: &DensityMatrix, ch: &KrausChannel) -> Result<DensityMatrix> {
    same_layout(ch.layout(), state.layout())?;
    ch.require_complete()?;
    let d = state.dim();
    let out = ch.operators().iter().fold(CMatrix::zeros(d, d), |acc, k| acc + linalg::sandwich(k, state.matrix()));
    Ok(DensityMatrix::from_parts(state.layout().clone(), out))
}

/// Which outcomes of a measurement to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "value")]
pub enum OutcomePolicy {
    /// Draw one non-degenerate outcome with the Born probabilities.
    Sample(u64),
    /// Return only the given outcome.
    Fixed(usize),
    /// Return every outcome.
    All,
}

/// One branch of a measurement.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub index: usize,
    pub probability: f64,
    /// `None` when the outcome is degenerate (probability below threshold).
    pub post_state: Option<DensityMatrix>,
}

impl MeasurementOutcome {
    pub fn is_degenerate(&self) -> bool {
        self.post_state.is_none()
    }
}

/// Born-rule measurement with the channel's Kraus operators.
///
/// Degenerate outcomes are reported with their probability but no post state.
pub fn measure_and_collapse(
    state: &DensityMatrix,
    ch: &KrausChannel,
    policy: OutcomePolicy,
) -> Result<Vec<MeasurementOutcome>> {
    same_layout(ch.layout(), state.layout())?;
    ch.require_complete()?;
    let branches: Vec<MeasurementOutcome> = ch
        .operators()
        .iter()
        .enumerate()
        .map(|(index, k)| {
            let unnormalized = linalg::sandwich(k, state.matrix());
            let probability = linalg::trace(&unnormalized).re.max(0.0);
            let post_state = (probability >= tol::PROBABILITY)
                .then(|| DensityMatrix::from_parts(state.layout().clone(), unnormalized.map(|z| z / probability)));
            MeasurementOutcome { index, probability, post_state }
        })
        .collect();
    if branches.iter().all(|b| b.is_degenerate()) {
        return Err(Error::AllOutcomesDegenerate);
    }
    match policy {
        OutcomePolicy::All => Ok(branches),
        OutcomePolicy::Fixed(l) => {
            let count = branches.len();
            branches.into_iter().nth(l).map(|b| vec![b]).ok_or(Error::OutcomeOutOfRange { index: l, count })
        }
        OutcomePolicy::Sample(seed) => {
            let live: f64 = branches.iter().filter(|b| !b.is_degenerate()).map(|b| b.probability).sum();
            let mut u = rng_from_seed(seed).random::<f64>() * live;
            let mut chosen = None;
            for b in branches.iter().filter(|b| !b.is_degenerate()) {
                chosen = Some(b.index);
                if u < b.probability {
                    break;
                }
                u -= b.probability;
            }
            let idx = chosen.ok_or(Error::AllOutcomesDegenerate)?;
            Ok(branches.into_iter().filter(|b| b.index == idx).collect())
        }
    }
}
