//! Relative entropy of block coherence and two-sided bounds on the relative
//! entropy of entanglement.
//!
//! The entanglement interval is `[max_bipartition (S(ρ_side) − S(ρ)), C_R(ρ; P_N)]`.
//! The lower end is the entropic bound on every bipartite cut, which never
//! exceeds the multipartite quantity. The upper end is `S(ρ‖Δρ)`, so it bounds
//! the entanglement only when `Δρ` is separable. That holds whenever every
//! occupied joint block of `Δρ` is a product of its marginals, which is always
//! the case if at most one party has blocks of rank above one. Blocks of rank
//! two or more on two parties can hold entangled block-diagonal states, and
//! then `C_R` may sit below the entanglement. The interval is certified only
//! when the upper end is valid and both ends meet within [`tol::CERTIFY`].

use serde::{Deserialize, Serialize};

use crate::block::{block_dephase, MultipartiteBlockStructure};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum::{partial_trace, tensor_product, von_neumann_entropy, Bipartition, DensityMatrix, SubsystemLayout};
use crate::tol;

/// `C_R(ρ; P) = S(Δρ) − S(ρ)`, clamped at zero.
pub fn relative_entropy_block_coherence(state: &DensityMatrix, structure: &MultipartiteBlockStructure) -> Result<f64> {
    let dephased = block_dephase(state, structure)?;
    let diff = von_neumann_entropy(&dephased)? - von_neumann_entropy(state)?;
    Ok(diff.max(0.0))
}

/// Every unordered proper bipartition of the layout.
///
/// Sides are listed smaller first, by size and then lexicographically by
/// position; for equal halves the side containing the first label is on the left.
pub fn enumerate_bipartitions(layout: &SubsystemLayout) -> Result<Vec<Bipartition>> {
    let m = layout.len();
    if m < 2 {
        return Err(Error::InvalidBipartition(format!("{layout} has a single subsystem")));
    }
    let mut out = Vec::with_capacity((1usize << (m - 1)) - 1);
    for size in 1..=m / 2 {
        for combo in combinations(m, size) {
            if 2 * size == m && combo[0] != 0 {
                continue;
            }
            let left: Vec<&str> = combo.iter().map(|&i| layout.labels()[i].as_str()).collect();
            out.push(Bipartition::new(layout, &left)?);
        }
    }
    Ok(out)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            go(i + 1, n, k, current, out);
            current.pop();
        }
    }
    go(0, n, k, &mut current, &mut out);
    out
}

fn lower_bound_with(state: &DensityMatrix, joint_entropy: f64, cut: &Bipartition) -> Result<f64> {
    cut.check_against(state.layout())?;
    let left = von_neumann_entropy(&partial_trace(state, cut.left())?)?;
    let right = von_neumann_entropy(&partial_trace(state, cut.right())?)?;
    Ok((left.max(right) - joint_entropy).max(0.0))
}

/// `max(0, S(ρ_side) − S(ρ))` over the two sides of the cut.
pub fn entanglement_lower_bound(state: &DensityMatrix, cut: &Bipartition) -> Result<f64> {
    lower_bound_with(state, von_neumann_entropy(state)?, cut)
}

/// Largest entrywise gap between an occupied joint block of `Δρ` (normalized)
/// and the product of its single-party marginals.
///
/// Zero means `Δρ` is a mixture of product states, so `C_R` bounds the
/// entanglement from above.
pub fn dephased_product_residual(state: &DensityMatrix, structure: &MultipartiteBlockStructure) -> Result<f64> {
    if state.layout() != structure.layout() {
        return Err(Error::LayoutMismatch {
            expected: structure.layout().to_string(),
            found: state.layout().to_string(),
        });
    }
    let ranks: Vec<Vec<usize>> = structure.measurements().iter().map(|m| m.ranks()).collect();
    let mut worst = 0.0f64;
    for idx in structure.joint_indices() {
        let wide = idx.iter().zip(&ranks).filter(|(&i, r)| r[i] > 1).count();
        if wide < 2 {
            continue;
        }
        let block = linalg::sandwich(&structure.joint_projector(&idx), state.matrix());
        let weight = linalg::trace(&block).re;
        if weight < tol::SUPPORT {
            continue;
        }
        let block = DensityMatrix::from_parts(state.layout().clone(), block.map(|z| z / weight));
        let marginals =
            state.layout().labels().iter().map(|l| partial_trace(&block, &[l])).collect::<Result<Vec<_>>>()?;
        worst = worst.max(block.max_distance(&tensor_product(&marginals)?));
    }
    Ok(worst)
}

/// `C_R(ρ; P_N)`. It bounds the multipartite relative entropy of entanglement
/// when [`dephased_product_residual`] vanishes.
pub fn entanglement_upper_bound(state: &DensityMatrix, structure: &MultipartiteBlockStructure) -> Result<f64> {
    relative_entropy_block_coherence(state, structure)
}

/// Lower bound attached to one bipartition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutBound {
    pub bipartition: String,
    pub lower_bits: f64,
}

/// Interval enclosing the multipartite relative entropy of entanglement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementSandwich {
    #[serde(rename = "lower_bits")]
    pub lower: f64,
    #[serde(rename = "upper_bits")]
    pub upper: f64,
    /// Whether `Δρ` was verified separable, making `upper` a valid bound.
    pub upper_valid: bool,
    pub certified: bool,
    #[serde(rename = "value_bits")]
    pub certified_value: Option<f64>,
    pub per_bipartition: Vec<CutBound>,
}

impl EntanglementSandwich {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Certified value, or the upper bound when the interval is open.
    pub fn value_or_upper(&self) -> f64 {
        self.certified_value.unwrap_or(self.upper)
    }
}

/// Brackets the entanglement of `state` between the best bipartite entropic
/// bound and the block coherence.
///
/// A single-subsystem state has no cuts and is reported as `[0, 0]`.
pub fn entanglement_sandwich(
    state: &DensityMatrix,
    structure: &MultipartiteBlockStructure,
) -> Result<EntanglementSandwich> {
    if state.layout().len() < 2 {
        return Ok(EntanglementSandwich {
            lower: 0.0,
            upper: 0.0,
            upper_valid: true,
            certified: true,
            certified_value: Some(0.0),
            per_bipartition: Vec::new(),
        });
    }
    let upper = entanglement_upper_bound(state, structure)?;
    let joint = von_neumann_entropy(state)?;
    let per_bipartition = enumerate_bipartitions(state.layout())?
        .iter()
        .map(|cut| Ok(CutBound { bipartition: cut.to_string(), lower_bits: lower_bound_with(state, joint, cut)? }))
        .collect::<Result<Vec<_>>>()?;
    let lower = per_bipartition.iter().map(|b| b.lower_bits).fold(0.0, f64::max);
    let upper_valid = dephased_product_residual(state, structure)? < tol::EQUAL;
    let certified = upper_valid && (upper - lower).abs() < tol::CERTIFY;
    Ok(EntanglementSandwich {
        lower,
        upper,
        upper_valid,
        certified,
        certified_value: certified.then_some(lower),
        per_bipartition,
    })
}
