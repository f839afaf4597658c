//! Projective block measurements, block-dephasing and block-incoherent channels.
//!
//! A [`BlockMeasurement`] is stored as an orthonormal basis per block; the
//! projectors `P_i = Σ_k |k^(i)><k^(i)|` are derived when needed. Dephasing is
//! evaluated by rotating into the block basis and masking cross-block entries,
//! which is exact and skips the rotation for computational-basis blocks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::quantum::random::{ginibre, random_density_with, random_unitary};
use crate::quantum::{apply_channel, tensor_product, DensityMatrix, KrausChannel, SubsystemLayout};
use crate::rng::{rng_from_seed, Rng, SeedTree};
use crate::serial::{self, JsonVector};
use crate::tol;

/// Ordered family of orthogonal projectors summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMeasurement {
    local_dim: usize,
    blocks: Vec<Vec<CVector>>,
    computational: bool,
}

impl BlockMeasurement {
    /// Contiguous computational-basis blocks of the given ranks.
    pub fn contiguous(ranks: &[usize]) -> Result<Self> {
        if ranks.is_empty() || ranks.contains(&0) {
            return Err(Error::InvalidMeasurement(format!("ranks {ranks:?} must be non-empty and positive")));
        }
        let local_dim = ranks.iter().sum();
        let mut next = 0;
        let blocks = ranks
            .iter()
            .map(|&r| {
                let block = (next..next + r).map(|k| linalg::basis_vector(local_dim, k)).collect();
                next += r;
                block
            })
            .collect();
        Ok(Self { local_dim, blocks, computational: true })
    }

    /// `d` contiguous blocks of rank `r`.
    pub fn equal(d: usize, r: usize) -> Result<Self> {
        Self::contiguous(&vec![r; d])
    }

    /// Blocks given by explicit basis vectors; checks orthonormality and completeness.
    pub fn from_vectors(local_dim: usize, blocks: Vec<Vec<CVector>>) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().any(Vec::is_empty) {
            return Err(Error::InvalidMeasurement("every block needs at least one vector".into()));
        }
        let all: Vec<&CVector> = blocks.iter().flatten().collect();
        if let Some(v) = all.iter().find(|v| v.len() != local_dim) {
            return Err(Error::InvalidMeasurement(format!(
                "basis vector of length {} in a {local_dim}-dimensional space",
                v.len()
            )));
        }
        if all.len() != local_dim {
            return Err(Error::InvalidMeasurement(format!(
                "ranks sum to {}, local dimension is {local_dim}",
                all.len()
            )));
        }
        let basis = CMatrix::from_columns(&all.iter().map(|v| (*v).clone()).collect::<Vec<_>>());
        let gram = basis.adjoint() * &basis;
        let residual = linalg::max_abs_diff(&gram, &linalg::identity(local_dim));
        if residual > tol::UNITARY {
            return Err(Error::InvalidMeasurement(format!(
                "basis vectors are not orthonormal (residual {residual:.3e})"
            )));
        }
        let computational = basis == linalg::identity(local_dim);
        Ok(Self { local_dim, blocks, computational })
    }

    /// Blocks of the given ranks spanned by the columns of a Haar-random unitary.
    pub fn random_rotated(ranks: &[usize], rng: &mut Rng) -> Result<Self> {
        let dim: usize = ranks.iter().sum();
        let u = random_unitary(dim, rng);
        let mut col = 0;
        let blocks = ranks
            .iter()
            .map(|&r| {
                let b = (col..col + r).map(|j| u.column(j).into_owned()).collect();
                col += r;
                b
            })
            .collect();
        Self::from_vectors(dim, blocks)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// The common rank when every block has the same size.
    pub fn equal_rank(&self) -> Option<usize> {
        let r = self.blocks[0].len();
        self.blocks.iter().all(|b| b.len() == r).then_some(r)
    }

    pub fn require_equal_rank(&self) -> Result<usize> {
        self.equal_rank().ok_or_else(|| Error::UnequalRanks(self.ranks()))
    }

    pub fn block(&self, i: usize) -> &[CVector] {
        &self.blocks[i]
    }

    /// `|k^(i)>`.
    pub fn basis_vector(&self, i: usize, k: usize) -> &CVector {
        &self.blocks[i][k]
    }

    pub fn is_computational(&self) -> bool {
        self.computational
    }

    pub fn projector(&self, i: usize) -> CMatrix {
        self.blocks[i].iter().fold(CMatrix::zeros(self.local_dim, self.local_dim), |acc, v| acc + linalg::outer(v, v))
    }

    pub fn projectors(&self) -> Vec<CMatrix> {
        (0..self.block_count()).map(|i| self.projector(i)).collect()
    }

    /// Unitary whose columns are the block basis vectors, block by block.
    pub fn basis_matrix(&self) -> CMatrix {
        let cols: Vec<CVector> = self.blocks.iter().flatten().cloned().collect();
        CMatrix::from_columns(&cols)
    }

    /// Block index of each column of [`Self::basis_matrix`].
    pub fn column_labels(&self) -> Vec<usize> {
        self.blocks.iter().enumerate().flat_map(|(i, b)| std::iter::repeat_n(i, b.len())).collect()
    }

    /// Largest deviation from `Σ P_i = I` and `P_i P_j = δ_ij P_i`.
    pub fn projector_residual(&self) -> f64 {
        let ps = self.projectors();
        let sum = ps.iter().fold(CMatrix::zeros(self.local_dim, self.local_dim), |a, p| a + p);
        let mut worst = linalg::max_abs_diff(&sum, &linalg::identity(self.local_dim));
        for (i, pi) in ps.iter().enumerate() {
            for (j, pj) in ps.iter().enumerate() {
                let prod = pi * pj;
                let target = if i == j { pi.clone() } else { CMatrix::zeros(self.local_dim, self.local_dim) };
                worst = worst.max(linalg::max_abs_diff(&prod, &target));
            }
        }
        worst
    }

    pub fn to_spec(&self) -> MeasurementSpec {
        if let (true, Some(r)) = (self.computational, self.equal_rank()) {
            return MeasurementSpec::Shorthand { equal_blocks: self.block_count(), rank: r };
        }
        MeasurementSpec::Explicit(self.blocks.iter().map(|b| b.iter().map(serial::vector_to_json).collect()).collect())
    }

    pub fn from_spec(spec: &MeasurementSpec) -> Result<Self> {
        match spec {
            MeasurementSpec::Shorthand { equal_blocks, rank } => Self::equal(*equal_blocks, *rank),
            MeasurementSpec::Explicit(blocks) => {
                let dim = blocks.iter().flatten().next().map_or(0, Vec::len);
                let blocks = blocks.iter().map(|b| b.iter().map(serial::vector_from_json).collect()).collect();
                Self::from_vectors(dim, blocks)
            }
        }
    }
}

/// JSON form of a block measurement: explicit block bases or the
/// `{"equal_blocks": d, "rank": r}` shorthand for contiguous computational blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasurementSpec {
    Shorthand { equal_blocks: usize, rank: usize },
    Explicit(Vec<Vec<JsonVector>>),
}

/// One block measurement per subsystem of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipartiteBlockStructure {
    layout: SubsystemLayout,
    measurements: Vec<BlockMeasurement>,
}

impl MultipartiteBlockStructure {
    pub fn new(layout: SubsystemLayout, measurements: Vec<BlockMeasurement>) -> Result<Self> {
        if measurements.len() != layout.len() {
            return Err(Error::InvalidMeasurement(format!(
                "{} measurements for {} subsystems",
                measurements.len(),
                layout.len()
            )));
        }
        for ((m, &d), label) in measurements.iter().zip(layout.dims()).zip(layout.labels()) {
            if m.local_dim() != d {
                return Err(Error::InvalidMeasurement(format!(
                    "measurement on `{label}` has dimension {}, subsystem has {d}",
                    m.local_dim()
                )));
            }
        }
        Ok(Self { layout, measurements })
    }

    pub fn single(label: impl Into<String>, m: BlockMeasurement) -> Self {
        let layout = SubsystemLayout::single(label, m.local_dim());
        Self { layout, measurements: vec![m] }
    }

    /// Builds from a label → measurement map, ordered by `layout`.
    pub fn from_spec(layout: SubsystemLayout, spec: &BTreeMap<String, MeasurementSpec>) -> Result<Self> {
        if let Some(extra) = spec.keys().find(|k| layout.index_of(k).is_err()) {
            return Err(Error::UnknownLabel(extra.clone()));
        }
        let ms = layout
            .labels()
            .iter()
            .map(|l| {
                let s = spec.get(l).ok_or_else(|| Error::InvalidMeasurement(format!("no measurement for `{l}`")))?;
                BlockMeasurement::from_spec(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layout, ms)
    }

    pub fn to_spec(&self) -> BTreeMap<String, MeasurementSpec> {
        self.layout.labels().iter().cloned().zip(self.measurements.iter().map(BlockMeasurement::to_spec)).collect()
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn measurements(&self) -> &[BlockMeasurement] {
        &self.measurements
    }

    pub fn measurement(&self, label: &str) -> Result<&BlockMeasurement> {
        Ok(&self.measurements[self.layout.index_of(label)?])
    }

    /// Sub-structure on `keep`, in layout order.
    pub fn restrict<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let (layout, pos) = self.layout.restrict(keep)?;
        let measurements = pos.iter().map(|&i| self.measurements[i].clone()).collect();
        Ok(Self { layout, measurements })
    }

    /// Concatenation with another structure on disjoint labels.
    pub fn join(&self, other: &MultipartiteBlockStructure) -> Result<Self> {
        let layout = SubsystemLayout::concat([&self.layout, &other.layout])?;
        let measurements = self.measurements.iter().chain(&other.measurements).cloned().collect();
        Ok(Self { layout, measurements })
    }

    /// `P_{i1} ⊗ … ⊗ P_{in}` for one joint block index.
    pub fn joint_projector(&self, indices: &[usize]) -> CMatrix {
        let ps: Vec<CMatrix> = self.measurements.iter().zip(indices).map(|(m, &i)| m.projector(i)).collect();
        linalg::kron_all(&ps)
    }

    /// Every joint block index in lexicographic order.
    pub fn joint_indices(&self) -> Vec<Vec<usize>> {
        let counts: Vec<usize> = self.measurements.iter().map(|m| m.block_count()).collect();
        let total: usize = counts.iter().product();
        (0..total)
            .map(|mut x| {
                let mut digits = vec![0; counts.len()];
                for (slot, &d) in digits.iter_mut().zip(&counts).rev() {
                    *slot = x % d;
                    x /= d;
                }
                digits
            })
            .collect()
    }

    fn check_layout(&self, layout: &SubsystemLayout) -> Result<()> {
        if &self.layout != layout {
            return Err(Error::LayoutMismatch { expected: self.layout.to_string(), found: layout.to_string() });
        }
        Ok(())
    }

    /// Dephases the listed subsystem positions.
    fn dephase_matrix(&self, m: &CMatrix, positions: &[usize]) -> CMatrix {
        let rotate = positions.iter().any(|&p| !self.measurements[p].is_computational());
        let basis = rotate.then(|| {
            let factors: Vec<CMatrix> = (0..self.layout.len())
                .map(|p| {
                    if positions.contains(&p) {
                        self.measurements[p].basis_matrix()
                    } else {
                        linalg::identity(self.layout.dims()[p])
                    }
                })
                .collect();
            linalg::kron_all(&factors)
        });
        let labels: Vec<Vec<usize>> = self.measurements.iter().map(|m| m.column_labels()).collect();
        let dim = self.layout.total_dim();
        let mut ids: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let keys: Vec<usize> = (0..dim)
            .map(|x| {
                let digits = self.layout.digits(x);
                let key: Vec<usize> = positions.iter().map(|&p| labels[p][digits[p]]).collect();
                let next = ids.len();
                *ids.entry(key).or_insert(next)
            })
            .collect();
        let mut work = match &basis {
            Some(b) => linalg::matmul(&linalg::matmul(&b.adjoint(), m), b),
            None => m.clone(),
        };
        for r in 0..dim {
            for s in 0..dim {
                if keys[r] != keys[s] {
                    work[(r, s)] = linalg::ZERO;
                }
            }
        }
        match &basis {
            Some(b) => linalg::matmul(&linalg::matmul(b, &work), &b.adjoint()),
            None => work,
        }
    }
}

/// `Δ(ρ) = Σ_{i1…in} (P_{i1}⊗…⊗P_{in}) ρ (P_{i1}⊗…⊗P_{in})`.
pub fn block_dephase(state: &DensityMatrix, structure: &MultipartiteBlockStructure) -> Result<DensityMatrix> {
    structure.check_layout(state.layout())?;
    let all: Vec<usize> = (0..structure.layout.len()).collect();
    let out = structure.dephase_matrix(state.matrix(), &all);
    Ok(DensityMatrix::from_parts(state.layout().clone(), out))
}

/// Dephases only the subsystem `label`.
pub fn dephase_subsystem(
    state: &DensityMatrix,
    structure: &MultipartiteBlockStructure,
    label: &str,
) -> Result<DensityMatrix> {
    structure.check_layout(state.layout())?;
    let p = structure.layout.index_of(label)?;
    let out = structure.dephase_matrix(state.matrix(), &[p]);
    Ok(DensityMatrix::from_parts(state.layout().clone(), out))
}

/// `max |Δ(ρ) − ρ|`.
pub fn block_coherence_residual(state: &DensityMatrix, structure: &MultipartiteBlockStructure) -> Result<f64> {
    Ok(block_dephase(state, structure)?.max_distance(state))
}

pub fn is_block_diagonal(state: &DensityMatrix, structure: &MultipartiteBlockStructure) -> Result<bool> {
    Ok(block_coherence_residual(state, structure)? < tol::EQUAL)
}

/// Mixture size used when none is given.
pub fn default_mixture_size(structure: &MultipartiteBlockStructure) -> usize {
    structure.layout().dims().iter().copied().max().unwrap_or(1)
}

/// `Σ_s p_s σ_s^(1) ⊗ … ⊗ σ_s^(n)` with every local factor block-dephased.
pub fn random_block_incoherent_state(
    structure: &MultipartiteBlockStructure,
    mixture_size: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    let mut rng = rng_from_seed(seed);
    random_block_incoherent_with(structure, mixture_size, &mut rng)
}

pub(crate) fn random_block_incoherent_with(
    structure: &MultipartiteBlockStructure,
    mixture_size: usize,
    rng: &mut Rng,
) -> Result<DensityMatrix> {
    if mixture_size == 0 {
        return Err(Error::EmptyInput("mixture"));
    }
    let weights: Vec<f64> = (0..mixture_size).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let dim = structure.layout.total_dim();
    let mut acc = CMatrix::zeros(dim, dim);
    for w in weights {
        let factors = structure
            .layout
            .labels()
            .iter()
            .zip(&structure.measurements)
            .map(|(label, m)| {
                let local = MultipartiteBlockStructure::single(label.clone(), m.clone());
                let d = m.local_dim();
                let rank = rng.random_range(1..=d);
                let s = random_density_with(local.layout(), rank, rng);
                block_dephase(&s, &local)
            })
            .collect::<Result<Vec<_>>>()?;
        acc += tensor_product(&factors)?.matrix() * c(w / total, 0.0);
    }
    Ok(DensityMatrix::from_parts(structure.layout.clone(), acc))
}

/// Block-dephasing written as a Kraus channel (product projectors).
pub fn dephasing_channel(structure: &MultipartiteBlockStructure) -> KrausChannel {
    let ops = structure.joint_indices().iter().map(|idx| structure.joint_projector(idx)).collect();
    KrausChannel::new(structure.layout.clone(), ops)
        .expect("projector family has matching dimensions")
        .with_certification(structure.clone())
}

/// Kraus operators `K_l = Σ_i P_{f_l(i)} C_l P_i` on a single subsystem.
///
/// The result carries block-incoherence certification by construction. An
/// incomplete family is still returned; check [`KrausChannel::is_complete`].
pub fn make_block_incoherent_kraus(
    structure: &MultipartiteBlockStructure,
    index_functions: &[Vec<usize>],
    matrices: &[CMatrix],
) -> Result<KrausChannel> {
    if structure.layout.len() != 1 {
        return Err(Error::InvalidMeasurement("expected a single-subsystem structure".into()));
    }
    if index_functions.len() != matrices.len() {
        return Err(Error::InvalidMeasurement(format!(
            "{} index functions but {} matrices",
            index_functions.len(),
            matrices.len()
        )));
    }
    let m = &structure.measurements[0];
    let (d, dim) = (m.block_count(), m.local_dim());
    let ps = m.projectors();
    let ops = index_functions
        .iter()
        .zip(matrices)
        .map(|(f, cl)| {
            if f.len() != d || f.iter().any(|&j| j >= d) {
                return Err(Error::InvalidMeasurement(format!("index function {f:?} is not a map on {d} blocks")));
            }
            if cl.nrows() != dim || cl.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: cl.nrows() });
            }
            Ok((0..d).fold(CMatrix::zeros(dim, dim), |acc, i| acc + &ps[f[i]] * cl * &ps[i]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KrausChannel::new(structure.layout.clone(), ops)?.with_certification(structure.clone()))
}

/// Random complete block-incoherent channel on one subsystem.
///
/// The first index function is the identity and the rest are random
/// permutations, so `Σ K†K` is block diagonal and can be normalized away
/// without leaving the `Σ_i P_{f(i)} C P_i` form.
pub fn random_block_incoherent_kraus(
    structure: &MultipartiteBlockStructure,
    operator_count: usize,
    rng: &mut Rng,
) -> Result<KrausChannel> {
    let m = structure.measurements.first().ok_or(Error::EmptyInput("structure"))?;
    let (d, dim) = (m.block_count(), m.local_dim());
    let count = operator_count.max(1);
    let fs: Vec<Vec<usize>> = (0..count)
        .map(|l| {
            let mut f: Vec<usize> = (0..d).collect();
            if l > 0 {
                f.shuffle(rng);
            }
            f
        })
        .collect();
    let cs: Vec<CMatrix> = (0..count).map(|_| ginibre(dim, dim, rng)).collect();
    let raw = make_block_incoherent_kraus(structure, &fs, &cs)?;
    let t = raw.operators().iter().fold(CMatrix::zeros(dim, dim), |acc, k| acc + linalg::matmul(&k.adjoint(), k));
    let inv_sqrt = linalg::hermitian_map(&t, |x| 1.0 / x.max(tol::EIG_CLAMP).sqrt())?;
    let cs: Vec<CMatrix> = cs.iter().map(|cl| cl * &inv_sqrt).collect();
    make_block_incoherent_kraus(structure, &fs, &cs)
}

/// Product of independent random local block-incoherent channels.
pub fn random_product_block_incoherent_channel(
    structure: &MultipartiteBlockStructure,
    operators_per_site: usize,
    rng: &mut Rng,
) -> Result<KrausChannel> {
    let mut channel: Option<KrausChannel> = None;
    for (label, m) in structure.layout.labels().iter().zip(&structure.measurements) {
        let local = MultipartiteBlockStructure::single(label.clone(), m.clone());
        let ch = random_block_incoherent_kraus(&local, operators_per_site, rng)?;
        channel = Some(match channel {
            None => ch,
            Some(prev) => prev.tensor(&ch)?,
        });
    }
    Ok(channel.ok_or(Error::EmptyInput("structure"))?.with_certification(structure.clone()))
}

/// Outcome of sampling the block-incoherence condition on a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCertificate {
    pub passed: bool,
    pub trials: usize,
    /// Largest `max |Δ(Λ(σ)) − Λ(σ)|` observed.
    pub worst_residual: f64,
}

/// Applies `ch` to `trials` random block-incoherent states and checks that each
/// output is a fixed point of `Δ`.
///
/// Passing establishes the necessary fixed-point condition only; membership of
/// the outputs in the separable block-incoherent set is not decided.
pub fn verify_block_incoherent_channel(
    ch: &KrausChannel,
    structure: &MultipartiteBlockStructure,
    trials: usize,
    seed: u64,
) -> Result<ChannelCertificate> {
    structure.check_layout(ch.layout())?;
    ch.require_complete()?;
    let tree = SeedTree::new(seed);
    let s = default_mixture_size(structure);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let sigma = random_block_incoherent_state(structure, s, tree.child(t as u64).seed())?;
        let out = apply_channel(&sigma, ch)?;
        worst = worst.max(block_coherence_residual(&out, structure)?);
    }
    Ok(ChannelCertificate { passed: worst < tol::EQUAL, trials, worst_residual: worst })
}

/// Runs [`verify_block_incoherent_channel`] and attaches the certification on success.
pub fn certify_channel(
    ch: KrausChannel,
    structure: &MultipartiteBlockStructure,
    trials: usize,
    seed: u64,
) -> Result<(KrausChannel, ChannelCertificate)> {
    let cert = verify_block_incoherent_channel(&ch, structure, trials, seed)?;
    let ch = if cert.passed { ch.with_certification(structure.clone()) } else { ch };
    Ok((ch, cert))
}
