//! Forward conversion: spreading the block coherence of `A` over ancillas
//! `B1 … Bn` with a controlled block-shift unitary.
//!
//! Fine-grained ancillas are `d`-level systems with rank-1 blocks and receive
//! `|i+j mod d><j|` shifts; coarse-grained ancillas carry `d` blocks of rank `r`
//! and receive the block permutations `C_ij = Σ_n |n^(i+j mod d)><n^(j)|`.

use serde::{Deserialize, Serialize};

use crate::block::{block_dephase, is_block_diagonal};
use crate::block::{verify_block_incoherent_channel, BlockMeasurement, ChannelCertificate, MultipartiteBlockStructure};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::measures::{entanglement_sandwich, relative_entropy_block_coherence, EntanglementSandwich};
use crate::quantum::{
    apply_channel, apply_unitary, tensor_product, von_neumann_entropy, DensityMatrix, KrausChannel, SubsystemLayout,
    UnitaryOperator,
};

/// Resolution of the ancilla block measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AncillaMode {
    /// Rank-1 projectors on `d`-level ancillas.
    Fine,
    /// `d` projectors of rank `r` on `d·r`-level ancillas.
    Coarse { rank: usize },
}

/// System measurement, ancilla count and ancilla resolution of one conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionPlan {
    system: BlockMeasurement,
    ancilla_count: usize,
    mode: AncillaMode,
    pairing: Option<Vec<usize>>,
}

impl ConversionPlan {
    /// Fine-grained ancillas; the system blocks may have any ranks.
    pub fn fine(system: BlockMeasurement, ancilla_count: usize) -> Result<Self> {
        if ancilla_count == 0 {
            return Err(Error::PlanMismatch("at least one ancilla is required".into()));
        }
        Ok(Self { system, ancilla_count, mode: AncillaMode::Fine, pairing: None })
    }

    /// Coarse-grained ancillas; every system block must have rank `rank`.
    pub fn coarse(system: BlockMeasurement, ancilla_count: usize, rank: usize) -> Result<Self> {
        if ancilla_count == 0 {
            return Err(Error::PlanMismatch("at least one ancilla is required".into()));
        }
        if rank == 0 {
            return Err(Error::PlanMismatch("rank must be positive".into()));
        }
        let r = system.require_equal_rank()?;
        if r != rank {
            return Err(Error::PlanMismatch(format!("system blocks have rank {r}, plan rank is {rank}")));
        }
        Ok(Self { system, ancilla_count, mode: AncillaMode::Coarse { rank }, pairing: None })
    }

    /// Replaces the same-label pairing inside `C_ij` by `|π(n)^(i+j)><n^(j)|`.
    pub fn with_pairing(mut self, pairing: Vec<usize>) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if pairing.len() != r || pairing.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::PlanMismatch(format!("pairing {pairing:?} is not a permutation of 0..{r}")));
        }
        self.pairing = Some(pairing);
        Ok(self)
    }

    pub fn system(&self) -> &BlockMeasurement {
        &self.system
    }

    pub fn ancilla_count(&self) -> usize {
        self.ancilla_count
    }

    pub fn mode(&self) -> AncillaMode {
        self.mode
    }

    pub fn block_count(&self) -> usize {
        self.system.block_count()
    }

    /// Ancilla block rank (1 in fine mode).
    pub fn rank(&self) -> usize {
        match self.mode {
            AncillaMode::Fine => 1,
            AncillaMode::Coarse { rank } => rank,
        }
    }

    pub fn pairing(&self) -> Vec<usize> {
        self.pairing.clone().unwrap_or_else(|| (0..self.rank()).collect())
    }

    pub fn ancilla_measurement(&self) -> BlockMeasurement {
        BlockMeasurement::equal(self.block_count(), self.rank()).expect("positive block count and rank")
    }

    pub fn ancilla_dim(&self) -> usize {
        self.block_count() * self.rank()
    }

    pub fn layout(&self) -> SubsystemLayout {
        SubsystemLayout::system_with_ancillas(self.system.local_dim(), self.ancilla_dim(), self.ancilla_count)
            .expect("positive dimensions")
    }

    pub fn system_structure(&self) -> MultipartiteBlockStructure {
        MultipartiteBlockStructure::single("A", self.system.clone())
    }

    /// `P_A ⊗ P_B1 ⊗ … ⊗ P_Bn`.
    pub fn structure(&self) -> MultipartiteBlockStructure {
        let mut ms = vec![self.system.clone()];
        ms.extend(std::iter::repeat_n(self.ancilla_measurement(), self.ancilla_count));
        MultipartiteBlockStructure::new(self.layout(), ms).expect("dimensions agree by construction")
    }

    /// Ancilla vector correlated with system block `i` in the output:
    /// `|i>` (fine) or `|π(0)^(i)>` (coarse).
    pub fn ancilla_tag(&self, i: usize) -> CVector {
        let r = self.rank();
        linalg::basis_vector(self.ancilla_dim(), i * r + self.pairing()[0])
    }

    /// Initial ancilla vector `|0>` or `|0^(0)>`.
    pub fn ancilla_ground(&self) -> CVector {
        linalg::basis_vector(self.ancilla_dim(), 0)
    }

    pub fn to_spec(&self) -> PlanSpec {
        PlanSpec {
            d: self.block_count(),
            n: self.ancilla_count,
            mode: match self.mode {
                AncillaMode::Fine => ModeName::Fine,
                AncillaMode::Coarse { .. } => ModeName::Coarse,
            },
            r: Some(self.rank()),
            ranks_a: Some(self.system.ranks()),
            pairing: self.pairing.clone(),
        }
    }

    /// Builds a plan from its JSON form. The system blocks are contiguous
    /// unless `system` overrides them.
    pub fn from_spec(spec: &PlanSpec, system: Option<BlockMeasurement>) -> Result<Self> {
        let err = |path: &str, message: String| Error::Scenario { path: format!("plan.{path}"), message };
        if spec.d == 0 {
            return Err(err("d", "block count must be positive".into()));
        }
        if spec.n == 0 {
            return Err(err("n", "at least one ancilla is required".into()));
        }
        let r = spec.r.unwrap_or(1);
        if r == 0 {
            return Err(err("r", "rank must be positive".into()));
        }
        if spec.mode == ModeName::Fine && r != 1 {
            return Err(err("r", format!("fine mode uses rank-1 ancilla blocks, got r = {r}")));
        }
        let default_ranks = match spec.mode {
            ModeName::Fine => vec![1; spec.d],
            ModeName::Coarse => vec![r; spec.d],
        };
        let ranks = spec.ranks_a.clone().unwrap_or(default_ranks);
        if ranks.len() != spec.d {
            return Err(err("ranks_A", format!("{} blocks listed, plan has d = {}", ranks.len(), spec.d)));
        }
        if spec.mode == ModeName::Coarse && ranks.iter().any(|&x| x != r) {
            return Err(err("ranks_A", format!("coarse mode needs every block of rank r = {r}, got {ranks:?}")));
        }
        let system = match system {
            Some(m) => {
                if m.ranks() != ranks {
                    return Err(err(
                        "ranks_A",
                        format!("explicit system blocks have ranks {:?}, plan lists {ranks:?}", m.ranks()),
                    ));
                }
                m
            }
            None => BlockMeasurement::contiguous(&ranks).map_err(|e| err("ranks_A", e.to_string()))?,
        };
        let plan = match spec.mode {
            ModeName::Fine => Self::fine(system, spec.n)?,
            ModeName::Coarse => Self::coarse(system, spec.n, r)?,
        };
        match &spec.pairing {
            Some(p) => plan.with_pairing(p.clone()).map_err(|e| err("pairing", e.to_string())),
            None => Ok(plan),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Fine,
    Coarse,
}

/// JSON form `{"d", "n", "mode", "r", "ranks_A"}` of a [`ConversionPlan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub d: usize,
    pub n: usize,
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(rename = "ranks_A", default, skip_serializing_if = "Option::is_none")]
    pub ranks_a: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<Vec<usize>>,
}

/// `U = Σ_i P_i ⊗ S_i ⊗ … ⊗ S_i` for per-block ancilla operators `S_i`.
fn controlled_on_blocks(plan: &ConversionPlan, ancilla_ops: &[CMatrix]) -> Result<UnitaryOperator> {
    let dim = plan.layout().total_dim();
    let mut u = CMatrix::zeros(dim, dim);
    for (i, s) in ancilla_ops.iter().enumerate() {
        let mut term = plan.system.projector(i);
        for _ in 0..plan.ancilla_count {
            term = linalg::kron(&term, s);
        }
        u += term;
    }
    UnitaryOperator::new(plan.layout(), u)
}

/// `U_m = Σ_{i,j1…jn} P_i ⊗ |i+j1 mod d><j1| ⊗ … ⊗ |i+jn mod d><jn|`.
pub fn build_um_fine(plan: &ConversionPlan) -> Result<UnitaryOperator> {
    if plan.mode != AncillaMode::Fine {
        return Err(Error::PlanMismatch("fine-grained unitary requested for a coarse plan".into()));
    }
    let d = plan.block_count();
    let shifts: Vec<CMatrix> = (0..d)
        .map(|i| {
            (0..d).fold(CMatrix::zeros(d, d), |acc, j| {
                acc + linalg::outer(&linalg::basis_vector(d, (i + j) % d), &linalg::basis_vector(d, j))
            })
        })
        .collect();
    controlled_on_blocks(plan, &shifts)
}

/// The family `C_ij = Σ_n |π(n)^(i+j mod d)><n^(j)|`, indexed `[i][j]`.
pub fn transfer_maps(plan: &ConversionPlan) -> Vec<Vec<CMatrix>> {
    let d = plan.block_count();
    let anc = plan.ancilla_measurement();
    let pairing = plan.pairing();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let target = (i + j) % d;
                    pairing
                        .iter()
                        .enumerate()
                        .fold(CMatrix::zeros(anc.local_dim(), anc.local_dim()), |acc, (n, &pn)| {
                            acc + linalg::outer(anc.basis_vector(target, pn), anc.basis_vector(j, n))
                        })
                })
                .collect()
        })
        .collect()
}

/// `U_m^r = Σ_{i,j1…jn} P_i ⊗ P_{i+j1} C_{ij1} P_{j1} ⊗ … ⊗ P_{i+jn} C_{ijn} P_{jn}`.
pub fn build_um_coarse(plan: &ConversionPlan) -> Result<UnitaryOperator> {
    build_um_coarse_with_maps(plan, &transfer_maps(plan))
}

/// As [`build_um_coarse`] with a caller-supplied `C_ij` family.
pub fn build_um_coarse_with_maps(plan: &ConversionPlan, maps: &[Vec<CMatrix>]) -> Result<UnitaryOperator> {
    if !matches!(plan.mode, AncillaMode::Coarse { .. }) {
        return Err(Error::PlanMismatch("coarse-grained unitary requested for a fine plan".into()));
    }
    let d = plan.block_count();
    let ps = plan.ancilla_measurement().projectors();
    let per_block: Vec<CMatrix> = (0..d)
        .map(|i| {
            (0..d).fold(CMatrix::zeros(plan.ancilla_dim(), plan.ancilla_dim()), |acc, j| {
                acc + &ps[(i + j) % d] * &maps[i][j] * &ps[j]
            })
        })
        .collect();
    controlled_on_blocks(plan, &per_block)
}

/// The unitary matching the plan's mode.
pub fn build_unitary(plan: &ConversionPlan) -> Result<UnitaryOperator> {
    match plan.mode {
        AncillaMode::Fine => build_um_fine(plan),
        AncillaMode::Coarse { .. } => build_um_coarse(plan),
    }
}

fn system_state(rho_a: &DensityMatrix, plan: &ConversionPlan) -> Result<DensityMatrix> {
    if rho_a.layout().len() != 1 {
        return Err(Error::PlanMismatch(format!("input state has layout {}, expected one subsystem", rho_a.layout())));
    }
    if rho_a.dim() != plan.system.local_dim() {
        return Err(Error::DimensionMismatch { expected: plan.system.local_dim(), found: rho_a.dim() });
    }
    rho_a.relabel(vec!["A"])
}

/// `Σ_{ij} P_i ρ_A P_j ⊗ |t_i … t_i><t_j … t_j|` with `t_i` the ancilla tag.
pub fn closed_form_output(rho_a: &DensityMatrix, plan: &ConversionPlan) -> Result<DensityMatrix> {
    let rho = system_state(rho_a, plan)?;
    let d = plan.block_count();
    let ps = plan.system.projectors();
    let tags: Vec<CVector> = (0..d)
        .map(|i| {
            let t = plan.ancilla_tag(i);
            (1..plan.ancilla_count).fold(t.clone(), |acc, _| acc.kronecker(&t))
        })
        .collect();
    let dim = plan.layout().total_dim();
    let mut out = CMatrix::zeros(dim, dim);
    for i in 0..d {
        for j in 0..d {
            let block = &ps[i] * rho.matrix() * &ps[j];
            out += linalg::kron(&block, &linalg::outer(&tags[i], &tags[j]));
        }
    }
    Ok(DensityMatrix::from_parts(plan.layout(), out))
}

/// Quantities recorded by one forward conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardRecord {
    pub c_r_input_bits: f64,
    pub c_r_output_bits: f64,
    pub entropy_input_bits: f64,
    pub entropy_output_bits: f64,
    pub dephased_entropy_input_bits: f64,
    pub dephased_entropy_output_bits: f64,
    pub unitarity_residual: f64,
    pub sandwich: EntanglementSandwich,
}

/// Output state of a forward conversion with its record.
#[derive(Debug, Clone)]
pub struct ForwardRun {
    pub output: DensityMatrix,
    pub record: ForwardRecord,
}

/// Attaches the ground ancillas to `rho_a` and applies the plan's unitary.
pub fn convert_forward(rho_a: &DensityMatrix, plan: &ConversionPlan) -> Result<ForwardRun> {
    let rho = system_state(rho_a, plan)?;
    let ground = plan.ancilla_ground();
    let mut parts = vec![rho.clone()];
    for k in 1..=plan.ancilla_count {
        parts.push(DensityMatrix::pure(SubsystemLayout::single(format!("B{k}"), plan.ancilla_dim()), &ground)?);
    }
    let input = tensor_product(&parts)?;
    let u = build_unitary(plan)?;
    let output = apply_unitary(&input, &u)?;

    let sys = plan.system_structure();
    let full = plan.structure();
    let record = ForwardRecord {
        c_r_input_bits: relative_entropy_block_coherence(&rho, &sys)?,
        c_r_output_bits: relative_entropy_block_coherence(&output, &full)?,
        entropy_input_bits: von_neumann_entropy(&rho)?,
        entropy_output_bits: von_neumann_entropy(&output)?,
        dephased_entropy_input_bits: von_neumann_entropy(&block_dephase(&rho, &sys)?)?,
        dephased_entropy_output_bits: von_neumann_entropy(&block_dephase(&output, &full)?)?,
        unitarity_residual: u.unitarity_residual(),
        sandwich: entanglement_sandwich(&output, &full)?,
    };
    Ok(ForwardRun { output, record })
}

/// Applies a block-incoherent channel to `rho_a ⊗ ancillas` for arbitrary
/// block-incoherent ancilla states.
///
/// `structure` must start with the system subsystem and the channel must be
/// certified against it.
pub fn convert_with_ancillas(
    rho_a: &DensityMatrix,
    ancillas: &DensityMatrix,
    channel: &KrausChannel,
    structure: &MultipartiteBlockStructure,
) -> Result<DensityMatrix> {
    if channel.certified_against() != Some(structure) {
        return Err(Error::PlanMismatch("channel is not certified against this structure".into()));
    }
    let anc_labels: Vec<&str> = structure.layout().labels()[1..].iter().map(String::as_str).collect();
    let anc_structure = structure.restrict(&anc_labels)?;
    if !is_block_diagonal(ancillas, &anc_structure)? {
        return Err(Error::InvalidState("ancilla state is not block-incoherent".into()));
    }
    let input = tensor_product(&[rho_a.relabel(vec![structure.layout().labels()[0].clone()])?, ancillas.clone()])?;
    apply_channel(&input, channel)
}

/// Residuals of the matrix-element embedding of `ρ_A` in a forward output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    /// `max |<k^(i) t_i| out |l^(j) t_j> − <k^(i)|ρ_A|l^(j)>|`.
    pub element_residual: f64,
    /// Largest entry of the output outside the embedded subspace.
    pub off_support_residual: f64,
    /// `|S(out) − S(ρ_A)|`.
    pub entropy_residual: f64,
    /// `|S(Δ out) − S(Δ ρ_A)|`.
    pub dephased_entropy_residual: f64,
}

impl EmbeddingReport {
    pub fn max_residual(&self) -> f64 {
        self.element_residual
            .max(self.off_support_residual)
            .max(self.entropy_residual)
            .max(self.dephased_entropy_residual)
    }
}

pub fn verify_embedding(
    rho_a: &DensityMatrix,
    output: &DensityMatrix,
    plan: &ConversionPlan,
) -> Result<EmbeddingReport> {
    let rho = system_state(rho_a, plan)?;
    if output.layout() != &plan.layout() {
        return Err(Error::LayoutMismatch { expected: plan.layout().to_string(), found: output.layout().to_string() });
    }
    let d = plan.block_count();
    let sys = &plan.system;
    // columns |k^(i)> ⊗ |t_i…t_i> and |k^(i)>, in block order
    let mut embedded = Vec::new();
    let mut plain = Vec::new();
    for i in 0..d {
        let t = plan.ancilla_tag(i);
        let tag = (1..plan.ancilla_count).fold(t.clone(), |acc, _| acc.kronecker(&t));
        for v in sys.block(i) {
            embedded.push(v.kronecker(&tag));
            plain.push(v.clone());
        }
    }
    let w = CMatrix::from_columns(&embedded);
    let b = CMatrix::from_columns(&plain);
    let inner = linalg::matmul(&linalg::matmul(&w.adjoint(), output.matrix()), &w);
    let element_residual = linalg::max_abs_diff(&inner, &(b.adjoint() * rho.matrix() * &b));
    let off_support_residual =
        linalg::max_abs(&(output.matrix() - linalg::matmul(&linalg::matmul(&w, &inner), &w.adjoint())));

    let sys_s = plan.system_structure();
    let full = plan.structure();
    let entropy_residual = (von_neumann_entropy(output)? - von_neumann_entropy(&rho)?).abs();
    let dephased_entropy_residual = (von_neumann_entropy(&block_dephase(output, &full)?)?
        - von_neumann_entropy(&block_dephase(&rho, &sys_s)?)?)
    .abs();
    Ok(EmbeddingReport { element_residual, off_support_residual, entropy_residual, dephased_entropy_residual })
}

/// Unitarity, projector permutation and block-incoherence checks on the
/// coarse-grained unitary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitaryCertificate {
    pub unitarity_residual: f64,
    /// `max_{ij} |C_ij P_j C_ij† − P_{i+j mod d}|`.
    pub permutation_residual: f64,
    pub block_incoherence: ChannelCertificate,
    pub passed: bool,
}

/// Residual thresholds for [`unitary_certification_suite`].
pub const UNITARITY_BOUND: f64 = 1e-12;
pub const PERMUTATION_BOUND: f64 = 1e-12;

/// `max_{ij} |C_ij P_j C_ij† − P_{i+j mod d}|` for the given family.
pub fn projector_permutation_residual(plan: &ConversionPlan, maps: &[Vec<CMatrix>]) -> f64 {
    let d = plan.block_count();
    let ps = plan.ancilla_measurement().projectors();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let moved = linalg::sandwich(&maps[i][j], &ps[j]);
            worst = worst.max(linalg::max_abs_diff(&moved, &ps[(i + j) % d]));
        }
    }
    worst
}

/// Runs the unitary certificate with the canonical `C_ij` family.
///
/// A fine plan is treated as its rank-1 coarse counterpart.
pub fn unitary_certification_suite(plan: &ConversionPlan, trials: usize, seed: u64) -> Result<UnitaryCertificate> {
    unitary_certification_suite_with_maps(plan, &transfer_maps(plan), trials, seed)
}

pub fn unitary_certification_suite_with_maps(
    plan: &ConversionPlan,
    maps: &[Vec<CMatrix>],
    trials: usize,
    seed: u64,
) -> Result<UnitaryCertificate> {
    let coarse = match plan.mode {
        AncillaMode::Coarse { .. } => plan.clone(),
        AncillaMode::Fine => ConversionPlan { mode: AncillaMode::Coarse { rank: 1 }, ..plan.clone() },
    };
    let permutation_residual = projector_permutation_residual(&coarse, maps);
    let dim = coarse.layout().total_dim();
    // assemble without the unitarity gate so a corrupted family is still measured
    let d = coarse.block_count();
    let ps = coarse.ancilla_measurement().projectors();
    let mut u = CMatrix::zeros(dim, dim);
    for i in 0..d {
        let s = (0..d).fold(CMatrix::zeros(coarse.ancilla_dim(), coarse.ancilla_dim()), |acc, j| {
            acc + &ps[(i + j) % d] * &maps[i][j] * &ps[j]
        });
        let mut term = coarse.system.projector(i);
        for _ in 0..coarse.ancilla_count {
            term = linalg::kron(&term, &s);
        }
        u += term;
    }
    let unitarity_residual = linalg::unitarity_residual(&u);
    let block_incoherence = if unitarity_residual <= crate::tol::UNITARY {
        let ch = KrausChannel::new(coarse.layout(), vec![u])?;
        verify_block_incoherent_channel(&ch, &coarse.structure(), trials, seed)?
    } else {
        ChannelCertificate { passed: false, trials: 0, worst_residual: f64::INFINITY }
    };
    let passed =
        unitarity_residual < UNITARITY_BOUND && permutation_residual < PERMUTATION_BOUND && block_incoherence.passed;
    Ok(UnitaryCertificate { unitarity_residual, permutation_residual, block_incoherence, passed })
}
