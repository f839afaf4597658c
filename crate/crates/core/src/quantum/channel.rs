use crate::block::MultipartiteBlockStructure;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quantum::layout::SubsystemLayout;
use crate::quantum::state::{embed_local, UnitaryOperator};
use crate::tol;

/// Finite family of Kraus operators on a layout.
///
/// Completeness is measured at construction but not enforced, so that callers
/// can inspect a family that fails to sum to the identity. Applying an
/// incomplete channel is an error.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    layout: SubsystemLayout,
    operators: Vec<CMatrix>,
    completeness_residual: f64,
    certified_against: Option<MultipartiteBlockStructure>,
}

impl KrausChannel {
    pub fn new(layout: SubsystemLayout, operators: Vec<CMatrix>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::EmptyInput("Kraus operator list"));
        }
        let d = layout.total_dim();
        for k in &operators {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: k.nrows() });
            }
        }
        let completeness_residual = completeness_residual(&operators, d);
        Ok(Self { layout, operators, completeness_residual, certified_against: None })
    }

    pub fn identity(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self::new(layout, vec![linalg::identity(d)]).expect("identity channel")
    }

    pub fn from_unitary(u: &UnitaryOperator) -> Self {
        Self::new(u.layout().clone(), vec![u.matrix().clone()]).expect("unitary channel")
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `max |Σ K†K − I|`.
    pub fn completeness_residual(&self) -> f64 {
        self.completeness_residual
    }

    pub fn is_complete(&self) -> bool {
        self.completeness_residual <= tol::UNITARY
    }

    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::IncompleteChannel { residual: self.completeness_residual })
        }
    }

    /// Structure against which block-incoherence was established, if any.
    pub fn certified_against(&self) -> Option<&MultipartiteBlockStructure> {
        self.certified_against.as_ref()
    }

    pub fn is_certified_block_incoherent(&self) -> bool {
        self.certified_against.is_some()
    }

    pub fn with_certification(mut self, structure: MultipartiteBlockStructure) -> Self {
        self.certified_against = Some(structure);
        self
    }

    /// Lifts a single-subsystem channel onto `label` of a larger layout.
    pub fn embed(&self, layout: &SubsystemLayout, label: &str) -> Result<Self> {
        if self.layout.len() != 1 {
            return Err(Error::InvalidLayout("only single-subsystem channels can be embedded".into()));
        }
        let ops = self.operators.iter().map(|k| embed_local(layout, label, k)).collect::<Result<Vec<_>>>()?;
        Self::new(layout.clone(), ops)
    }

    /// Channel `self ∘ first`: Kraus operators `K_a L_b`.
    pub fn after(&self, first: &KrausChannel) -> Result<Self> {
        if self.layout != first.layout {
            return Err(Error::LayoutMismatch { expected: self.layout.to_string(), found: first.layout.to_string() });
        }
        let ops =
            self.operators.iter().flat_map(|k| first.operators.iter().map(move |l| linalg::matmul(k, l))).collect();
        Self::new(self.layout.clone(), ops)
    }

    /// Product channel on the concatenated layout.
    pub fn tensor(&self, other: &KrausChannel) -> Result<Self> {
        let layout = SubsystemLayout::concat([&self.layout, &other.layout])?;
        let ops = self.operators.iter().flat_map(|k| other.operators.iter().map(move |l| linalg::kron(k, l))).collect();
        Self::new(layout, ops)
    }
}

fn completeness_residual(ops: &[CMatrix], d: usize) -> f64 {
    let sum = ops.iter().fold(CMatrix::zeros(d, d), |acc, k| acc + linalg::matmul(&k.adjoint(), k));
    linalg::max_abs_diff(&sum, &linalg::identity(d))
}
