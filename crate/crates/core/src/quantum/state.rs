use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::quantum::layout::SubsystemLayout;
use crate::tol;

/// Hermitian, unit-trace, positive semidefinite matrix carrying a subsystem layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: SubsystemLayout,
    matrix: CMatrix,
}

fn check_square(layout: &SubsystemLayout, m: &CMatrix) -> Result<()> {
    let dim = layout.total_dim();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: if m.nrows() != dim { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(layout: SubsystemLayout, matrix: CMatrix) -> Result<Self> {
        check_square(&layout, &matrix)?;
        let residual = linalg::hermiticity_residual(&matrix);
        if residual > tol::HERMITIAN {
            return Err(Error::NotHermitian { residual });
        }
        let tr = linalg::trace(&matrix);
        if (tr - c(1.0, 0.0)).norm() > tol::TRACE {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = linalg::eigvalsh(&matrix)?.into_iter().fold(f64::INFINITY, f64::min);
        if min < -tol::PSD {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self::from_parts(layout, matrix))
    }

    /// Wraps a matrix known to be a state, symmetrizing away round-off.
    pub(crate) fn from_parts(layout: SubsystemLayout, mut matrix: CMatrix) -> Self {
        linalg::hermitize_in_place(&mut matrix);
        Self { layout, matrix }
    }

    /// `|psi><psi|` after normalizing `psi`.
    pub fn pure(layout: SubsystemLayout, psi: &CVector) -> Result<Self> {
        if psi.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: psi.len() });
        }
        let norm = psi.norm();
        if norm < tol::EIG_CLAMP {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = psi.map(|z| z / norm);
        Ok(Self::from_parts(layout, linalg::outer(&v, &v)))
    }

    /// Product of computational basis projectors, one digit per subsystem.
    pub fn basis_state(layout: SubsystemLayout, digits: &[usize]) -> Result<Self> {
        if digits.len() != layout.len() || digits.iter().zip(layout.dims()).any(|(&x, &d)| x >= d) {
            return Err(Error::InvalidState(format!("basis digits {digits:?} invalid for {layout}")));
        }
        let idx = layout.index_from_digits(digits);
        let v = linalg::basis_vector(layout.total_dim(), idx);
        Self::pure(layout, &v)
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        let m = linalg::identity(d).map(|z| z / d as f64);
        Self { layout, matrix: m }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn relabel<S: Into<String>>(&self, labels: Vec<S>) -> Result<Self> {
        Ok(Self { layout: self.layout.relabel(labels)?, matrix: self.matrix.clone() })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest absolute entrywise difference to `other`.
    pub fn max_distance(&self, other: &DensityMatrix) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }
}

/// Unitary matrix carrying a subsystem layout.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    layout: SubsystemLayout,
    matrix: CMatrix,
}

impl UnitaryOperator {
    pub fn new(layout: SubsystemLayout, matrix: CMatrix) -> Result<Self> {
        check_square(&layout, &matrix)?;
        let residual = linalg::unitarity_residual(&matrix);
        if residual > tol::UNITARY {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self { layout, matrix })
    }

    pub fn identity(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self { layout, matrix: linalg::identity(d) }
    }

    /// Embeds a local unitary acting on `label` into `layout`.
    pub fn local(layout: &SubsystemLayout, label: &str, local: &UnitaryOperator) -> Result<Self> {
        let matrix = embed_local(layout, label, &local.matrix)?;
        Ok(Self { layout: layout.clone(), matrix })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.matrix)
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.adjoint() }
    }
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on `label`.
pub fn embed_local(layout: &SubsystemLayout, label: &str, op: &CMatrix) -> Result<CMatrix> {
    let pos = layout.index_of(label)?;
    let d = layout.dims()[pos];
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: op.nrows() });
    }
    let left: usize = layout.dims()[..pos].iter().product();
    let right: usize = layout.dims()[pos + 1..].iter().product();
    Ok(linalg::kron(&linalg::kron(&linalg::identity(left), op), &linalg::identity(right)))
}
