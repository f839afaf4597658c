//! Seeded random states and unitaries (Ginibre / Haar ensembles).

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::quantum::layout::SubsystemLayout;
use crate::quantum::state::DensityMatrix;
use crate::rng::{rng_from_seed, Rng};

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut Rng) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase fix on `R`'s diagonal.
pub fn random_unitary(dim: usize, rng: &mut Rng) -> CMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `G G† / tr(G G†)` with `G` a `dim × rank` Ginibre matrix.
pub fn random_density_matrix(layout: &SubsystemLayout, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let dim = layout.total_dim();
    if rank == 0 || rank > dim {
        return Err(Error::RankOutOfRange { rank, dim });
    }
    let mut rng = rng_from_seed(seed);
    Ok(density_from_ginibre(layout, &ginibre(dim, rank, &mut rng)))
}

pub(crate) fn random_density_with(layout: &SubsystemLayout, rank: usize, rng: &mut Rng) -> DensityMatrix {
    density_from_ginibre(layout, &ginibre(layout.total_dim(), rank, rng))
}

fn density_from_ginibre(layout: &SubsystemLayout, g: &CMatrix) -> DensityMatrix {
    let m = g * g.adjoint();
    let tr = linalg::trace(&m).re;
    DensityMatrix::from_parts(layout.clone(), m.map(|z| z / tr))
}

pub fn random_pure_state(layout: &SubsystemLayout, seed: u64) -> DensityMatrix {
    random_density_matrix(layout, 1, seed).expect("rank 1 is always valid")
}
