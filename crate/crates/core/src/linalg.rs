//! Dense complex matrix helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a sequence, nesting left to right.
pub fn kron_all<'a, I>(factors: I) -> CMatrix
where
    I: IntoIterator<Item = &'a CMatrix>,
{
    factors.into_iter().fold(CMatrix::from_element(1, 1, ONE), |acc, f| acc.kronecker(f))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `a` by `(a + a†)/2` without allocating.
pub fn hermitize_in_place(a: &mut CMatrix) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let z = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
        a[(j, j)] = c(a[(j, j)].re, 0.0);
    }
}

/// `max |U U^† - I|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    max_abs_diff(&matmul(u, &u.adjoint()), &identity(u.nrows()))
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `A X A^†`.
pub fn sandwich(a: &CMatrix, x: &CMatrix) -> CMatrix {
    matmul(&matmul(a, x), &a.adjoint())
}

/// Below this many multiply-adds the direct complex product is used.
const SPLIT_PRODUCT_WORK: usize = 1 << 15;

/// At most this many nonzeros per column on average selects the sparse product.
const SPARSE_FILL: usize = 8;

fn is_sparse(m: &CMatrix) -> bool {
    m.iter().filter(|z| **z != ZERO).count() <= SPARSE_FILL * m.ncols().max(m.nrows())
}

/// Complex product evaluated as four real products, which run through the
/// blocked real kernel instead of the generic complex loop.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    if a.nrows() * a.ncols() * b.ncols() < SPLIT_PRODUCT_WORK {
        return a * b;
    }
    if is_sparse(a) {
        let mut out = CMatrix::zeros(a.nrows(), b.ncols());
        for k in 0..a.ncols() {
            for i in 0..a.nrows() {
                let z = a[(i, k)];
                if z != ZERO {
                    for j in 0..b.ncols() {
                        out[(i, j)] += z * b[(k, j)];
                    }
                }
            }
        }
        return out;
    }
    if is_sparse(b) {
        let mut out = CMatrix::zeros(a.nrows(), b.ncols());
        for j in 0..b.ncols() {
            for k in 0..b.nrows() {
                let z = b[(k, j)];
                if z != ZERO {
                    let mut col = out.column_mut(j);
                    col.axpy(z, &a.column(k), ONE);
                }
            }
        }
        return out;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMatrix::from_fn(a.nrows(), b.ncols(), |r, s| c(re[(r, s)], im[(r, s)]))
}

/// Spectral decomposition of a Hermitian matrix. Eigenvalues are returned
/// unsorted alongside the eigenvector columns.
pub fn eigh(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let mut herm = a.clone();
    hermitize_in_place(&mut herm);
    let n = herm.nrows();
    let mut values = Vec::with_capacity(n);
    let mut vectors = CMatrix::zeros(n, n);
    for comp in coupled_components(&herm) {
        let sub = CMatrix::from_fn(comp.len(), comp.len(), |r, s| herm[(comp[r], comp[s])]);
        let (vals, vecs) = eigh_dense(sub)?;
        for (k, v) in vals.into_iter().enumerate() {
            for (r, &i) in comp.iter().enumerate() {
                vectors[(i, values.len())] = vecs[(r, k)];
            }
            values.push(v);
        }
    }
    Ok((values, vectors))
}

/// Index sets that the nonzero pattern of `a` never connects.
fn coupled_components(a: &CMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for s in 0..n {
        for r in s + 1..n {
            if a[(r, s)] != ZERO {
                let (x, y) = (root(&mut parent, r), root(&mut parent, s));
                parent[x] = y;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn eigh_dense(a: CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if a.nrows() == 1 {
        return Ok((vec![a[(0, 0)].re], CMatrix::identity(1, 1)));
    }
    if let Some(eig) = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 100_000) {
        let finite = eig.eigenvalues.iter().all(|x| x.is_finite())
            && eig.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if finite {
            return Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors));
        }
    }
    eigh_real_embedding(&a)
}

/// Diagonalizes `[[Re A, -Im A], [Im A, Re A]]`; every eigenvalue of `A`
/// appears twice and `u + iv` recovers the complex eigenvectors.
fn eigh_real_embedding(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    let m = DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, s| {
        let z = a[(r % n, s % n)];
        match (r < n, s < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 100_000).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<CVector> = Vec::with_capacity(n);
    for k in order {
        if values.len() == n {
            break;
        }
        let col = eig.eigenvectors.column(k);
        let mut w = CVector::from_fn(n, |i, _| c(col[i], col[i + n]));
        for v in &vectors {
            let overlap = v.dotc(&w);
            w -= v * overlap;
        }
        let norm = w.norm();
        if norm > 1e-2 {
            vectors.push(w / c(norm, 0.0));
            values.push(eig.eigenvalues[k]);
        }
    }
    if values.len() != n {
        return Err(Error::EigenFailure);
    }
    Ok((values, CMatrix::from_columns(&vectors)))
}

pub fn eigvalsh(a: &CMatrix) -> Result<Vec<f64>> {
    eigh(a).map(|(v, _)| v)
}

/// Outer product `|u><v|`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

pub fn basis_vector(dim: usize, index: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[index] = ONE;
    v
}

/// Hermitian matrix function via the spectral decomposition.
pub fn hermitian_map(a: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let (vals, vecs) = eigh(a)?;
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(vals.len(), vals.iter().map(|&x| c(f(x), 0.0))));
    Ok(matmul(&matmul(&vecs, &diag), &vecs.adjoint()))
}
