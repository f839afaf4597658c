//! Reference computations that share no code with the library: entrywise
//! Kronecker products, index-loop partial traces, a Jacobi eigensolver and a
//! Nelder–Mead minimizer.

#![allow(dead_code)]

use blockres::linalg::{c, CMatrix};
use num_complex::Complex64;

pub fn kron_oracle(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (p, q) = (b.nrows(), b.ncols());
    let mut out = CMatrix::zeros(a.nrows() * p, a.ncols() * q);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            for k in 0..p {
                for l in 0..q {
                    out[(i * p + k, j * q + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

fn digits(mut x: usize, dims: &[usize]) -> Vec<usize> {
    let mut d = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        d[k] = x % dims[k];
        x /= dims[k];
    }
    d
}

fn undigits(d: &[usize], dims: &[usize]) -> usize {
    d.iter().zip(dims).fold(0, |acc, (&x, &n)| acc * n + x)
}

/// Keeps subsystems at positions `keep` (ascending) by summing matching traced indices.
pub fn partial_trace_oracle(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let kept: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let kd: usize = kept.iter().product();
    let mut out = CMatrix::zeros(kd, kd);
    let total: usize = dims.iter().product();
    for r in 0..total {
        let dr = digits(r, dims);
        for s in 0..total {
            let ds = digits(s, dims);
            let traced_equal = (0..dims.len()).filter(|k| !keep.contains(k)).all(|k| dr[k] == ds[k]);
            if traced_equal {
                let rr: Vec<usize> = keep.iter().map(|&k| dr[k]).collect();
                let ss: Vec<usize> = keep.iter().map(|&k| ds[k]).collect();
                out[(undigits(&rr, &kept), undigits(&ss, &kept))] += m[(r, s)];
            }
        }
    }
    out
}

/// `Σ (⊗_k P^k_{i_k}) ρ (⊗_k P^k_{i_k})` over every joint index.
pub fn dephase_oracle(m: &CMatrix, projectors: &[Vec<CMatrix>]) -> CMatrix {
    let counts: Vec<usize> = projectors.iter().map(Vec::len).collect();
    let joint: usize = counts.iter().product();
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for x in 0..joint {
        let idx = digits(x, &counts);
        let p = idx
            .iter()
            .enumerate()
            .fold(CMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, (k, &i)| kron_oracle(&acc, &projectors[k][i]));
        out += &p * m * &p;
    }
    out
}

/// Cyclic Jacobi rotations on a real symmetric matrix; returns eigenvalues and eigenvector columns.
pub fn jacobi_real(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = cs * vkp - sn * vkq;
                    row[q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Eigenvalues of a Hermitian matrix through its real `2n` embedding.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let real: Vec<Vec<f64>> = (0..2 * n)
        .map(|r| {
            (0..2 * n)
                .map(|s| {
                    let z = (m[(r % n, s % n)] + m[(s % n, r % n)].conj()) * 0.5;
                    match (r < n, s < n) {
                        (true, true) | (false, false) => z.re,
                        (true, false) => -z.im,
                        (false, true) => z.im,
                    }
                })
                .collect()
        })
        .collect();
    let (mut vals, _) = jacobi_real(real);
    vals.sort_by(f64::total_cmp);
    vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

pub fn entropy_oracle(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).into_iter().filter(|&x| x > 1e-14).map(|x| -x * x.log2()).sum()
}

/// `tr(ρ log₂ σ)` for Hermitian positive-definite `σ` via its eigenvectors.
fn trace_rho_log_sigma(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let n = sigma.nrows();
    let real: Vec<Vec<f64>> = (0..2 * n)
        .map(|r| {
            (0..2 * n)
                .map(|s| {
                    let z = sigma[(r % n, s % n)];
                    match (r < n, s < n) {
                        (true, true) | (false, false) => z.re,
                        (true, false) => -z.im,
                        (false, true) => z.im,
                    }
                })
                .collect()
        })
        .collect();
    let (vals, vecs) = jacobi_real(real);
    // each complex eigenpair appears twice; halve the total
    let mut acc = 0.0;
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let w: Vec<Complex64> = (0..n).map(|i| c(vecs[i][k], vecs[i + n][k])).collect();
        let mut quad = c(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                quad += w[i].conj() * rho[(i, j)] * w[j];
            }
        }
        acc += quad.re * lambda.log2();
    }
    0.5 * acc
}

pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() < tol * 1e-3 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best])
}

/// Block-diagonal `σ = ⊕_i L_i L_i† / tr` from lower-triangular parameters.
fn block_diagonal_from_params(x: &[f64], ranks: &[usize]) -> CMatrix {
    let dim: usize = ranks.iter().sum();
    let mut sigma = CMatrix::zeros(dim, dim);
    let mut offset = 0;
    let mut k = 0;
    for &r in ranks {
        let mut l = CMatrix::zeros(r, r);
        for i in 0..r {
            for j in 0..=i {
                if i == j {
                    l[(i, j)] = c(x[k], 0.0);
                    k += 1;
                } else {
                    l[(i, j)] = c(x[k], x[k + 1]);
                    k += 2;
                }
            }
        }
        let block = &l * l.adjoint();
        for i in 0..r {
            for j in 0..r {
                sigma[(offset + i, offset + j)] = block[(i, j)];
            }
        }
        offset += r;
    }
    let tr: f64 = (0..dim).map(|i| sigma[(i, i)].re).sum();
    sigma.map(|z| z / tr)
}

pub fn block_param_count(ranks: &[usize]) -> usize {
    ranks.iter().map(|r| r * r).sum()
}

/// `min_σ S(ρ‖σ)` over states block-diagonal for contiguous blocks of the given ranks.
pub fn min_relative_entropy_to_block_diagonal(rho: &CMatrix, ranks: &[usize], restarts: usize, seed: u64) -> f64 {
    let s_rho = entropy_oracle(rho);
    let objective = |x: &[f64]| -> f64 {
        let sigma = block_diagonal_from_params(x, ranks);
        let t = trace_rho_log_sigma(rho, &sigma);
        if t.is_finite() {
            -s_rho - t
        } else {
            f64::INFINITY
        }
    };
    let n = block_param_count(ranks);
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut uniform = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1u64 << 53) as f64)
    };
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let x0: Vec<f64> = (0..n).map(|_| 0.2 + uniform()).collect();
        let (mut x, mut v) = nelder_mead(&objective, &x0, 0.3, 4000, 1e-6);
        // restart from the incumbent with a shrinking simplex until it stops improving
        for step in [0.1, 0.03, 0.01, 0.003] {
            let (x2, v2) = nelder_mead(&objective, &x, step, 4000, 1e-6);
            if v2 < v {
                x = x2;
                v = v2;
            }
        }
        best = best.min(v);
    }
    best
}
