//! JSON encoding of complex matrices: row-major nested arrays of `[re, im]` pairs.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;
pub type JsonVector = Vec<[f64; 2]>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != m) {
        return Err(Error::Scenario {
            path: format!("[{bad}]"),
            message: format!("row has {} entries, expected {m}", rows[bad].len()),
        });
    }
    Ok(CMatrix::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn vector_to_json(v: &CVector) -> JsonVector {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vector_from_json(v: &JsonVector) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| c(p[0], p[1])))
}

/// Hex SHA-256 of the canonical JSON serialization of `m`.
pub fn matrix_digest(m: &CMatrix) -> String {
    let canonical = serde_json::to_string(&matrix_to_json(m)).expect("matrix serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}
