//! Numerical thresholds shared across the crate.
//!
//! All values assume double precision on Hilbert spaces of dimension at most a
//! few hundred.

/// Eigenvalues below this are treated as zero.
pub const EIG_CLAMP: f64 = 1e-12;
/// Weight of `rho` on the kernel of `sigma` above which relative entropy diverges.
pub const SUPPORT: f64 = 1e-10;
pub const HERMITIAN: f64 = 1e-10;
pub const UNITARY: f64 = 1e-10;
pub const TRACE: f64 = 1e-10;
pub const PSD: f64 = 1e-9;
pub const ENTROPY: f64 = 1e-8;
pub const EIGENVALUE: f64 = 1e-9;
pub const EQUAL: f64 = 1e-9;
/// Outcomes with smaller probability are flagged degenerate.
pub const PROBABILITY: f64 = 1e-12;
/// Maximum width of an entanglement interval that counts as a certified value.
pub const CERTIFY: f64 = 1e-7;

/// Residual allowed for state identities checked entrywise after a protocol run.
pub const STATE_IDENTITY: f64 = 1e-10;
/// Agreement required between entanglement and block-coherence values.
pub const CHAIN: f64 = 1e-8;
