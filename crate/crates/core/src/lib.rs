//! Simulator for the interconversion of block coherence and multipartite
//! entanglement.
//!
//! The crate builds block-incoherent unitaries that spread the block coherence
//! of a single system over ancillas, runs the local measurement-and-feedback
//! protocol that brings it back, and checks the entropic identities and bounds
//! that hold along the way.

pub mod block;
pub mod conversion;
pub mod error;
pub mod harness;
pub mod lbicc;
pub mod linalg;
pub mod measures;
pub mod quantum;
pub mod rng;
pub mod serial;
pub mod tol;

pub use block::{BlockMeasurement, MultipartiteBlockStructure};
pub use error::{Error, Result};
pub use measures::EntanglementSandwich;
pub use quantum::{Bipartition, DensityMatrix, KrausChannel, OutcomePolicy, SubsystemLayout, UnitaryOperator};
