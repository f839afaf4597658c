//! States, unitaries, channels and entropy functionals.

pub mod channel;
pub mod layout;
pub mod ops;
pub mod random;
pub mod state;

pub use channel::KrausChannel;
pub use layout::{Bipartition, SubsystemLayout};
pub use ops::{
    apply_channel, apply_unitary, measure_and_collapse, partial_trace, quantum_relative_entropy, spectrum_entropy,
    tensor_product, von_neumann_entropy, MeasurementOutcome, OutcomePolicy,
};
pub use random::{random_density_matrix, random_pure_state, random_unitary};
pub use state::{embed_local, DensityMatrix, UnitaryOperator};
