//! Exact diagonalization toolkit for kinetically constrained hard-core
//! boson models: fragmentation, chiral zero-mode counting, bound states and
//! dynamics.

/// Crate version, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod chiral;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod fragmentation;
pub mod io;
pub mod linalg;
pub mod models;
pub mod modp;
pub mod mpo;
pub mod presets;
pub mod state;
pub mod zeromode;

pub use chiral::{
    color, mismatch_asymptote, mismatch_closed_form, mismatch_formula, zero_mode_count,
    ChiralColoring, ChiralOperator, CountMethod, MismatchReport, Sublattice, ZeroModeCount,
};
pub use dynamics::{
    entanglement_entropy, evolve, spectrum, DegeneracyAnalysis, EntropyResult, LiftScanConfig,
    QuenchTrace, SpectrumReport,
};
pub use error::{KcmError, Result};
pub use fock::{enumerate_basis, FockState, Geometry, PaddingSpec, SectorBasis};
pub use fragmentation::{connected_components, sector_from_seed, FragmentationReport};
pub use models::{build_hamiltonian, build_perturbation, Family, ModelSpec, PerturbationSpec, SparseOperator};
pub use mpo::{east_west_mpo_state, MpoSpec};
pub use state::StateVector;
pub use zeromode::{
    certify_bound, find_bound_states, find_factorizable, theta_matrix, zero_mode_basis,
    BoundStateCertificate, ObservableSpec, ZeroModeBasis,
};
