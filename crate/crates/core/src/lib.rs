//! Sketching quantum phase diagrams with low-depth Hamiltonian-variational
//! circuits: model Hamiltonians, exact simulators, warm-started VQE sweeps and
//! phase-transition detectors.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod exact_oracle;
pub mod flo_sim;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod qudit_sim;
pub mod vqe_engine;

pub use error::{Error, Result};
