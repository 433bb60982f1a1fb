//! Truncated Fock-space states, channels and scalar metrics.
//!
//! Every state here lives on the photon-number basis |0⟩ … |dim−1⟩. Constructors
//! that expand an infinite-dimensional state renormalize after truncation and
//! log a warning when less than 99.9% of the norm fits.

mod density;
mod loss;
mod squeeze;
mod vector;

pub use density::{
    density_from_pure, fidelity, mean_photon_number, parity, DensityMatrix, Tolerances,
};
pub(crate) use density::expectation_in;
pub use loss::apply_loss;
pub use squeeze::{n_qc_from_squeeze, SqueezeFactor};
pub(crate) use vector::cat_state;
pub use vector::{
    cat_normalization, coherent_amplitudes, coherent_state, even_cat, odd_cat, squeezed_vacuum,
    subtract_photon, CatParity, FockVector, LEAKAGE_THRESHOLD,
};
