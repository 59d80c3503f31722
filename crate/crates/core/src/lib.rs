//! Discrete spectra of N-fermion Hamiltonians from a two-particle dummy
//! Hamiltonian.
//!
//! The pipeline builds the dummy matrix `E` over antisymmetric pair states,
//! optionally in a Hartree-Fock orbital basis, truncates it at a mode index
//! `alpha_bar`, lifts it to `N` particles through combinatorial matrix-element
//! formulas, splits the result into independent blocks and diagonalizes each
//! block. A brute-force tensor-space implementation in [`oracle`] serves as
//! ground truth for every stage at small sizes.

pub mod assemble;
pub mod blocks;
pub mod error;
pub mod hartree_fock;
pub mod io;
pub mod occupation;
pub mod oracle;
pub mod signcoeff;
pub mod spectra;
pub mod truncate;
pub mod twobody;

pub use error::{Error, Result};
pub use occupation::{
    binomial, classify_difference, decompose, enumerate_bzf, BzfBasis, DifferenceClass, DifferenceSequence,
    IndexSequence, OccupationSequence,
};
pub use signcoeff::{coefficient, parity_oracle, SignCache, SignCoefficient};
pub use truncate::TruncatedDummyMatrix;
pub use twobody::{DummyMatrix, DummyModel, OneBodyModel, PairInteraction};
