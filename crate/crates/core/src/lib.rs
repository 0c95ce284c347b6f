//! Semisupervised hyperspectral unmixing with a library-based archetypal
//! model.
//!
//! Endmembers are convex combinations of spectral library atoms, `E = D·B`,
//! and abundances lie on the probability simplex. A center penalty pulls the
//! endmembers toward the data mean, shrinking the simplex they span. The
//! nonconvex problem is solved by cyclic descent over two ADMM blocks whose
//! subproblems share one closed-form equality-constrained kernel ([`quec`]).

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod metrics;
pub mod quec;
pub mod simulate;
pub mod solver;
pub mod types;

pub use error::{Result, UnmixError};
pub use types::{
    mean_spectrum, objective_misisun, AbundanceMatrix, EndmemberMatrix, HsiMatrix, MixingMatrix,
    SolveResult, SolverConfig, SpectralLibrary,
};
