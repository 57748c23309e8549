//! Equivalence, local identifiability and exponential-family parametrization
//! of hidden Markov models written as Y-valued transition matrices.
//!
//! A model is a family `(W_y)` of nonnegative `d x d` matrices whose sum is
//! column-stochastic; `W_y(x|x')` sits at row `x`, column `x'`.

pub mod equivalence;
pub mod error;
pub mod expfam;
pub mod indep;
pub mod io;
pub mod model;
pub mod numerics;
pub mod observables;
pub mod settings;
pub mod tangent;

pub use error::{Error, Result};
pub use model::{Distribution, IndepModel, YTransitionModel};
pub use numerics::{Matrix, Subspace, Vector};
pub use settings::Settings;
