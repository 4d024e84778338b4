//! Exact computations for multi-marginal martingale optimal transport on the
//! real line: convex order, irreducible decompositions, shadows, the
//! left-monotone transport and the discrete primal/dual problem.

pub mod coupling;
pub mod decomposition;
pub mod error;
pub mod gallery;
pub mod instances;
pub mod json;
pub mod geometry;
pub mod lpsolver;
pub mod measure;
pub mod rational;
pub mod shadow;

pub use coupling::{KernelPolicy, PathMeasure};
pub use decomposition::{decompose_chain, decompose_step, StepDecomposition};
pub use error::{MotError, Result};
pub use measure::DiscreteMeasure;
pub use rational::Rational;
pub use shadow::{obstructed_shadow, shadow};
