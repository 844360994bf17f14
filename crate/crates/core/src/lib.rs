//! Numerical toolkit for sparse random factor graphs and their Gibbs measures.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`] and [`exact`]: factor graphs, weight functions and exhaustive
//!   enumeration of the Gibbs measure (the reference oracle for everything else).
//! - [`random`]: the Poisson random factor graph model and named presets.
//! - [`tree`]: Galton–Watson factor trees, depth-`ℓ` neighbourhoods and
//!   canonical isomorphism codes.
//! - [`bp`], [`popdyn`], [`transport`]: Belief Propagation on graphs and trees,
//!   population dynamics on the simplex and the Wasserstein distance between
//!   populations.
//! - [`bethe`]: Bethe free energy (tree and Poissonized forms), exact free
//!   energies and the Aizenman–Simms–Starr increments.
//! - [`cut`] and [`regularity`]: the cut metric on measures over `Ω^n` and the
//!   regularity decomposition.
//! - [`diagnostics`]: replica-symmetry, non-reconstruction, local-structure and
//!   cavity statistics.
//!
//! Every stochastic entry point takes an explicit 64-bit seed; see [`rng`].

pub mod bethe;
pub mod bp;
pub mod cut;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod json;
pub mod lp;
pub mod model;
pub mod popdyn;
pub mod random;
pub mod regularity;
pub mod rng;
pub mod stats;
pub mod transport;
pub mod tree;

pub use error::{Error, Result};
pub use model::{Assignment, DiscreteMeasure, FactorGraph, SpinAlphabet, WeightFunction};
pub use random::ModelSpec;
pub use stats::Estimate;
