//! Feature construction for tabular physics data with grammar-guided
//! genetic programming.
//!
//! Candidate features are typed expression trees. A context-free grammar over
//! unit types (energy, angle, dimensionless, ...) decides which combinations
//! are dimensionally consistent, and an optional transition model biases
//! which operator may follow which. Individuals are scored by the
//! cross-validated accuracy of a classifier trained on the base columns plus
//! the constructed ones (wrapper fitness), or by an interval class-entropy
//! score (filter fitness).
//!
//! Modules follow the pipeline:
//!
//! * [`grammar`]: grammar and transition-model parsing, validation and
//!   child distributions.
//! * [`tree`]: expression trees, sampling, type checking, evaluation,
//!   rendering and node weights.
//! * [`evolve`]: population initialization, genetic operators, selection and
//!   the generation loop.
//! * [`fitness`]: classifiers, cross-validation, entropy filter.
//! * [`data`]: typed CSV datasets, splitting, export and histograms.
//! * [`run`]: one end-to-end run producing a [`run::RunReport`].

pub mod data;
pub mod error;
pub mod evolve;
pub mod fitness;
pub mod grammar;
pub mod rng;
pub mod run;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
