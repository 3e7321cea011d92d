//! Toolkit for analyzing participatory budgeting elections.
//!
//! The crate is organized around a pipeline:
//!
//! 1. [`pbformat`] parses, validates, and serializes `.pb` election files;
//! 2. [`model`] turns a parsed file into a semantic [`model::Election`]
//!    (projects, voters, exact rational scores, budget) and assembles
//!    citywide/districtwise scheme elections from groups of files;
//! 3. [`rules`] runs the budgeted voting rules: Utilitarian Greedy and the
//!    Method of Equal Shares with its U / Eps / Add1 / Add1U completions;
//! 4. [`metrics`] computes fairness and efficiency metrics on outcomes;
//! 5. [`geometry`] builds Jaccard distance matrices and 2D embeddings for
//!    election maps;
//! 6. [`cli`] wires everything into batch commands with JSON/CSV reports.
//!
//! All rule execution and metric computation uses exact rational arithmetic
//! ([`Rat`]); floating point appears only inside the MDS embedding and at
//! report emission (fixed six decimal places).
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod cli;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod pbformat;
pub mod rational;
pub mod rules;

pub use rational::Rat;
