//! Coalition inference in multilayer networks.
//!
//! A coalition here is a community that can span several relational contexts:
//! each context is a weighted undirected layer over a shared vertex registry,
//! and coupled layer pairs reward vertices that keep their community label
//! across layers. The crate provides
//!
//! * [`netmodel`] - the data model (registry, layers, partitions, parameters)
//!   and the CSV/JSON file formats,
//! * [`backbone`] - significance filtering of noisy edge weights,
//! * [`quality`] - multilayer modularity and the profile log-likelihood of a
//!   partition under a degree-corrected planted partition model,
//! * [`leiden`] - a seeded Leiden-style maximiser with per-layer community
//!   count caps,
//! * [`pipeline`] - grid initialisation, coordinate ascent model selection,
//!   consensus clustering, and the monolayer baseline,
//! * [`metrics`] - reduced mutual information, the adaptive external-internal
//!   index, layer similarity, participation and power shares,
//! * [`synth`] - planted-structure benchmark generators,
//! * [`report`] / [`cli`] - plot-ready tables and the command-line front end.

pub mod backbone;
pub mod cli;
pub mod error;
pub mod leiden;
pub mod metrics;
pub mod netmodel;
pub mod pipeline;
pub mod quality;
pub mod report;
pub mod rng;
pub mod special;
pub mod synth;

pub use error::CoalError;

pub type Result<T> = std::result::Result<T, CoalError>;

/// Tool version recorded in output metadata blocks.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
