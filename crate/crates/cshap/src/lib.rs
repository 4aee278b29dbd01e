//! Concept-level exact Shapley attribution for time-series classifiers.
//!
//! The library decomposes a univariate signal into five human-interpretable
//! concepts (`Levels`, `Peaks`, `Scale`, `LF`, `HF`) per the algebra
//! `y = levels + peaks + scale * (lf + hf)`, trains or wraps a window
//! classifier, and scores each concept's contribution to every prediction by
//! exact coalition enumeration with background substitution. On top of the
//! per-window scores sit the diagnostic artifacts that drive model
//! development: global attribution summaries, local overlays, per-class
//! Levels histograms, and the window-size experiment that turns a diagnosed
//! concept reliance into a measured accuracy gain.
//!
//! ## Module map
//!
//! - [`signal`]: core value types and the recompose/substitute algebra
//! - [`changepoint`]: PELT with an RBF segment cost on a subsample grid
//! - [`decompose`]: the five-concept extraction pipeline
//! - [`dataset`]: trace ingestion, windowing, split policy, backgrounds
//! - [`synth`]: seeded corpus generator with stored ground truth
//! - [`model`]: classifier trait, 1-D conv net, levels oracle, external
//!   predictions adapter
//! - [`explain`]: the exact concept-Shapley engine and its permutation
//!   oracle
//! - [`report`]: SVG/CSV/JSON diagnostic artifacts
//! - [`config`] / [`pipeline`]: declarative run configuration and the
//!   stages behind the `cshap` binary
//!
//! ## Examples
//!
//! One runnable example per capability:
//!
//! ```bash
//! cargo run --example detect_changepoints      # PELT on a step signal
//! cargo run --example decompose_signal         # five concepts + conservation
//! cargo run --example synthetic_corpus         # corpus generation and split
//! cargo run --release --example train_classifier
//! cargo run --release --example explain_window # exact SHAP + oracle check
//! cargo run --release --example global_attribution
//! cargo run --release --example window_size_experiment
//! ```
//!
//! The `cshap` binary wires the same stages behind subcommands (`synth`,
//! `ingest`, `train`, `explain`, `report`, `experiment window-size`,
//! `verify`); see the README for the file formats.

pub mod changepoint;
pub mod config;
pub mod dataset;
pub mod decompose;
pub mod error;
pub mod explain;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod signal;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use signal::{recompose, substitute, ConceptId, ConceptMask, Decomposition, Signal};
