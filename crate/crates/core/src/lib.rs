//! Abbreviation definition identification.
//!
//! The crate is split along the pipeline:
//!
//! - [`extract`] finds parenthetical definition sites (`LF (SF)` and `SF (LF)`),
//!   pairs short forms with long forms by character matching, and produces
//!   n-best long-form candidate lists for each site.
//! - [`index`] is a suffix array over a reference corpus. It counts how often a
//!   definition string such as `herpes simplex virus (HSV` occurs.
//! - [`rerank`] turns each candidate into a `(rank, charmatch, ln(1 + freq))`
//!   feature vector, scores it with a logistic-regression model and reorders
//!   the list. Twelve fitted models ship as presets; new ones can be trained.
//! - [`eval`] scores predictions against gold pairs and builds the diagnostic
//!   reports (rank histogram, charmatch conditionals, confidence).
//!
//! All text offsets are UTF-8 byte offsets into [`Document::text`].

pub mod document;
pub mod eval;
pub mod extract;
pub mod index;
pub mod rerank;

pub use document::{Document, Span};
pub use eval::{EvalReport, GoldSet};
pub use extract::{Candidate, DefinitionSite, NBestList, Pattern, SfLfPair, WindowPolicy};
pub use index::SuffixIndex;
pub use rerank::{FeatureSet, FeatureVector, ModelCoefficients, RerankedList, ScoredCandidate};
