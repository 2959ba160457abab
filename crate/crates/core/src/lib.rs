//! Fake/real news classification over TF-IDF features.
//!
//! The pipeline runs in a fixed order: CSV ingestion and cleaning
//! ([`corpus`]), TF-IDF vectorization ([`vectorize`]), training of the
//! classifier families ([`linear`], [`forest`], [`neural`]), and evaluation
//! ([`eval`]). [`harness`] drives all of it from a single [`config::RunConfig`]
//! and persists models through [`artifact`].
//!
//! Label encoding throughout: `1` = real news, `0` = fake news. The positive
//! class for precision and recall is real (`1`).

pub mod artifact;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod forest;
pub mod harness;
pub mod linear;
pub mod neural;
pub mod report;
pub mod rng;
pub mod sparse;
pub mod synthetic;
pub mod vectorize;

pub use corpus::{Corpus, Document, Label, SplitSpec};
pub use sparse::SparseVector;
pub use vectorize::TfidfModel;
