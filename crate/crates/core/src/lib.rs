//! Retrieval-augmented generative question answering for event argument
//! extraction.
//!
//! Each (event mention, argument role) pair becomes a question-answering
//! instance. A demonstration retrieved from a store of annotated instances is
//! prepended to the input, the generator produces `[sep_arg]`-separated
//! answers, and the answers are grounded back onto context offsets and scored.
//!
//! ```text
//! corpus ──► RoleInstance ──► demo_store::retrieve_top ──► prompt::build_input
//!                                                              │
//!   scorer::score ◄── postprocess::decode_predictions ◄── generator::generate
//! ```
//!
//! The few-shot side selects a training subset (`sampler`) and compares the
//! event-type distribution of that subset to the population (`analysis`).
//!
//! The `argqa` binary exposes every stage as a subcommand; see [`cli`].

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod demo_store;
pub mod embedding;
pub mod generator;
pub mod jsonl;
pub mod postprocess;
pub mod prompt;
pub mod remote;
pub mod sampler;
pub mod scorer;
pub mod synthetic;

pub use corpus::{Corpus, Document, EventMention, Ontology, RoleInstance, Span};
pub use demo_store::{DemoStore, Demonstration, RetrievalResult};
pub use embedding::{EmbeddingStore, EmbeddingVector};
pub use prompt::SpecialTokens;
pub use sampler::SamplePlan;
pub use scorer::MetricsReport;
