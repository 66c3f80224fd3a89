//! Analytics for perspective-differentiated agent panels.
//!
//! The pipeline runs a panel of value-perspective agents over annotated
//! content, embeds each agent's reasoning trace, measures the structure of
//! inter-agent disagreement (pairwise cosine similarity of traces), classifies
//! every item into a 2x2 taxonomy (convergent/divergent reasoning x
//! agreement/disagreement on the verdict), and evaluates taxonomy-based
//! escalation routing against human annotator disagreement.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`corpus`]: ingest annotated rating rows, compute per-item human
//!   disagreement (rating standard deviation), stratified sampling.
//! - [`panel`]: agent profiles, prompt assembly, chat backends (remote,
//!   replay, synthetic), trace parsing.
//! - [`embed`]: pluggable trace embedding with a persistent cache.
//! - [`divergence`]: pairwise cosine similarity and per-item aggregates.
//! - [`taxonomy`]: the four-category classification and routing policies.
//! - [`stats`]: correlations, Kruskal-Wallis, Cohen's d, P/R/F1, theta sweep.
//! - [`synth`]: synthetic panels with known ground truth for validation.
//! - [`pipeline`]: staged, idempotent orchestration over a JSONL run store.

pub mod config;
pub mod corpus;
pub mod divergence;
pub mod embed;
pub mod hashing;
pub mod panel;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod store;
pub mod synth;
pub mod taxonomy;
