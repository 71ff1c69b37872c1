//! Core logic for detecting missed recalls in e-commerce search components.
//!
//! Everything in this crate is pure and deterministic: the shop catalog
//! model, query-group generation, the consistency oracle, run metrics, and
//! a reference search simulator with injectable fault modes. No IO happens
//! here; file formats, HTTP transports, and the CLI live in the companion
//! `recallcheck` crate.
//!
//! The crate is `no_std` with `alloc`, so the detection logic can be
//! embedded anywhere a heap is available.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod geo;
pub mod metrics;
pub mod oracle;
pub mod prompt;
pub mod query;
pub mod search;
pub mod shop;
pub mod sim;
pub mod text;
pub mod validation;

pub use geo::GeoPoint;
pub use metrics::{compute_metrics, Label, MetricValue, RunLedger, RunMetrics};
pub use oracle::{
    evaluate_group, evaluate_run, Classification, GroupEvaluation, GroupOutcomes, GroupVerdict,
    MissedRecallFinding, RunTallies,
};
pub use query::{
    generate_template, parse_llm_output, ConceptRelation, Derivation, QueryGroup, QuerySource,
    TemplateRules, TestQuery,
};
pub use search::{recalled, SearchContext, SearchResultPage};
pub use shop::{Catalog, Shop};
pub use sim::{ground_truth_misses, ExpectedMiss, FaultKind, FaultSelector, FaultSpec, SimConfig, SimIndex};
pub use text::{normalize_field, normalize_for_match, tokenize};
