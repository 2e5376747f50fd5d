//! Probabilistic-circuit guided rule selection for knowledge graph completion.
//!
//! The pipeline: load a [`store::Dataset`], parse and filter a
//! [`rules::RuleProgram`], build the rule/context association
//! [`context::RuleContextMatrix`] by abduction over the training triples,
//! fit a [`circuit::Circuit`] over rule activations, derive ordered rule sets
//! ([`rulesets`]), score test queries ([`scoring`]) and evaluate them with
//! filtered Hits@k / MRR@k ([`eval`]). [`oracle`] holds brute-force
//! reference implementations used to check the production paths.

pub mod circuit;
pub mod context;
pub mod eval;
pub mod oracle;
pub mod rules;
pub mod rulesets;
pub mod scoring;
pub mod store;
