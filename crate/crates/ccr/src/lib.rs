//! Compositional causal reasoning evaluation.
//!
//! This crate measures whether a reasoner (a scripted oracle or a remote
//! language model) can answer *compositions* of causal queries coherently,
//! not just individual ones. The pipeline is:
//!
//! 1. **Task generation** ([`task`], [`graph`], [`scm`]): build a single-root,
//!    single-leaf DAG whose biconnected components form a chain, attach a
//!    Boolean structural causal model, and render it as a natural-language
//!    scenario with factual and counterfactual questions.
//! 2. **Ground truth** ([`estimand`]): compute probabilities of causation —
//!    probability of necessity and sufficiency (PNS), necessity (PN),
//!    sufficiency (PS) — exactly by enumeration, and predict global
//!    quantities from local ones via composition formulas.
//! 3. **Querying** ([`reasoner`], [`remote`]): pose every factual /
//!    counterfactual question pair to a reasoner, with replicates, retries,
//!    and a resumable response store.
//! 4. **Evaluation** ([`evaluate`]): turn responses into subsampled PNS
//!    estimates, compare estimated against composed and true values, and
//!    classify the reasoner's causal model as valid/invalid and
//!    consistent/inconsistent.
//! 5. **Reporting** ([`report`]): run manifests with content hashes, DOT
//!    renderings of the cut-point tree, and plot-ready CSV bundles.
//!
//! Key concepts:
//! - **Cut-point tree (CCT)**: the complete DAG over `[root, cut points…,
//!   leaf]` in topological order. Every edge is a causal quantity to
//!   estimate; every root→leaf path is a composition to check.
//! - **Validity**: a reasoner's estimate of a quantity is valid when its
//!   relative absolute error against ground truth stays within a tolerance
//!   for most subsampling rounds.
//! - **Consistency**: composed path estimates must agree with the direct
//!   global estimate — a purely internal check that needs no ground truth.

pub mod cli;
pub mod estimand;
pub mod evaluate;
pub mod fixtures;
pub mod graph;
pub mod report;
pub mod reasoner;
pub mod remote;
pub mod rng;
pub mod scm;
pub mod task;
