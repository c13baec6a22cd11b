//! Training-free selection of distinctive, classname-free descriptions for
//! zero-shot classification over precomputed vision-language embeddings.
//!
//! The crate is `no_std` (with `alloc`). It covers the lookup matrix of
//! classwise image-description similarities, top-k candidate retrieval from
//! classname prompts, per-image description selection, every evaluation
//! regime (classname-free, classname-included, classname-only; mean or max
//! aggregation; local or global scope) and a synthetic store generator with
//! planted ground truth. File formats, caching, parallel drivers and the CLI
//! live in the `descsel` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod evaluator;
pub mod matrix;
pub mod neighborhood;
pub mod probe;
pub mod rng;
pub mod selector;
pub mod similarity;
pub mod store;
pub mod synthgen;

pub use error::{Error, Result};
pub use evaluator::{
    evaluate, sweep_wcls, Aggregation, AssignmentSource, EvalConfig, EvalResult, OuterNorm, Scope, Setup,
};
pub use matrix::EmbeddingMatrix;
pub use neighborhood::{candidates, CandidateSet};
pub use probe::{sample_probe_set, ProbeSet};
pub use selector::{
    assign_llm, assign_random, distinctiveness, dump_distinctiveness, select, select_batch, ClassAssignment,
    ImageAssignment, PositivityMode, SelectionConfig,
};
pub use similarity::{build_lookup, cosine, sim_matrix, LookupMatrix};
pub use store::{DatasetStore, DescriptionPool, PairEmbeddingTable, Split};
pub use synthgen::{generate, SynthOutput, SynthSpec};
