//! Mention-pair anaphora resolution for Telugu dialogue.
//!
//! The pipeline reads SSF-annotated text into a conversation corpus,
//! turns every within-conversation mention pair into a fixed-width feature
//! vector, rebalances the classes, trains a small dense network and scores
//! or resolves held-out pairs.

pub mod corpus;
pub mod embeddings;
pub mod evaluator;
pub mod featurizer;
pub mod mlp;
pub mod pipeline;
pub mod sampler;
pub mod ssf;
pub mod synth;
