//! Belief-structured matrix factorization.
//!
//! Separates posts into partially overlapping belief regions by factorizing
//! an estimated source-claim endorsement matrix as `X ≈ U B Mᵀ`, where `B`
//! is a known binary belief mixture matrix. The endorsement estimate is
//! built from observed endorsements, bag-of-words similarity between claims
//! and a one-hop smoothing over the retweet graph.

pub mod belief;
pub mod benchmark;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod factorize;
pub mod linalg;
pub mod pipeline;
pub mod propagation;
pub mod similarity;
pub mod synthetic;

pub use belief::{BeliefMixture, BeliefSpec};
pub use benchmark::{ablation, benchmark, BenchmarkReport};
pub use dataset::{ingest, Claim, Dataset, IngestPaths};
pub use error::{Error, Result};
pub use eval::{align, assign, score, top_k_claims, Assignment, MetricsReport};
pub use factorize::{fit, loss, FactorPair, FitConfig, FitResult, Mode, StepSize};
pub use linalg::{DenseMatrix, SparseMatrix};
pub use pipeline::{
    endorsement_matrix, evaluate_bundle, run_fit, run_pipeline, EvalReport, FitBundle, PipelineOptions,
};
pub use propagation::{build_operator, convolve, PropagationOperator, SocialGraph};
pub use similarity::{interpolate, rbf_similarity, tokenize, BowTable, BowVector, RbfParams};
pub use synthetic::{generate, SynthSpec};
