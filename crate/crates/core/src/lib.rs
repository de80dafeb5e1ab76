//! Portfolio asset selection toolkit.
//!
//! The pipeline turns a price history into a small set of candidate
//! portfolios and measures how they hold up out of sample:
//!
//! 1. [`market`] loads prices, computes simple returns and Pearson
//!    correlations, and carries the train/test split.
//! 2. [`graph`] builds an anti-correlation graph (heavy edges between
//!    uncorrelated assets) plus the Mantegna spanning-tree baseline.
//! 3. [`embedding`] runs weighted random walks over the graph and trains
//!    skip-gram embeddings on the walk corpus.
//! 4. [`clustering`] groups the embedded assets (k-means or fuzzy c-means);
//!    each cluster is a diversified candidate subset.
//! 5. [`selection`] wraps the above into selection strategies alongside
//!    random and simulated-annealing baselines.
//! 6. [`weighting`] assigns capital within a subset (mean-variance,
//!    hierarchical risk parity, or a critical-line frontier).
//! 7. [`evaluation`] scores portfolios out of sample and quantifies how
//!    stable a selection strategy is under noise and time shifts.
//! 8. [`experiment`] ties everything into a reproducible, config-driven run.
//!
//! Every random decision flows from explicit `u64` seeds; repeated runs with
//! the same config and seed produce byte-identical reports.

pub mod clustering;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod graph;
pub mod market;
pub mod seeding;
pub mod selection;
pub mod synthetic;
pub mod weighting;

pub use error::{Error, Result};
pub use evaluation::{PerformanceReport, ReturnConvention, StabilityMatrix};
pub use experiment::{ExperimentConfig, RunArtifacts};
pub use market::{CorrelationMatrix, DataSplit, PriceMatrix, ReturnMatrix};
pub use selection::{AssetSubset, Provenance, SelectionResult};
pub use weighting::{FrontierPoint, MomentEstimates, PortfolioWeights};
