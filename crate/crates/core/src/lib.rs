//! Rank-aware matrix factorization for popularity-skewed rating data.
//!
//! The central model ([`matrec`]) builds user and item features that depend
//! on the popularity rank of both sides of a pair and fits their cosine to
//! observed ratings. Around it sit the pieces needed to run comparable
//! experiments: dataset ingestion ([`dataio`]), popularity ranks
//! ([`ranking`]), ALS and BPR baselines ([`baselines`]), MAE evaluation
//! ([`eval`]), learning-rate sweeps ([`sweep`]) and model dumps ([`persist`]).
//!
//! All randomness derives from a single user seed through [`seed`], so a run
//! is reproducible bit-for-bit from its inputs.

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod matrec;
pub mod persist;
pub mod pipeline;
pub mod ranking;
pub mod seed;
pub mod sweep;

pub use dataio::{NormScheme, RatingDataset, RatingTriple};
pub use error::{Error, Result};
pub use eval::{evaluate, mae, EvalReport, RatingModel, RunMetadata};
pub use matrec::{Hyperparams, MatRecModel, MatRecParams};
pub use pipeline::{Algorithm, DatasetKind, PreparedData, TrainedModel};
pub use ranking::{compute_ranks, RankTable};
pub use sweep::{sweep_learning_rate, SweepCurve};
