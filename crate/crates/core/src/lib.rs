//! Minipatch ensembles with refit-free uncertainty quantification.
//!
//! A minipatch ensemble fits one base learner on each of K tiny random
//! subsets of rows and features. Because every model's prediction at every
//! training row is cached, leave-one-out and leave-one-covariate-out
//! predictions are plain averages over patches that happen to exclude a row
//! or a feature. From those averages the crate builds
//!
//! * confidence intervals and one-sided tests for per-feature occlusion
//!   importance ([`loco`]), and
//! * Jackknife+ predictive intervals and label sets ([`conformal`]),
//!
//! without refitting anything. [`simgen`] generates the synthetic benchmarks,
//! [`oracle`] provides independent ground truth (full enumeration, Monte
//! Carlo targets, closed forms) and [`bench`] runs replicated coverage,
//! width, power and selection experiments.

// Range checks are written as !(x > 0.0) so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bits;
pub mod config;
pub mod conformal;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod learners;
pub mod loco;
pub mod normal;
pub mod oracle;
pub mod par;
pub mod report;
pub mod rng;
pub mod simgen;

pub use config::{LearnerSpec, MPConfig};
pub use data::{error_score, load_dataset, standardize, Dataset, ErrorFn, Prediction, Response, Target, Task};
pub use ensemble::{sample_minipatches, train_ensemble, Ensemble, Minipatch};
pub use error::{Error, Result};
