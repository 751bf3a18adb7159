//! Classification from repeated observations.
//!
//! A label `Y` is observed only through `t` conditionally i.i.d. feature
//! vectors `V_1, ..., V_t`. This crate implements the aggregated decision
//! rules for that setting (majority vote, maximum likelihood, utility
//! aggregation, robust nominal-density matching, prototype and linear
//! rules), the closed-form exponential error bounds and CLT approximations
//! that go with them, the scatter-matrix transform optimizers that sharpen
//! the prototype rule, and a seeded Monte Carlo harness that checks the
//! empirical error decay against every bound.
//!
//! Start with the runnable programs under `examples/`, one per capability:
//!
//! ```bash
//! cargo run --example majority_vote        # vote aggregation vs bounds and exact oracle
//! cargo run --example ml_rule              # likelihood aggregation, Bhattacharyya exponent
//! cargo run --example utility_aggregation  # utility rules, Hoeffding/moment bounds
//! cargo run --example robust_rule          # nominal-density matching, distortion bound
//! cargo run --example prototype_transform  # scatter matrices and transform optimizers
//! cargo run --example linear_scaling       # rescaled linear rule and LDA scaling
//! cargo run --example error_decay          # full sweep + audit + exponent fit
//! ```
//!
//! The `repobs` binary exposes the same machinery as `bounds`, `simulate`,
//! `optimize`, and `exponent` subcommands driven by a JSON config; see the
//! ready-to-run files under `configs/`.

pub mod bounds;
pub mod classifiers;
pub mod commands;
pub mod config;
pub mod linalg;
pub mod models;
pub mod seed;
pub mod sim;
pub mod transform;

pub use linalg::{LinalgError, Matrix};
pub use models::{ClassModel, ConfusionMatrix, ModelError, ObservationBatch, Problem};
