//! Global testing under sparse alternatives in the linear model
//! `y = X beta + sigma z`.
//!
//! The crate builds low-coherence design families, samples sparse
//! fixed-effects and random-effects coefficient vectors, computes the
//! chi-square (ANOVA), max and higher-criticism statistics, evaluates the
//! closed-form detection boundaries, and estimates detection risk by
//! seeded, replayable Monte Carlo.
//!
//! Modules map one-to-one onto those concerns:
//!
//! - [`designs`]: design specs, construction, Gram/coherence analysis,
//!   CSV import/export.
//! - [`alternatives`]: sparsity parameterization, signal sampling,
//!   observation synthesis.
//! - [`stats`]: the test statistics and the unknown-variance estimator.
//! - [`boundaries`]: `rho_star`, `rho_max`, `rho_rand` and the ANOVA
//!   power-scaling functional.
//! - [`bench`]: the Monte Carlo grid runner with its determinism contract
//!   and CSV output.
//!
//! ```
//! use sparsetest::bench::{best_empirical_risk, run_cell, ExperimentConfig, ModelKind, SPolicy};
//! use sparsetest::designs::DesignSpec;
//! use sparsetest::stats::StatKind;
//!
//! let config = ExperimentConfig {
//!     design: DesignSpec::Identity { p: 256 },
//!     model: ModelKind::Sfem,
//!     alpha_grid: vec![0.75],
//!     signal_grid: vec![1.0],
//!     trials: 50,
//!     master_seed: 0,
//!     sigma: 1.0,
//!     sigma_known: true,
//!     tests: vec![StatKind::Max],
//!     s_policy: SPolicy::AdaptiveOne,
//!     fresh_design_per_trial: true,
//! };
//! let (null, alt) = run_cell(&config, 0, 0, 0).unwrap();
//! let sweep = best_empirical_risk(&null, &alt).unwrap();
//! assert!(sweep.best_risk <= 1.0);
//! ```

pub mod alternatives;
pub mod bench;
pub mod boundaries;
pub mod designs;
pub mod error;
pub mod numfmt;
pub mod stats;

pub use alternatives::{AlternativeSpec, SignalInstance, SignalModel};
pub use bench::{ExperimentConfig, ModelKind, RiskEstimate, SPolicy};
pub use boundaries::BoundaryPoint;
pub use designs::{CoherenceProfile, DesignMatrix, DesignSpec};
pub use error::{Error, Result};
pub use stats::{StatKind, TestOutcome, VarianceEstimate};
