//! Closed-form optimal scattering matrices for RIS-aided multi-operator
//! systems, the matching expected-power formulas, and a reproducible Monte
//! Carlo harness that checks them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arch;
pub mod channels;
pub mod config;
pub mod error;
pub mod formats;
pub mod harness;
pub mod linalg;
pub mod multiantenna;
pub mod plot;
pub mod rng;
pub mod scaling;
pub mod solver;
pub mod validation;

pub use arch::{ArchitectureKind, BlockDiagonal, GroupSizePolicy, RisArchitecture};
pub use channels::{PathLossModel, ScenarioChannels};
pub use error::{Result, RisError};
pub use harness::{ChannelKind, ExperimentConfig, SweepResult, SweepRow};
pub use linalg::{ComplexMatrix, ComplexVector};
pub use solver::{solve, DesignSolution, SolveBranch, TargetReflections};
