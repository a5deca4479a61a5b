//! Multi-level apportionment.
//!
//! Seats are allocated down a rooted tree of entitlements: the root holds the
//! whole house and every internal node's seats are split among its children.
//! Quotas are checked for every node against every ancestor, not just the
//! parent or the root.
//!
//! * [`instance`]: the tree model, validation and file formats.
//! * [`quota`]: lower/upper quota bounds and allocation checking.
//! * [`methods`]: level-by-level Adams, Jefferson, quota and upper-compliant
//!   quota methods, all house monotone.
//! * [`existence`]: reduction to full binary trees and an allocator that
//!   always stays within both quotas, plus an exhaustive oracle.
//! * [`generator`]: seeded random instances.
//! * [`experiments`]: the batch harness and result tables.
//!
//! All arithmetic on entitlements is exact ([`Rational`]).
//!
//! ```
//! use mlapportion::{fixtures, methods::{allocate, MethodKind, TieBreak}, quota::{check_allocation, QuotaMode}};
//!
//! let inst = fixtures::paired_halves();
//! let alloc = allocate(&inst, MethodKind::Adams, 6, TieBreak::LowestIndex).unwrap();
//! assert_eq!(alloc.seats, vec![6, 2, 1, 2, 1, 3, 3]);
//! let report = check_allocation(&inst, &alloc, QuotaMode::AllAncestors).unwrap();
//! assert!(report.is_compliant());
//! ```

pub mod existence;
pub mod experiments;
pub mod fixtures;
pub mod generator;
pub mod instance;
pub mod methods;
pub mod quota;
pub mod rational;

pub use instance::{Allocation, Instance, NodeId, RawInstance};
pub use rational::Rational;

use thiserror::Error;

/// Umbrella error for callers that do not care which stage failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] instance::ValidationErrors),
    #[error(transparent)]
    Check(#[from] quota::CheckError),
    #[error(transparent)]
    Method(#[from] methods::MethodError),
    #[error(transparent)]
    Existence(#[from] existence::ExistenceError),
    #[error(transparent)]
    Generator(#[from] generator::GeneratorError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
}
