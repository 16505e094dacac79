//! Exact reconstruction of importer identities from sanitized trade releases.

pub mod allocation;
pub mod attack;
pub mod datagen;
pub mod ladder;
pub mod qif;
pub mod quantity;
pub mod walkthrough;

pub use allocation::{
    complexity, solve, validate_assignment, AllocationError, AllocationInstance, Assignment, Bin,
    Package, SolveOutcome, SolverConfig,
};
pub use quantity::{Quantity, Scale};
