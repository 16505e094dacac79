//! The package allocation problem.
//!
//! An instance asks whether a set of packages, each carrying `k` non-negative
//! attributes, can be distributed over bins so that every bin's per-attribute
//! total lands within `capacity ± tolerance`, optionally with a designated
//! target package pinned to a designated target bin.
//!
//! [`solve`] is an exact depth-first search with bound pruning; it either
//! returns a witness [`Assignment`], proves that none exists, or runs out of
//! its wall-clock budget. [`reduce_subset_sum`] maps SUBSET SUM onto the
//! problem and is used as a correctness oracle in tests.

mod io;
mod planted;
mod reduction;
mod search;
mod solver;

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::quantity::Quantity;

pub use io::{read_instance, write_instance, InstanceIoError};
pub use planted::{planted_instance, PlantedConfig};
pub use reduction::{reduce_subset_sum, subset_sum_via_reduction};
pub use solver::{
    solve, solve_detailed, solve_forced, solve_min_max_violation, MinMaxOutcome, SolveOutcome,
    SolveReport, SolverConfig,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("instance needs at least one {0}")]
    Empty(&'static str),
    #[error("{id} carries {found} attributes, expected {expected}")]
    Arity {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("unknown package {0:?}")]
    UnknownPackage(String),
    #[error("unknown bin {0:?}")]
    UnknownBin(String),
    #[error("a target bin requires a target package")]
    TargetBinWithoutTarget,
    #[error("assignment covers {found} packages, instance has {expected}")]
    AssignmentMismatch { expected: usize, found: usize },
    #[error("assignment places package {package} in nonexistent bin {bin}")]
    BinOutOfRange { package: usize, bin: usize },
    #[error("complexity {complexity:.2} exceeds the cap of {cap:.2}")]
    GateRejected { complexity: f64, cap: f64 },
    #[error("operation requires a single-attribute instance, got k = {0}")]
    NotSingleAttribute(usize),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("subset sum target {target} exceeds the total {total}")]
    TargetExceedsTotal { target: u64, total: u64 },
    #[error("subset sum reduction needs a positive target and at least one number")]
    DegenerateSubsetSum,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Package {
    pub id: String,
    pub attrs: Vec<Quantity>,
}

impl Package {
    pub fn new(id: impl Into<String>, attrs: Vec<Quantity>) -> Self {
        Package {
            id: id.into(),
            attrs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub id: String,
    pub capacity: Vec<Quantity>,
    pub tolerance: Vec<Quantity>,
}

impl Bin {
    pub fn new(id: impl Into<String>, capacity: Vec<Quantity>, tolerance: Vec<Quantity>) -> Self {
        Bin {
            id: id.into(),
            capacity,
            tolerance,
        }
    }

    pub fn lower(&self, attr: usize) -> Quantity {
        self.capacity[attr].saturating_sub(self.tolerance[attr])
    }

    pub fn upper(&self, attr: usize) -> Quantity {
        self.capacity[attr] + self.tolerance[attr]
    }
}

/// A package allocation instance: packages, bins, attribute count, the
/// optional target pair, and any extra per-package bin exclusions.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationInstance {
    k: usize,
    packages: Vec<Package>,
    bins: Vec<Bin>,
    target: Option<usize>,
    target_bin: Option<usize>,
    forbidden: BTreeSet<(usize, usize)>,
}

impl AllocationInstance {
    pub fn new(
        k: usize,
        packages: Vec<Package>,
        bins: Vec<Bin>,
    ) -> Result<AllocationInstance, AllocationError> {
        if k == 0 {
            return Err(AllocationError::Empty("attribute"));
        }
        if packages.is_empty() {
            return Err(AllocationError::Empty("package"));
        }
        if bins.is_empty() {
            return Err(AllocationError::Empty("bin"));
        }
        let arity = |id: &str, found: usize| {
            if found == k {
                Ok(())
            } else {
                Err(AllocationError::Arity {
                    id: id.to_string(),
                    expected: k,
                    found,
                })
            }
        };
        let mut seen = HashSet::new();
        for p in &packages {
            arity(&p.id, p.attrs.len())?;
            if !seen.insert(p.id.as_str()) {
                return Err(AllocationError::DuplicateId(p.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        for b in &bins {
            arity(&b.id, b.capacity.len())?;
            arity(&b.id, b.tolerance.len())?;
            if !seen.insert(b.id.as_str()) {
                return Err(AllocationError::DuplicateId(b.id.clone()));
            }
        }
        Ok(AllocationInstance {
            k,
            packages,
            bins,
            target: None,
            target_bin: None,
            forbidden: BTreeSet::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.packages.len()
    }

    pub fn m(&self) -> usize {
        self.bins.len()
    }

    pub fn packages(&self) -> &[Package] {
        &self.packages
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }

    pub fn target_bin(&self) -> Option<usize> {
        self.target_bin
    }

    pub fn package_index(&self, id: &str) -> Option<usize> {
        self.packages.iter().position(|p| p.id == id)
    }

    pub fn bin_index(&self, id: &str) -> Option<usize> {
        self.bins.iter().position(|b| b.id == id)
    }

    pub fn set_target(&mut self, package: usize) {
        assert!(package < self.n(), "target package out of range");
        self.target = Some(package);
    }

    pub fn with_target(mut self, id: &str) -> Result<Self, AllocationError> {
        let p = self
            .package_index(id)
            .ok_or_else(|| AllocationError::UnknownPackage(id.to_string()))?;
        self.target = Some(p);
        Ok(self)
    }

    pub fn with_target_bin(mut self, id: &str) -> Result<Self, AllocationError> {
        if self.target.is_none() {
            return Err(AllocationError::TargetBinWithoutTarget);
        }
        let b = self
            .bin_index(id)
            .ok_or_else(|| AllocationError::UnknownBin(id.to_string()))?;
        self.target_bin = Some(b);
        Ok(self)
    }

    pub fn set_target_bin(&mut self, bin: Option<usize>) -> Result<(), AllocationError> {
        if bin.is_some() && self.target.is_none() {
            return Err(AllocationError::TargetBinWithoutTarget);
        }
        if let Some(b) = bin {
            assert!(b < self.m(), "target bin out of range");
        }
        self.target_bin = bin;
        Ok(())
    }

    /// Adds the constraint `X[package][bin] = 0`.
    pub fn forbid(&mut self, package: usize, bin: usize) {
        assert!(package < self.n() && bin < self.m());
        self.forbidden.insert((package, bin));
    }

    /// Forbids every bin not listed in `allowed` for `package`.
    pub fn restrict(&mut self, package: usize, allowed: &[usize]) {
        for b in 0..self.m() {
            if !allowed.contains(&b) {
                self.forbid(package, b);
            }
        }
    }

    pub fn is_allowed(&self, package: usize, bin: usize) -> bool {
        if self.forbidden.contains(&(package, bin)) {
            return false;
        }
        match (self.target, self.target_bin) {
            (Some(t), Some(tb)) if t == package => tb == bin,
            _ => true,
        }
    }

    pub fn allowed_bins(&self, package: usize) -> Vec<usize> {
        (0..self.m()).filter(|&b| self.is_allowed(package, b)).collect()
    }

    /// The same instance with the target pair and all exclusions dropped.
    pub fn without_constraints(&self) -> AllocationInstance {
        AllocationInstance {
            target: None,
            target_bin: None,
            forbidden: BTreeSet::new(),
            ..self.clone()
        }
    }

    /// The instance with one package taken out, keeping the exclusions of
    /// the others. `None` if it was the only package. The target pair is
    /// dropped when it names the removed package.
    pub fn without_package(&self, package: usize) -> Option<AllocationInstance> {
        assert!(package < self.n(), "package out of range");
        if self.n() == 1 {
            return None;
        }
        let shift = |p: usize| if p > package { p - 1 } else { p };
        let mut packages = self.packages.clone();
        packages.remove(package);
        let keeps_target = self.target.is_some_and(|t| t != package);
        Some(AllocationInstance {
            packages,
            target: self.target.filter(|_| keeps_target).map(shift),
            target_bin: self.target_bin.filter(|_| keeps_target),
            forbidden: self
                .forbidden
                .iter()
                .filter(|(p, _)| *p != package)
                .map(|&(p, b)| (shift(p), b))
                .collect(),
            ..self.clone()
        })
    }

    /// Replaces every bin tolerance.
    pub fn with_uniform_tolerance(&self, tolerance: &[Quantity]) -> AllocationInstance {
        let mut out = self.clone();
        for b in &mut out.bins {
            b.tolerance = tolerance.to_vec();
        }
        out
    }

    pub fn bins_mut(&mut self) -> &mut [Bin] {
        &mut self.bins
    }
}

/// One bin index per package, in instance order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<usize>);

impl Assignment {
    pub fn new(bins: Vec<usize>) -> Self {
        Assignment(bins)
    }

    pub fn bin_of(&self, package: usize) -> usize {
        self.0[package]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        self.0.swap(a, b);
    }

    /// Per-bin attribute totals.
    pub fn loads(&self, inst: &AllocationInstance) -> Vec<Vec<Quantity>> {
        let mut loads = vec![vec![Quantity::ZERO; inst.k()]; inst.m()];
        for (p, &b) in self.0.iter().enumerate() {
            for (i, &w) in inst.packages[p].attrs.iter().enumerate() {
                loads[b][i] += w;
            }
        }
        loads
    }
}

/// Checks conditions (a) to (c) plus any exclusions carried by the instance.
pub fn validate_assignment(
    inst: &AllocationInstance,
    assignment: &Assignment,
) -> Result<bool, AllocationError> {
    if assignment.len() != inst.n() {
        return Err(AllocationError::AssignmentMismatch {
            expected: inst.n(),
            found: assignment.len(),
        });
    }
    for (p, &b) in assignment.as_slice().iter().enumerate() {
        if b >= inst.m() {
            return Err(AllocationError::BinOutOfRange { package: p, bin: b });
        }
        if !inst.is_allowed(p, b) {
            return Ok(false);
        }
    }
    let loads = assignment.loads(inst);
    let within = inst.bins.iter().zip(&loads).all(|(bin, load)| {
        (0..inst.k()).all(|i| bin.lower(i) <= load[i] && load[i] <= bin.upper(i))
    });
    Ok(within)
}

/// Size of the unpruned search space, `log10(m^n)`.
pub fn complexity(inst: &AllocationInstance) -> f64 {
    complexity_of(inst.n(), inst.m())
}

pub fn complexity_of(n: usize, m: usize) -> f64 {
    n as f64 * (m as f64).log10()
}
