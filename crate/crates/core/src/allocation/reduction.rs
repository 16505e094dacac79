//! SUBSET SUM to package allocation.

use super::{solve_forced, AllocationError, AllocationInstance, Bin, Package, SolveOutcome, SolverConfig};
use crate::quantity::Quantity;

/// Builds one instance per number: every number becomes a single-attribute
/// package, the two bins hold `target` and `total - target` with zero
/// tolerance, the target bin is the `target` bin and the target package
/// ranges over all packages. Some subset sums to `target` iff at least one
/// instance is feasible.
///
/// The empty subset is never a witness, so `target` must be positive.
pub fn reduce_subset_sum(
    numbers: &[u64],
    target: u64,
) -> Result<Vec<AllocationInstance>, AllocationError> {
    if numbers.is_empty() || target == 0 {
        return Err(AllocationError::DegenerateSubsetSum);
    }
    let total: u64 = numbers.iter().sum();
    if target > total {
        return Err(AllocationError::TargetExceedsTotal { target, total });
    }
    let packages: Vec<Package> = numbers
        .iter()
        .enumerate()
        .map(|(i, &x)| Package::new(format!("n{i}"), vec![Quantity::from_units(x)]))
        .collect();
    let bins = vec![
        Bin::new("subset", vec![Quantity::from_units(target)], vec![Quantity::ZERO]),
        Bin::new("rest", vec![Quantity::from_units(total - target)], vec![Quantity::ZERO]),
    ];
    let base = AllocationInstance::new(1, packages, bins)?;
    (0..numbers.len())
        .map(|rho| {
            let mut inst = base.clone();
            inst.set_target(rho);
            inst.set_target_bin(Some(0))?;
            Ok(inst)
        })
        .collect()
}

/// Decides SUBSET SUM by solving every reduced instance.
///
/// Returns `None` if any solve times out before a witness is found.
pub fn subset_sum_via_reduction(
    numbers: &[u64],
    target: u64,
    cfg: &SolverConfig,
) -> Result<Option<bool>, AllocationError> {
    let mut timed_out = false;
    for inst in reduce_subset_sum(numbers, target)? {
        match solve_forced(&inst, cfg)? {
            SolveOutcome::Feasible(_) => return Ok(Some(true)),
            SolveOutcome::TimedOut => timed_out = true,
            SolveOutcome::Infeasible { .. } => {}
        }
    }
    Ok(if timed_out { None } else { Some(false) })
}
