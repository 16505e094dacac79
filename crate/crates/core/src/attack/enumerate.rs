use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use crate::allocation::{
    complexity, solve_forced, AllocationError, AllocationInstance, SolveOutcome, SolverConfig,
};

use super::AttackError;

/// Bins the target can occupy in some valid allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleBins {
    /// Bin indices, ascending.
    pub bins: Vec<usize>,
    /// False when the budget ran out before infeasibility was proven, in
    /// which case more bins may qualify.
    pub complete: bool,
    pub solves: usize,
    pub elapsed: Duration,
}

/// Remaining share of a wall-clock budget, as a per-solve config.
pub(crate) struct Deadline {
    start: Instant,
    base: SolverConfig,
}

impl Deadline {
    pub(crate) fn new(cfg: &SolverConfig) -> Self {
        Deadline {
            start: Instant::now(),
            base: cfg.clone(),
        }
    }

    pub(crate) fn remaining(&self) -> Option<SolverConfig> {
        let left = self.base.budget.checked_sub(self.start.elapsed())?;
        (!left.is_zero()).then(|| SolverConfig {
            budget: left,
            ..self.base.clone()
        })
    }

    pub(crate) fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }
}

/// Finds every bin the target package can sit in: solve, note the target's
/// bin, forbid it, and repeat until the instance becomes infeasible.
///
/// The complexity gate applies once up front. The whole loop shares a
/// single wall-clock budget.
pub fn enumerate_feasible_bins(
    inst: &AllocationInstance,
    cfg: &SolverConfig,
) -> Result<FeasibleBins, AttackError> {
    cfg.validate()?;
    let rho = inst.target().ok_or(AttackError::NoTarget)?;
    if inst.target_bin().is_some() {
        return Err(AttackError::TargetBinSet);
    }
    if inst.allowed_bins(rho).is_empty() {
        return Err(AttackError::NoCandidateBins);
    }
    let c = complexity(inst);
    if c > cfg.complexity_cap {
        return Err(AllocationError::GateRejected {
            complexity: c,
            cap: cfg.complexity_cap,
        }
        .into());
    }

    let deadline = Deadline::new(cfg);
    let mut cur = inst.clone();
    let mut bins = Vec::new();
    let mut solves = 0;
    let complete = loop {
        if cur.allowed_bins(rho).is_empty() {
            break true;
        }
        let Some(step) = deadline.remaining() else {
            break false;
        };
        solves += 1;
        match solve_forced(&cur, &step)? {
            SolveOutcome::Feasible(a) => {
                let b = a.bin_of(rho);
                bins.push(b);
                cur.forbid(rho, b);
            }
            SolveOutcome::Infeasible { .. } => break true,
            SolveOutcome::TimedOut => break false,
        }
    };
    bins.sort_unstable();
    Ok(FeasibleBins {
        bins,
        complete,
        solves,
        elapsed: deadline.elapsed(),
    })
}

/// Feasible and undecided bins of one package.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackageBins {
    pub feasible: BTreeSet<usize>,
    /// Bins whose check ran out of time.
    pub undecided: BTreeSet<usize>,
}

impl PackageBins {
    pub fn is_complete(&self) -> bool {
        self.undecided.is_empty()
    }

    /// Every bin not proven impossible.
    pub fn possible(&self) -> BTreeSet<usize> {
        self.feasible.union(&self.undecided).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllPackageBins {
    pub packages: Vec<PackageBins>,
    /// False if the unconstrained instance already has no valid allocation.
    pub consistent: bool,
    pub solves: usize,
    pub elapsed: Duration,
}

/// [`enumerate_feasible_bins`] for every package at once. Each feasible
/// assignment found witnesses one bin for every package, so only the
/// package/bin pairs not yet witnessed need their own solve.
///
/// Any target pair on `inst` is ignored. No complexity gate is applied.
pub fn feasible_bins_per_package(
    inst: &AllocationInstance,
    cfg: &SolverConfig,
) -> Result<AllPackageBins, AttackError> {
    cfg.validate()?;
    let mut base = inst.clone();
    base.set_target_bin(None)?;
    let deadline = Deadline::new(cfg);
    let mut out = vec![PackageBins::default(); inst.n()];
    let mut solves = 0;

    let witness = |out: &mut Vec<PackageBins>, a: &crate::allocation::Assignment| {
        for (p, &b) in a.as_slice().iter().enumerate() {
            out[p].feasible.insert(b);
        }
    };

    let first = match deadline.remaining() {
        Some(step) => {
            solves += 1;
            solve_forced(&base, &step)?
        }
        None => SolveOutcome::TimedOut,
    };
    match &first {
        SolveOutcome::Feasible(a) => witness(&mut out, a),
        SolveOutcome::Infeasible { .. } => {
            return Ok(AllPackageBins {
                packages: out,
                consistent: false,
                solves,
                elapsed: deadline.elapsed(),
            })
        }
        SolveOutcome::TimedOut => {}
    }

    for p in 0..inst.n() {
        for b in base.allowed_bins(p) {
            if out[p].feasible.contains(&b) {
                continue;
            }
            let Some(step) = deadline.remaining() else {
                out[p].undecided.insert(b);
                continue;
            };
            let mut probe = base.clone();
            probe.set_target(p);
            probe.set_target_bin(Some(b))?;
            solves += 1;
            match solve_forced(&probe, &step)? {
                SolveOutcome::Feasible(a) => witness(&mut out, &a),
                SolveOutcome::Infeasible { .. } => {}
                SolveOutcome::TimedOut => {
                    out[p].undecided.insert(b);
                }
            }
        }
    }
    Ok(AllPackageBins {
        packages: out,
        consistent: true,
        solves,
        elapsed: deadline.elapsed(),
    })
}
