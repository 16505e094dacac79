use std::time::{Duration, Instant};

use super::search::{Budget, SearchProblem, SearchResult};
use super::{complexity, AllocationError, AllocationInstance, Assignment};
use crate::quantity::Quantity;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Wall-clock budget per solve call.
    pub budget: Duration,
    /// Search nodes between clock reads.
    pub node_check_interval: u64,
    /// Largest `log10(m^n)` accepted without forcing.
    pub complexity_cap: f64,
    /// Acceptance threshold on the minimized maximum bin violation.
    pub nu: Quantity,
    /// On infeasibility, search for the smallest set of attributes whose
    /// constraints must be relaxed.
    pub diagnose_violations: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            budget: Duration::from_secs(60),
            node_check_interval: 4096,
            complexity_cap: 12.0,
            // half a dollar at cent precision
            nu: Quantity::from_units(50),
            diagnose_violations: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), AllocationError> {
        if self.budget.is_zero() {
            return Err(AllocationError::Config("budget must be positive".into()));
        }
        if self.complexity_cap.is_nan() || self.complexity_cap <= 0.0 {
            return Err(AllocationError::Config(
                "complexity cap must be positive".into(),
            ));
        }
        if self.node_check_interval == 0 {
            return Err(AllocationError::Config(
                "node check interval must be positive".into(),
            ));
        }
        Ok(())
    }

    fn budget_from(&self, start: Instant) -> Budget {
        Budget {
            deadline: start + self.budget,
            check_interval: self.node_check_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Feasible(Assignment),
    /// No assignment exists. With diagnosis enabled, `relaxed` holds the
    /// smallest set of attribute indices whose constraints, once dropped,
    /// admit an assignment (`None` if diagnosis was off or found nothing).
    Infeasible { relaxed: Option<Vec<usize>> },
    TimedOut,
}

impl SolveOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveOutcome::Feasible(_))
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            SolveOutcome::Feasible(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub outcome: SolveOutcome,
    pub nodes: u64,
    pub elapsed: Duration,
}

/// Solves the feasibility question, refusing instances above the complexity cap.
pub fn solve(inst: &AllocationInstance, cfg: &SolverConfig) -> Result<SolveOutcome, AllocationError> {
    solve_detailed(inst, cfg, false).map(|r| r.outcome)
}

/// Like [`solve`] but skips the complexity gate.
pub fn solve_forced(
    inst: &AllocationInstance,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, AllocationError> {
    solve_detailed(inst, cfg, true).map(|r| r.outcome)
}

pub fn solve_detailed(
    inst: &AllocationInstance,
    cfg: &SolverConfig,
    force: bool,
) -> Result<SolveReport, AllocationError> {
    cfg.validate()?;
    let c = complexity(inst);
    if !force && c > cfg.complexity_cap {
        return Err(AllocationError::GateRejected {
            complexity: c,
            cap: cfg.complexity_cap,
        });
    }
    let start = Instant::now();
    let budget = cfg.budget_from(start);
    let mut nodes = 0u64;
    let all = vec![true; inst.k()];
    let result = SearchProblem::new(inst, None, &all).run(&budget, &mut nodes);
    let outcome = match result {
        SearchResult::Found(bins) => SolveOutcome::Feasible(Assignment::new(bins)),
        SearchResult::TimedOut => SolveOutcome::TimedOut,
        SearchResult::Exhausted => {
            let relaxed = if cfg.diagnose_violations {
                diagnose(inst, &budget, &mut nodes)
            } else {
                None
            };
            SolveOutcome::Infeasible { relaxed }
        }
    };
    Ok(SolveReport {
        outcome,
        nodes,
        elapsed: start.elapsed(),
    })
}

/// Tries attribute subsets in order of increasing size and returns the first
/// one whose removal makes the instance feasible. This is the `y_i` slack of
/// the ILP objective without a big-M constant.
fn diagnose(inst: &AllocationInstance, budget: &Budget, nodes: &mut u64) -> Option<Vec<usize>> {
    let k = inst.k();
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << k))
        .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    for dropped in subsets {
        let active: Vec<bool> = (0..k).map(|i| !dropped.contains(&i)).collect();
        match SearchProblem::new(inst, None, &active).run(budget, nodes) {
            SearchResult::Found(_) => return Some(dropped),
            SearchResult::TimedOut => return None,
            SearchResult::Exhausted => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MinMaxOutcome {
    Optimal {
        /// Smallest achievable maximum `|load - capacity|` over bins.
        violation: Quantity,
        assignment: Assignment,
        /// `violation <= nu`
        accepted: bool,
    },
    TimedOut,
}

/// Single-attribute variant: minimizes the largest bin violation `z`.
///
/// Target and exclusion constraints are dropped, so some assignment always
/// exists. Feasibility is monotone in `z`, which is found by bisection over
/// `[0, max(total mass, largest capacity)]`.
pub fn solve_min_max_violation(
    inst: &AllocationInstance,
    cfg: &SolverConfig,
) -> Result<MinMaxOutcome, AllocationError> {
    cfg.validate()?;
    if inst.k() != 1 {
        return Err(AllocationError::NotSingleAttribute(inst.k()));
    }
    let c = complexity(inst);
    if c > cfg.complexity_cap {
        return Err(AllocationError::GateRejected {
            complexity: c,
            cap: cfg.complexity_cap,
        });
    }
    let free = inst.without_constraints();
    let total: Quantity = free.packages().iter().map(|p| p.attrs[0]).sum();
    let widest = free.bins().iter().map(|b| b.capacity[0]).max().unwrap_or_default();
    let budget = cfg.budget_from(Instant::now());
    let mut nodes = 0u64;
    let probe = |z: u64, nodes: &mut u64| {
        let tol = [Quantity::from_units(z)];
        SearchProblem::new(&free, Some(&tol), &[true]).run(&budget, nodes)
    };

    let mut hi = total.max(widest).units();
    let mut best = match probe(hi, &mut nodes) {
        SearchResult::Found(bins) => bins,
        SearchResult::TimedOut => return Ok(MinMaxOutcome::TimedOut),
        SearchResult::Exhausted => unreachable!("every assignment is within the widest tolerance"),
    };
    let mut lo = 0u64;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match probe(mid, &mut nodes) {
            SearchResult::Found(bins) => {
                best = bins;
                hi = mid;
            }
            SearchResult::Exhausted => lo = mid + 1,
            SearchResult::TimedOut => return Ok(MinMaxOutcome::TimedOut),
        }
    }
    let violation = Quantity::from_units(hi);
    Ok(MinMaxOutcome::Optimal {
        violation,
        assignment: Assignment::new(best),
        accepted: violation <= cfg.nu,
    })
}
