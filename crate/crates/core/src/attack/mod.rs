//! The three-phase re-identification attack.
//!
//! Phase 1 tries to place the target directly in a city using the SH4
//! totals by city. Phase 2 places it in a state using the NCM totals by
//! state. Phase 3 returns to the city totals, restricted to the one state
//! found in phase 2. After each step the candidate importers are those
//! listed in the surviving cities.

mod classifier;
mod enumerate;
mod phases;
mod report;
mod run;

use thiserror::Error;

use crate::allocation::{AllocationError, SolverConfig};
use crate::datagen::{CitySummary, DeidentifiedTransaction, StateSummary};
use crate::quantity::{Quantity, Scale};

pub use classifier::{clt_threshold, clt_tolerance, divergence_classifier, Divergence, Z_99};
pub use enumerate::{
    enumerate_feasible_bins, feasible_bins_per_package, AllPackageBins, FeasibleBins, PackageBins,
};
pub use phases::{BinKind, PhaseInstance, PhaseLevel, SkipReason};
pub use report::{
    aggregate_steps, phase_leakage_report, step_counts, write_phase_leakage, write_step_averages,
    write_traces,
    AttackSummary, InstanceStats, Precision, StepAverage, STEPS, TRACE_HEADER, TRACE_TAIL,
};
pub use run::{
    build_phase_instance, run_attack, AttackTrace, Attacker, CandidateStep, PhaseOutcome,
    PhaseRecord, Verdict,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("the instance has no target package")]
    NoTarget,
    #[error("the target bin must be left open when enumerating")]
    TargetBinSet,
    #[error("the target package has no allowed bin")]
    NoCandidateBins,
    #[error("order {0:?} is not among the de-identified transactions")]
    UnknownOrder(String),
    #[error("phase skipped: {0}")]
    Skipped(SkipReason),
    #[error("invalid attack configuration: {0}")]
    Config(String),
}

/// How bin tolerances are set.
#[derive(Debug, Clone, PartialEq)]
pub enum ToleranceRule {
    /// `max(0.5, 2.33 * sqrt(n_b / 12))` units, where `n_b` counts the
    /// packages allowed in the bin that fit under its capacity plus half a
    /// unit.
    Clt,
    /// The same tolerance for every bin: `[value, weight]`.
    Fixed(Vec<Quantity>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribute {
    Value,
    Weight,
}

impl Attribute {
    pub fn scale(self) -> Scale {
        match self {
            Attribute::Value => Scale::VALUE,
            Attribute::Weight => Scale::WEIGHT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Value => "value",
            Attribute::Weight => "weight",
        }
    }

    pub(crate) fn of_transaction(self, t: &DeidentifiedTransaction) -> Quantity {
        match self {
            Attribute::Value => t.value,
            Attribute::Weight => t.weight,
        }
    }

    pub(crate) fn of_city(self, c: &CitySummary) -> Quantity {
        match self {
            Attribute::Value => c.value,
            Attribute::Weight => c.weight,
        }
    }

    pub(crate) fn of_state(self, s: &StateSummary) -> Quantity {
        match self {
            Attribute::Value => s.value,
            Attribute::Weight => s.weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Budget, node interval and `nu`. Its complexity cap is ignored in
    /// favour of `phase_caps`.
    pub solver: SolverConfig,
    pub tolerance: ToleranceRule,
    /// Attack on value alone instead of value and weight.
    pub value_only: bool,
    /// Complexity cap for phases 1, 2 and 3.
    pub phase_caps: [f64; 3],
    /// Refuse to place a target when the totals also fit without it, since
    /// it may be a transaction the publisher left out of them.
    pub absence_check: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            solver: SolverConfig::default(),
            tolerance: ToleranceRule::Clt,
            value_only: false,
            phase_caps: [12.0; 3],
            absence_check: true,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        self.solver.validate()?;
        if let ToleranceRule::Fixed(t) = &self.tolerance {
            if t.len() < self.attributes().len() {
                return Err(AttackError::Config(format!(
                    "fixed tolerance needs {} values, got {}",
                    self.attributes().len(),
                    t.len()
                )));
            }
        }
        if self.phase_caps.iter().any(|c| c.is_nan() || *c <= 0.0) {
            return Err(AttackError::Config("complexity caps must be positive".into()));
        }
        Ok(())
    }

    pub fn attributes(&self) -> &'static [Attribute] {
        if self.value_only {
            &[Attribute::Value]
        } else {
            &[Attribute::Value, Attribute::Weight]
        }
    }

    pub(crate) fn solver_for(&self, level: usize) -> SolverConfig {
        SolverConfig {
            complexity_cap: self.phase_caps[level],
            ..self.solver.clone()
        }
    }
}
