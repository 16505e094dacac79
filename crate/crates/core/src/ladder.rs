//! Solve times across instance complexity.
//!
//! Each instance is timed the way the attack uses the solver: enumerating
//! every bin its first package can occupy.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::allocation::{complexity_of, planted_instance, AllocationError, PlantedConfig, SolverConfig};
use crate::attack::{enumerate_feasible_bins, AttackError};

#[derive(Debug, Clone, PartialEq)]
pub struct LadderConfig {
    /// Bin counts to try. For each, the package count grows until the
    /// complexity passes `max_complexity`.
    pub bins: Vec<usize>,
    pub max_complexity: f64,
    /// Instances per `(n, m)` pair.
    pub reps: usize,
    pub seed: u64,
    /// Its complexity cap decides which instances are gated.
    pub solver: SolverConfig,
    /// Attribute range in cents, drawn log-uniformly.
    pub units: (u64, u64),
    /// Bin tolerance in cents.
    pub tolerance: u64,
    /// Each instance is solved this many times and the fastest run kept.
    pub timing_repeats: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            bins: vec![2, 3, 4, 5, 8],
            max_complexity: 10.0,
            reps: 5,
            seed: 1,
            solver: SolverConfig::default(),
            units: (100, 10_000_000),
            tolerance: 100,
            timing_repeats: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderOutcome {
    /// Every feasible bin found and the rest ruled out.
    Solved,
    TimedOut,
    /// Above the complexity cap; not solved.
    Gated,
}

impl LadderOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            LadderOutcome::Solved => "solved",
            LadderOutcome::TimedOut => "timed_out",
            LadderOutcome::Gated => "gated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub n: usize,
    pub m: usize,
    pub complexity: f64,
    pub outcome: LadderOutcome,
    pub elapsed: Duration,
    /// Solver calls made by the enumeration.
    pub solves: usize,
}

/// Median solve time per whole-number complexity band.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderBand {
    /// Instances with `band - 0.5 <= complexity < band + 0.5`.
    pub band: u32,
    pub instances: usize,
    pub solved: usize,
    pub median: Option<Duration>,
}

/// Planted two-attribute instances of growing size.
pub fn run_ladder(cfg: &LadderConfig) -> Result<Vec<LadderRow>, AllocationError> {
    cfg.solver.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for &m in &cfg.bins {
        for n in 1.. {
            let complexity = complexity_of(n, m);
            if complexity > cfg.max_complexity || (m == 1 && n > 1) {
                break;
            }
            for _ in 0..cfg.reps {
                let planted = PlantedConfig {
                    units: cfg.units,
                    tolerance: cfg.tolerance,
                    ..PlantedConfig::new(n, m, 2)
                };
                let (mut inst, _) = planted_instance(&planted, &mut rng);
                inst.set_target(0);
                let mut row = LadderRow {
                    n,
                    m,
                    complexity,
                    outcome: LadderOutcome::Gated,
                    elapsed: Duration::MAX,
                    solves: 0,
                };
                for _ in 0..cfg.timing_repeats.max(1) {
                    let start = Instant::now();
                    let found = match enumerate_feasible_bins(&inst, &cfg.solver) {
                        Ok(found) => found,
                        Err(AttackError::Allocation(AllocationError::GateRejected { .. })) => break,
                        Err(AttackError::Allocation(e)) => return Err(e),
                        Err(e) => unreachable!("planted instances have a free target: {e}"),
                    };
                    row.elapsed = row.elapsed.min(start.elapsed());
                    row.solves = found.solves;
                    row.outcome = if found.complete {
                        LadderOutcome::Solved
                    } else {
                        LadderOutcome::TimedOut
                    };
                }
                if row.outcome == LadderOutcome::Gated {
                    row.elapsed = Duration::ZERO;
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn median<T: Copy + Ord>(mut xs: Vec<T>) -> Option<T> {
    xs.sort_unstable();
    xs.get(xs.len().saturating_sub(1) / 2).copied()
}

/// Groups rows into whole-number complexity bands, skipping gated rows.
pub fn ladder_bands(rows: &[LadderRow]) -> Vec<LadderBand> {
    let mut bands: Vec<LadderBand> = Vec::new();
    let band_of = |c: f64| (c + 0.5).floor() as u32;
    let mut keys: Vec<u32> = rows
        .iter()
        .filter(|r| r.outcome != LadderOutcome::Gated)
        .map(|r| band_of(r.complexity))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    for band in keys {
        let members: Vec<&LadderRow> = rows
            .iter()
            .filter(|r| r.outcome != LadderOutcome::Gated && band_of(r.complexity) == band)
            .collect();
        let solved: Vec<&&LadderRow> = members
            .iter()
            .filter(|r| r.outcome != LadderOutcome::TimedOut)
            .collect();
        bands.push(LadderBand {
            band,
            instances: members.len(),
            solved: solved.len(),
            median: median(members.iter().map(|r| r.elapsed).collect()),
        });
    }
    bands
}

pub fn write_ladder_csv<W: std::io::Write>(rows: &[LadderRow], out: W, timings: bool) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["complexity", "packages", "bins", "outcome", "seconds", "solves"])?;
    for r in rows {
        let secs = if timings && r.outcome != LadderOutcome::Gated {
            format!("{:.6}", r.elapsed.as_secs_f64())
        } else {
            String::new()
        };
        w.write_record([
            format!("{:.3}", r.complexity),
            r.n.to_string(),
            r.m.to_string(),
            r.outcome.as_str().to_string(),
            secs,
            r.solves.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
