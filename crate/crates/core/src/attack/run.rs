use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rayon::prelude::*;

use super::enumerate::{enumerate_feasible_bins, feasible_bins_per_package};
use super::phases::{BinKind, City, GroupAnalysis, GroupKey, PhaseInstance, PhaseLevel, ReleaseIndex, SkipReason};
use super::{AttackConfig, AttackError};
use crate::allocation::{complexity, solve_forced, AllocationInstance, SolveOutcome, SolverConfig};
use crate::datagen::SanitizedRelease;
use crate::quantity::Quantity;

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOutcome {
    NotRun,
    Solved {
        /// Bin ids where the target fits.
        feasible: Vec<String>,
        complete: bool,
    },
    Skipped(SkipReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub level: PhaseLevel,
    pub packages: usize,
    pub bins: usize,
    pub complexity: Option<f64>,
    pub outcome: PhaseOutcome,
    pub solves: usize,
    pub elapsed: Duration,
}

impl PhaseRecord {
    pub(crate) fn new(level: PhaseLevel) -> Self {
        PhaseRecord {
            level,
            packages: 0,
            bins: 0,
            complexity: None,
            outcome: PhaseOutcome::NotRun,
            solves: 0,
            elapsed: Duration::ZERO,
        }
    }

    fn sized(&mut self, pi: &PhaseInstance) {
        self.packages = pi.instance.n();
        self.bins = pi.instance.m();
        self.complexity = Some(complexity(&pi.instance));
    }

    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, PhaseOutcome::Solved { complete: true, .. })
    }
}

/// Candidate importers after one step of the attack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateStep {
    /// `prior`, `phase1_filter`, `phase1_solve`, `phase2` or `phase3`.
    pub label: &'static str,
    pub cities: usize,
    pub states: usize,
    pub importers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    /// One city with one importer.
    Certain,
    /// One city with several importers.
    CertainCity,
    /// One state, several cities.
    CertainState,
    Ambiguous,
    SkippedDivergence,
    SkippedComplexity,
    TimedOut,
}

impl Verdict {
    pub const ALL: [Verdict; 7] = [
        Verdict::Certain,
        Verdict::CertainCity,
        Verdict::CertainState,
        Verdict::Ambiguous,
        Verdict::SkippedDivergence,
        Verdict::SkippedComplexity,
        Verdict::TimedOut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certain => "certain",
            Verdict::CertainCity => "certain_city",
            Verdict::CertainState => "certain_state",
            Verdict::Ambiguous => "ambiguous",
            Verdict::SkippedDivergence => "skipped_divergence",
            Verdict::SkippedComplexity => "skipped_complexity",
            Verdict::TimedOut => "timed_out",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackTrace {
    pub order: String,
    pub ncm: String,
    pub country: String,
    pub value: Quantity,
    pub weight: Quantity,
    /// Phases 1, 2 and 3, in that order.
    pub phases: Vec<PhaseRecord>,
    /// Starts with the prior; one entry per step that narrowed the candidates.
    pub steps: Vec<CandidateStep>,
    pub verdict: Verdict,
    /// Set when a single state remains.
    pub state: Option<String>,
    /// Set when a single city remains.
    pub city: Option<String>,
    /// Set on a certain verdict.
    pub importer: Option<String>,
}

impl AttackTrace {
    pub fn candidates(&self) -> usize {
        self.steps.last().map_or(0, |s| s.importers)
    }

    pub fn solver_time(&self) -> Duration {
        self.phases.iter().map(|p| p.elapsed).sum()
    }
}

/// Attacks targets of one release. Per-group results are cached, so one
/// attacker should serve every target of a run.
pub struct Attacker<'a> {
    index: ReleaseIndex<'a>,
    cfg: AttackConfig,
    cache: Mutex<HashMap<GroupKey<'a>, Arc<GroupAnalysis>>>,
}

impl<'a> Attacker<'a> {
    pub fn new(release: &'a SanitizedRelease, cfg: AttackConfig) -> Result<Self, AttackError> {
        cfg.validate()?;
        Ok(Attacker {
            index: ReleaseIndex::new(release),
            cfg,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &AttackConfig {
        &self.cfg
    }

    /// Number of importers in the release.
    pub fn population(&self) -> usize {
        self.index.release.importers.len()
    }

    fn target(&self, order: &str) -> Result<usize, AttackError> {
        self.index
            .release
            .deidentified
            .binary_search_by(|t| t.order.as_str().cmp(order))
            .map_err(|_| AttackError::UnknownOrder(order.to_string()))
    }

    fn analysis(&self, key: GroupKey<'a>) -> Arc<GroupAnalysis> {
        if let Some(a) = self.cache.lock().expect("cache lock").get(&key) {
            return a.clone();
        }
        let computed = Arc::new(self.analyse(key));
        self.cache
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(computed)
            .clone()
    }

    fn analyse(&self, key: GroupKey<'a>) -> GroupAnalysis {
        let pi = match self.index.state(&self.cfg, key) {
            Ok(pi) => pi,
            Err(skip) => return GroupAnalysis::Skipped(skip),
        };
        let c = complexity(&pi.instance);
        let cap = self.cfg.phase_caps[1];
        if c > cap {
            return GroupAnalysis::Skipped(SkipReason::Complexity { complexity: c, cap });
        }
        let all = feasible_bins_per_package(&pi.instance, &self.cfg.solver_for(1))
            .expect("configuration validated on construction");
        if !all.consistent {
            return GroupAnalysis::Skipped(SkipReason::Inconsistent);
        }
        let dispensable = (0..pi.instance.n())
            .map(|p| self.cfg.absence_check && fits_without(&pi.instance, p, &self.cfg.solver_for(1)))
            .collect();
        GroupAnalysis::Done {
            dispensable,
            states: pi
                .bins
                .iter()
                .map(|b| match b {
                    BinKind::State(s) => s.clone(),
                    other => unreachable!("state instance with bin {other:?}"),
                })
                .collect(),
            packages: all.packages,
            complexity: c,
            n: pi.instance.n(),
            m: pi.instance.m(),
            solves: all.solves,
            elapsed: all.elapsed,
        }
    }

    /// The instance a phase would solve for `order`, with no narrowing
    /// from earlier phases.
    pub fn phase_instance(&self, order: &str, level: &PhaseLevel) -> Result<PhaseInstance, AttackError> {
        let ti = self.target(order)?;
        let t = &self.index.release.deidentified[ti];
        let built = match level {
            PhaseLevel::CityDirect => self.index.city_direct(&self.cfg, ti),
            PhaseLevel::State => {
                let key = self.index.ncm_group(t);
                self.index.state(&self.cfg, key).map(|mut pi| {
                    let pos = self.index.ncm_rows(key).iter().position(|&p| p == ti);
                    pi.instance.set_target(pos.expect("target belongs to its group"));
                    pi
                })
            }
            PhaseLevel::CityWithinState(s) => {
                self.index
                    .city_within_state(&self.cfg, ti, s, None, &|k| self.analysis(k))
            }
        };
        built.map_err(AttackError::Skipped)
    }

    pub fn attack(&self, order: &str) -> Result<AttackTrace, AttackError> {
        let ti = self.target(order)?;
        let t = &self.index.release.deidentified[ti];
        let mut current: BTreeSet<City> = self
            .index
            .importers
            .keys()
            .map(|(s, c)| (s.to_string(), c.to_string()))
            .collect();
        let mut steps = vec![self.step("prior", &current)];
        let mut phases = vec![
            PhaseRecord::new(PhaseLevel::CityDirect),
            PhaseRecord::new(PhaseLevel::State),
        ];

        let key = self.index.ncm_group(t);
        let group = self.analysis(key);
        let pos = self
            .index
            .ncm_rows(key)
            .iter()
            .position(|&p| p == ti)
            .expect("target belongs to its group");
        let dispensable = matches!(&*group, GroupAnalysis::Done { dispensable, .. } if dispensable[pos]);

        // Phase 1
        match self.index.city_direct(&self.cfg, ti) {
            Err(skip) => phases[0].outcome = PhaseOutcome::Skipped(skip),
            Ok(pi) => {
                phases[0].sized(&pi);
                // The filter assumes the target's state published a total for
                // its NCM, which fails if the target was left out of them.
                if !dispensable {
                    let rho = pi.instance.target().expect("phase 1 sets the target");
                    let reachable = cities_of(&pi, &pi.instance.allowed_bins(rho));
                    self.narrow(&mut current, &mut steps, "phase1_filter", |c| reachable.contains(c));
                }
                self.solve_phase(&pi, &mut phases[0], &mut current, &mut steps, "phase1_solve")?;
            }
        }

        // Phase 2
        if current.len() > 1 {
            match &*group {
                GroupAnalysis::Skipped(skip) => phases[1].outcome = PhaseOutcome::Skipped(skip.clone()),
                GroupAnalysis::Done {
                    states,
                    packages,
                    complexity,
                    n,
                    m,
                    solves,
                    elapsed,
                    ..
                } => {
                    let bins = &packages[pos];
                    let possible: BTreeSet<&str> =
                        bins.possible().into_iter().map(|b| states[b].as_str()).collect();
                    let rec = &mut phases[1];
                    rec.packages = *n;
                    rec.bins = *m;
                    rec.complexity = Some(*complexity);
                    rec.solves = *solves;
                    rec.elapsed = *elapsed;
                    if dispensable {
                        rec.outcome = PhaseOutcome::Skipped(SkipReason::Dispensable);
                    } else {
                        rec.outcome = PhaseOutcome::Solved {
                            feasible: bins.feasible.iter().map(|&b| states[b].clone()).collect(),
                            complete: bins.is_complete(),
                        };
                        self.narrow(&mut current, &mut steps, "phase2", |c| possible.contains(c.0.as_str()));
                    }
                }
            }
        }

        // Phase 3
        let states: BTreeSet<&str> = current.iter().map(|c| c.0.as_str()).collect();
        if current.len() > 1 && states.len() == 1 {
            let state = states.into_iter().next().expect("one state").to_string();
            let mut rec = PhaseRecord::new(PhaseLevel::CityWithinState(state.clone()));
            match self.index.city_within_state(&self.cfg, ti, &state, Some(&current), &|k| {
                self.analysis(k)
            }) {
                Err(skip) => rec.outcome = PhaseOutcome::Skipped(skip),
                Ok(pi) => {
                    rec.sized(&pi);
                    self.solve_phase(&pi, &mut rec, &mut current, &mut steps, "phase3")?;
                }
            }
            phases.push(rec);
        } else {
            phases.push(PhaseRecord::new(PhaseLevel::CityWithinState(String::new())));
        }

        Ok(self.conclude(t, phases, steps, current))
    }

    fn step(&self, label: &'static str, cities: &BTreeSet<City>) -> CandidateStep {
        CandidateStep {
            label,
            cities: cities.len(),
            states: cities.iter().map(|c| &c.0).collect::<BTreeSet<_>>().len(),
            importers: self.index.importer_count(cities),
        }
    }

    /// Keeps the candidate cities passing `keep` and records a step if the
    /// importer count fell. An empty result contradicts the ground truth
    /// being among the candidates and is ignored.
    fn narrow(
        &self,
        current: &mut BTreeSet<City>,
        steps: &mut Vec<CandidateStep>,
        label: &'static str,
        keep: impl Fn(&City) -> bool,
    ) {
        let next: BTreeSet<City> = current.iter().filter(|c| keep(c)).cloned().collect();
        if next.is_empty() || next.len() == current.len() {
            return;
        }
        *current = next;
        steps.push(self.step(label, current));
    }

    fn solve_phase(
        &self,
        pi: &PhaseInstance,
        rec: &mut PhaseRecord,
        current: &mut BTreeSet<City>,
        steps: &mut Vec<CandidateStep>,
        label: &'static str,
    ) -> Result<(), AttackError> {
        let level = pi.level.index();
        let c = complexity(&pi.instance);
        let cap = self.cfg.phase_caps[level];
        if c > cap {
            rec.outcome = PhaseOutcome::Skipped(SkipReason::Complexity { complexity: c, cap });
            return Ok(());
        }
        let found = enumerate_feasible_bins(&pi.instance, &self.cfg.solver_for(level))?;
        rec.solves = found.solves;
        rec.elapsed = found.elapsed;
        if found.complete && found.bins.is_empty() {
            rec.outcome = PhaseOutcome::Skipped(SkipReason::Inconsistent);
            return Ok(());
        }
        if found.complete
            && self.cfg.absence_check
            && fits_without(&pi.instance, pi.instance.target().expect("phase sets the target"), &self.cfg.solver_for(level))
        {
            rec.outcome = PhaseOutcome::Skipped(SkipReason::Dispensable);
            return Ok(());
        }
        rec.outcome = PhaseOutcome::Solved {
            feasible: found.bins.iter().map(|&b| pi.instance.bins()[b].id.clone()).collect(),
            complete: found.complete,
        };
        if found.complete {
            let cities = cities_of(pi, &found.bins);
            self.narrow(current, steps, label, |c| cities.contains(c));
        }
        Ok(())
    }

    fn conclude(
        &self,
        t: &crate::datagen::DeidentifiedTransaction,
        phases: Vec<PhaseRecord>,
        steps: Vec<CandidateStep>,
        current: BTreeSet<City>,
    ) -> AttackTrace {
        let states: BTreeSet<&String> = current.iter().map(|c| &c.0).collect();
        let state = (states.len() == 1).then(|| states.iter().next().unwrap().to_string());
        let city = (current.len() == 1).then(|| current.iter().next().unwrap().clone());
        let importers: Vec<usize> = city
            .as_ref()
            .map(|c| self.index.importers_in(c).to_vec())
            .unwrap_or_default();
        let verdict = if city.is_some() && importers.len() == 1 {
            Verdict::Certain
        } else if city.is_some() {
            Verdict::CertainCity
        } else if state.is_some() {
            Verdict::CertainState
        } else if phases.iter().any(PhaseRecord::is_solved) {
            Verdict::Ambiguous
        } else {
            unsolved_verdict(&phases)
        };
        AttackTrace {
            order: t.order.clone(),
            ncm: t.ncm.to_string(),
            country: t.country.clone(),
            value: t.value,
            weight: t.weight,
            phases,
            steps,
            verdict,
            state,
            city: city.map(|c| c.1),
            importer: (verdict == Verdict::Certain)
                .then(|| self.index.release.importers[importers[0]].id.clone()),
        }
    }

    /// Attacks every order on a pool of `workers` threads, returning one
    /// result per order in input order.
    pub fn attack_each(
        &self,
        orders: &[String],
        workers: usize,
    ) -> Result<Vec<Result<AttackTrace, AttackError>>, AttackError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| AttackError::Config(e.to_string()))?;
        Ok(pool.install(|| orders.par_iter().map(|o| self.attack(o)).collect()))
    }

    /// Like [`Attacker::attack_each`], but fails on the first error. Traces
    /// come back sorted by order.
    pub fn attack_all(&self, orders: &[String], workers: usize) -> Result<Vec<AttackTrace>, AttackError> {
        let mut traces = self
            .attack_each(orders, workers)?
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        traces.sort_by(|a, b| a.order.cmp(&b.order));
        Ok(traces)
    }
}

fn cities_of(pi: &PhaseInstance, bins: &[usize]) -> BTreeSet<City> {
    bins.iter()
        .filter_map(|&b| match &pi.bins[b] {
            BinKind::City { state, city } => Some((state.clone(), city.clone())),
            _ => None,
        })
        .collect()
}

/// Whether the instance stays feasible with package `p` taken out. A
/// timeout counts as feasible.
fn fits_without(inst: &AllocationInstance, p: usize, cfg: &SolverConfig) -> bool {
    let Some(rest) = inst.without_package(p) else {
        return (0..inst.m()).all(|b| (0..inst.k()).all(|i| inst.bins()[b].lower(i) == Quantity::ZERO));
    };
    !matches!(solve_forced(&rest, cfg), Ok(SolveOutcome::Infeasible { .. }))
}

fn unsolved_verdict(phases: &[PhaseRecord]) -> Verdict {
    for rec in [&phases[1], &phases[0]] {
        match &rec.outcome {
            PhaseOutcome::Skipped(SkipReason::Complexity { .. }) => return Verdict::SkippedComplexity,
            PhaseOutcome::Skipped(_) => return Verdict::SkippedDivergence,
            PhaseOutcome::Solved { complete: false, .. } => return Verdict::TimedOut,
            _ => {}
        }
    }
    Verdict::Ambiguous
}

/// Runs the attack on one target.
pub fn run_attack(
    release: &SanitizedRelease,
    order: &str,
    cfg: &AttackConfig,
) -> Result<AttackTrace, AttackError> {
    Attacker::new(release, cfg.clone())?.attack(order)
}

/// Builds the instance of one phase for one target.
pub fn build_phase_instance(
    release: &SanitizedRelease,
    order: &str,
    level: &PhaseLevel,
    cfg: &AttackConfig,
) -> Result<PhaseInstance, AttackError> {
    Attacker::new(release, cfg.clone())?.phase_instance(order, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::publish;
    use crate::datagen::publish::tests::{hand_world, tx};
    use crate::datagen::InclusionClass;
    use crate::walkthrough::{walkthrough_world, TARGET_ORDER};

    fn four_importer_world() -> SanitizedRelease {
        publish(&hand_world(
            vec![
                tx("1", "52083900", 30_000, "I1"),
                tx("2", "52083900", 70_000, "I3"),
                tx("3", "52083900", 120_000, "I2"),
                tx("4", "52083900", 250_000, "I5"),
            ],
            Some(4),
        ))
    }

    #[test]
    fn lone_city_row_is_certain_at_phase_one() {
        let release = four_importer_world();
        let trace = run_attack(&release, "4", &AttackConfig::default()).unwrap();
        assert!(trace.phases[0].is_solved());
        assert_eq!(trace.verdict, Verdict::Certain);
        assert_eq!(trace.importer.as_deref(), Some("I5"));
        let counts: Vec<(&str, usize)> = trace.steps.iter().map(|s| (s.label, s.importers)).collect();
        assert_eq!(counts, [("prior", 5), ("phase1_solve", 1)]);
        assert_eq!(trace.phases[1].outcome, PhaseOutcome::NotRun);
    }

    #[test]
    fn shared_city_stops_at_the_city() {
        let release = four_importer_world();
        let trace = run_attack(&release, "3", &AttackConfig::default()).unwrap();
        assert_eq!(trace.verdict, Verdict::CertainCity);
        assert_eq!(trace.city.as_deref(), Some("CITY 1"));
        assert_eq!(trace.importer, None);
        assert_eq!(trace.candidates(), 2);
    }

    #[test]
    fn walkthrough_instances_have_the_published_shape() {
        let release = publish(&walkthrough_world());
        let cfg = AttackConfig::default();
        let state = build_phase_instance(&release, TARGET_ORDER, &PhaseLevel::State, &cfg).unwrap();
        assert_eq!((state.instance.n(), state.instance.m()), (14, 5));
        assert_eq!(state.instance.packages()[state.instance.target().unwrap()].id, TARGET_ORDER);
        let direct = build_phase_instance(&release, TARGET_ORDER, &PhaseLevel::CityDirect, &cfg).unwrap();
        assert_eq!((direct.instance.n(), direct.instance.m()), (99, 19));
        let mg = PhaseLevel::CityWithinState("MINAS GERAIS".into());
        let within = build_phase_instance(&release, TARGET_ORDER, &mg, &cfg).unwrap();
        let cities: Vec<&BinKind> = within.bins.iter().filter(|b| matches!(b, BinKind::City { .. })).collect();
        assert_eq!(cities.len(), 3);
    }

    #[test]
    fn single_row_single_transaction() {
        let release = publish(&hand_world(vec![tx("1", "52083900", 500, "I5")], None));
        let pi = build_phase_instance(&release, "1", &PhaseLevel::State, &AttackConfig::default()).unwrap();
        assert_eq!((pi.instance.n(), pi.instance.m()), (1, 1));
    }

    #[test]
    fn suppressed_sibling_blocks_phase_one() {
        let mut txs = four_importer_world_txs();
        txs.push(tx("5", "52081100", 10_000, "I4"));
        let release = publish(&hand_world(txs, Some(4)));
        let cfg = AttackConfig::default();
        assert_eq!(
            build_phase_instance(&release, "4", &PhaseLevel::CityDirect, &cfg),
            Err(AttackError::Skipped(SkipReason::Suppressed { ncm: "52081100".into() }))
        );
        assert_eq!(
            run_attack(&release, "5", &cfg).unwrap_err(),
            AttackError::UnknownOrder("5".into())
        );
    }

    fn four_importer_world_txs() -> Vec<crate::datagen::MicroTransaction> {
        vec![
            tx("1", "52083900", 30_000, "I1"),
            tx("2", "52083900", 70_000, "I3"),
            tx("3", "52083900", 120_000, "I2"),
            tx("4", "52083900", 250_000, "I5"),
        ]
    }

    #[test]
    fn large_exclusion_is_skipped() {
        let mut txs = four_importer_world_txs();
        let mut dropped = tx("6", "52083900", 10_000, "I4");
        dropped.class = InclusionClass::Outlier;
        txs.push(dropped);
        let release = publish(&hand_world(txs, Some(4)));
        let trace = run_attack(&release, "4", &AttackConfig::default()).unwrap();
        assert!(matches!(trace.phases[0].outcome, PhaseOutcome::Skipped(SkipReason::Divergent { .. })));
        assert!(matches!(trace.phases[1].outcome, PhaseOutcome::Skipped(SkipReason::Divergent { .. })));
        assert_eq!(trace.verdict, Verdict::SkippedDivergence);
        assert_eq!(trace.candidates(), 5);
    }

    #[test]
    fn negligible_target_is_not_placed() {
        let mut txs = four_importer_world_txs();
        txs.push(tx("7", "52083900", 40, "I4"));
        let release = publish(&hand_world(txs, Some(4)));
        let trace = run_attack(&release, "7", &AttackConfig::default()).unwrap();
        assert_eq!(trace.phases[0].outcome, PhaseOutcome::Skipped(SkipReason::Dispensable));
        assert_eq!(trace.verdict, Verdict::SkippedDivergence);
        let cfg = AttackConfig {
            absence_check: false,
            ..AttackConfig::default()
        };
        assert_ne!(run_attack(&release, "7", &cfg).unwrap().verdict, Verdict::SkippedDivergence);
    }

    #[test]
    fn pool_matches_sequential_runs() {
        let release = four_importer_world();
        let attacker = Attacker::new(&release, AttackConfig::default()).unwrap();
        let orders: Vec<String> = ["4", "1", "3", "2"].iter().map(|s| s.to_string()).collect();
        let pooled = attacker.attack_all(&orders, 3).unwrap();
        let order: Vec<&str> = pooled.iter().map(|t| t.order.as_str()).collect();
        assert_eq!(order, ["1", "2", "3", "4"]);
        for t in &pooled {
            let alone = run_attack(&release, &t.order, &AttackConfig::default()).unwrap();
            assert_eq!(alone.verdict, t.verdict);
            assert_eq!(alone.steps, t.steps);
        }
    }
}
