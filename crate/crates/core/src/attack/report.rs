use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use super::run::{AttackTrace, PhaseOutcome, PhaseRecord, Verdict};
use crate::datagen::{ImporterRecord, MicroTransaction};
use crate::qif::{format_probability, format_ratio, leakage_from_counts, LeakageRow, QifError};
use crate::quantity::{Quantity, Scale};

/// Step labels in attack order.
pub const STEPS: [&str; 5] = ["prior", "phase1_filter", "phase1_solve", "phase2", "phase3"];

pub const TRACE_HEADER: [&str; 30] = [
    "order",
    "ncm",
    "country",
    "value",
    "weight",
    "verdict",
    "phase1_status",
    "phase1_packages",
    "phase1_bins",
    "phase1_complexity",
    "phase1_feasible",
    "phase2_status",
    "phase2_packages",
    "phase2_bins",
    "phase2_complexity",
    "phase2_feasible",
    "phase3_state",
    "phase3_status",
    "phase3_packages",
    "phase3_bins",
    "phase3_complexity",
    "phase3_feasible",
    "candidates_prior",
    "candidates_phase1_filter",
    "candidates_phase1_solve",
    "candidates_phase2",
    "candidates_phase3",
    "state",
    "city",
    "importer",
];

/// Columns appended after [`TRACE_HEADER`].
pub const TRACE_TAIL: [&str; 3] = ["vulnerability", "cumulative_leakage", "solver_seconds"];

fn status(rec: &PhaseRecord) -> String {
    match &rec.outcome {
        PhaseOutcome::NotRun => "not_run".into(),
        PhaseOutcome::Solved { complete: true, .. } => "solved".into(),
        PhaseOutcome::Solved { complete: false, .. } => "timed_out".into(),
        PhaseOutcome::Skipped(r) => format!("skipped_{}", r.label()),
    }
}

fn feasible(rec: &PhaseRecord) -> String {
    match &rec.outcome {
        PhaseOutcome::Solved { feasible, .. } => feasible.join(";"),
        _ => String::new(),
    }
}

/// Candidate importers after each of [`STEPS`], carrying the last count
/// forward over steps that did not narrow anything.
pub fn step_counts(trace: &AttackTrace) -> [usize; 5] {
    let mut out = [0; 5];
    let mut cur = trace.steps.first().map_or(0, |s| s.importers);
    for (i, label) in STEPS.iter().enumerate() {
        if let Some(s) = trace.steps.iter().find(|s| s.label == *label) {
            cur = s.importers;
        }
        out[i] = cur;
    }
    out
}

/// One CSV row per trace. With `timings` off the solver-seconds column is
/// left empty so repeated runs produce identical files.
pub fn write_traces<W: Write>(traces: &[AttackTrace], out: W, timings: bool) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER.iter().chain(&TRACE_TAIL))?;
    for t in traces {
        let mut row = vec![
            t.order.clone(),
            t.ncm.clone(),
            t.country.clone(),
            t.value.display(Scale::VALUE).to_string(),
            t.weight.display(Scale::WEIGHT).to_string(),
            t.verdict.as_str().to_string(),
        ];
        for (i, rec) in t.phases.iter().enumerate() {
            if i == 2 {
                row.push(match &rec.level {
                    super::PhaseLevel::CityWithinState(s) => s.clone(),
                    _ => String::new(),
                });
            }
            row.push(status(rec));
            row.push(rec.packages.to_string());
            row.push(rec.bins.to_string());
            row.push(rec.complexity.map_or(String::new(), |c| format!("{c:.3}")));
            row.push(feasible(rec));
        }
        row.extend(step_counts(t).iter().map(usize::to_string));
        row.push(t.state.clone().unwrap_or_default());
        row.push(t.city.clone().unwrap_or_default());
        row.push(t.importer.clone().unwrap_or_default());
        let leak = phase_leakage_report(t).expect("trace counts are monotone");
        let last = leak.last().expect("the prior row is always present");
        row.push(format_probability(&last.vulnerability));
        row.push(format_ratio(&last.cumulative_leakage));
        row.push(if timings {
            format!("{:.3}", t.solver_time().as_secs_f64())
        } else {
            String::new()
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Candidate count, vulnerability and leakage after each step that
/// narrowed the candidates, starting from the uniform prior over the
/// population.
pub fn phase_leakage_report(trace: &AttackTrace) -> Result<Vec<LeakageRow>, QifError> {
    let counts: Vec<(String, u64)> = trace
        .steps
        .iter()
        .map(|s| (s.label.to_string(), s.importers as u64))
        .collect();
    leakage_from_counts(&counts)
}

/// One row per target and narrowing step: `order, phase, candidates,
/// vulnerability, step_leakage, cumulative_leakage`.
pub fn write_phase_leakage<W: Write>(traces: &[AttackTrace], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["order", "phase", "candidates", "vulnerability", "step_leakage", "cumulative_leakage"])?;
    for t in traces {
        let Ok(rows) = phase_leakage_report(t) else {
            continue;
        };
        for r in rows {
            w.write_record([
                t.order.clone(),
                r.label,
                r.candidates.to_string(),
                format_probability(&r.vulnerability),
                format_ratio(&r.step_leakage),
                format_ratio(&r.cumulative_leakage),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean over targets after one attack step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAverage {
    pub label: &'static str,
    /// Mean of `1 / candidates`.
    pub probability: f64,
    /// `probability` over the prior's.
    pub leakage: f64,
    /// Targets down to a single candidate.
    pub certain: usize,
    pub certain_value: Quantity,
}

/// Per-step means across traces, with each trace's count carried forward
/// through steps it skipped.
pub fn aggregate_steps(traces: &[AttackTrace]) -> Vec<StepAverage> {
    let counts: Vec<[usize; 5]> = traces.iter().map(step_counts).collect();
    let mut out: Vec<StepAverage> = Vec::with_capacity(STEPS.len());
    for (i, label) in STEPS.iter().enumerate() {
        let probability = if traces.is_empty() {
            0.0
        } else {
            counts.iter().map(|c| 1.0 / c[i].max(1) as f64).sum::<f64>() / traces.len() as f64
        };
        let prior = out.first().map_or(probability, |p| p.probability);
        let mut certain = 0;
        let mut certain_value = Quantity::ZERO;
        for (t, c) in traces.iter().zip(&counts) {
            if c[i] == 1 {
                certain += 1;
                certain_value += t.value;
            }
        }
        out.push(StepAverage {
            label,
            probability,
            leakage: if prior > 0.0 { probability / prior } else { 0.0 },
            certain,
            certain_value,
        });
    }
    out
}

pub fn write_step_averages<W: Write>(steps: &[StepAverage], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "probability", "leakage", "certain", "certain_value"])?;
    for s in steps {
        w.write_record([
            s.label.to_string(),
            format!("{:.6}", s.probability),
            format!("{:.2}", s.leakage),
            s.certain.to_string(),
            s.certain_value.display(Scale::VALUE).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstanceStats {
    pub count: usize,
    /// Mean over the instances whose complexity is known.
    pub complexity: Option<f64>,
    pub seconds: Option<f64>,
}

impl InstanceStats {
    fn from(recs: &[&PhaseRecord], timed: bool) -> Self {
        let cs: Vec<f64> = recs.iter().filter_map(|r| r.complexity).collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let secs: Vec<f64> = recs.iter().map(|r| r.elapsed.as_secs_f64()).collect();
        InstanceStats {
            count: recs.len(),
            complexity: mean(&cs),
            seconds: if timed { mean(&secs) } else { None },
        }
    }
}

/// How often certain verdicts match the ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Precision {
    pub certain: usize,
    pub certain_correct: usize,
    /// Targets placed in a single city, whether or not it has one importer.
    pub city: usize,
    pub city_correct: usize,
}

impl Precision {
    pub fn false_certainties(&self) -> usize {
        self.certain - self.certain_correct
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSummary {
    pub targets: usize,
    pub verdicts: BTreeMap<Verdict, usize>,
    /// Phase instances that were run to completion.
    pub solved: InstanceStats,
    /// Phase instances that were built or gated but not solved.
    pub unsolved: InstanceStats,
    pub total_value: Quantity,
    /// Value of the targets with a certain verdict.
    pub reidentified_value: Quantity,
    pub precision: Option<Precision>,
}

impl AttackSummary {
    pub fn new(traces: &[AttackTrace]) -> Self {
        let mut verdicts: BTreeMap<Verdict, usize> = Verdict::ALL.iter().map(|v| (*v, 0)).collect();
        for t in traces {
            *verdicts.entry(t.verdict).or_default() += 1;
        }
        let records: Vec<&PhaseRecord> = traces.iter().flat_map(|t| &t.phases).collect();
        let solved: Vec<&PhaseRecord> = records.iter().copied().filter(|r| r.is_solved()).collect();
        let unsolved: Vec<&PhaseRecord> = records
            .iter()
            .copied()
            .filter(|r| !r.is_solved() && r.complexity.is_some())
            .collect();
        AttackSummary {
            targets: traces.len(),
            verdicts,
            solved: InstanceStats::from(&solved, true),
            unsolved: InstanceStats::from(&unsolved, false),
            total_value: traces.iter().map(|t| t.value).sum(),
            reidentified_value: traces
                .iter()
                .filter(|t| t.verdict == Verdict::Certain)
                .map(|t| t.value)
                .sum(),
            precision: None,
        }
    }

    /// Scores the verdicts against the ground truth.
    pub fn evaluate(&mut self, traces: &[AttackTrace], truth: &[MicroTransaction], importers: &[ImporterRecord]) {
        let owner: HashMap<&str, &str> =
            truth.iter().map(|t| (t.order.as_str(), t.importer.as_str())).collect();
        let home: HashMap<&str, (&str, &str)> = importers
            .iter()
            .map(|i| (i.id.as_str(), (i.state.as_str(), i.city.as_str())))
            .collect();
        let mut p = Precision::default();
        for t in traces {
            let Some(real) = owner.get(t.order.as_str()) else {
                continue;
            };
            if let Some(id) = &t.importer {
                p.certain += 1;
                p.certain_correct += usize::from(id == real);
            }
            if let (Some(city), Some(state)) = (&t.city, &t.state) {
                p.city += 1;
                p.city_correct += usize::from(home.get(real) == Some(&(state.as_str(), city.as_str())));
            }
        }
        self.precision = Some(p);
    }

    pub fn write_text<W: Write>(&self, mut out: W, timings: bool) -> std::io::Result<()> {
        writeln!(out, "targets: {}", self.targets)?;
        for (v, n) in &self.verdicts {
            writeln!(out, "  {:<20}{n:>8}", v.as_str())?;
        }
        writeln!(out)?;
        writeln!(out, "{:<10}{:>8}{:>16}{:>20}", "status", "count", "avg complexity", "avg solve time (s)")?;
        let fmt = |x: Option<f64>, d: usize| x.map_or("-".to_string(), |v| format!("{v:.d$}"));
        for (name, s) in [("unsolved", &self.unsolved), ("solved", &self.solved)] {
            let secs = if timings { fmt(s.seconds, 3) } else { "-".into() };
            writeln!(out, "{name:<10}{:>8}{:>16}{secs:>20}", s.count, fmt(s.complexity, 2))?;
        }
        writeln!(out)?;
        let share = if self.total_value.units() == 0 {
            0.0
        } else {
            100.0 * self.reidentified_value.units() as f64 / self.total_value.units() as f64
        };
        writeln!(
            out,
            "re-identified value: {} of {} ({share:.2}%)",
            self.reidentified_value.display(Scale::VALUE),
            self.total_value.display(Scale::VALUE)
        )?;
        if let Some(p) = &self.precision {
            let pct = |a: usize, b: usize| {
                if b == 0 {
                    "n/a".to_string()
                } else {
                    format!("{:.2}%", 100.0 * a as f64 / b as f64)
                }
            };
            writeln!(
                out,
                "precision of certain verdicts: {}/{} ({})",
                p.certain_correct,
                p.certain,
                pct(p.certain_correct, p.certain)
            )?;
            writeln!(
                out,
                "precision of certain cities: {}/{} ({})",
                p.city_correct,
                p.city,
                pct(p.city_correct, p.city)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{run_attack, AttackConfig, CandidateStep, PhaseLevel};
    use crate::datagen::publish;
    use crate::walkthrough::{walkthrough_world, TARGET_ORDER};

    fn trace(order: &str, value: u64, steps: &[(&'static str, usize)], verdict: Verdict) -> AttackTrace {
        AttackTrace {
            order: order.into(),
            ncm: "52083900".into(),
            country: "CHINA".into(),
            value: Quantity::from_units(value),
            weight: Quantity::from_units(1),
            phases: vec![
                PhaseRecord::new(PhaseLevel::CityDirect),
                PhaseRecord::new(PhaseLevel::State),
                PhaseRecord::new(PhaseLevel::CityWithinState(String::new())),
            ],
            steps: steps
                .iter()
                .map(|&(label, importers)| CandidateStep {
                    label,
                    cities: 1,
                    states: 1,
                    importers,
                })
                .collect(),
            verdict,
            state: None,
            city: None,
            importer: None,
        }
    }

    #[test]
    fn walkthrough_leakage_table() {
        let release = publish(&walkthrough_world());
        let t = run_attack(&release, TARGET_ORDER, &AttackConfig::default()).unwrap();
        let rows = phase_leakage_report(&t).unwrap();
        let shown: Vec<(u64, String, String)> = rows
            .iter()
            .map(|r| (r.candidates, format_probability(&r.vulnerability), format_ratio(&r.step_leakage)))
            .collect();
        let expect = [(18_430, "0.005%", "1"), (4_923, "0.02%", "3.7"), (326, "0.3%", "15"), (1, "100%", "326")];
        assert_eq!(shown.len(), expect.len());
        for (got, want) in shown.iter().zip(expect) {
            assert_eq!((got.0, got.1.as_str(), got.2.as_str()), want);
        }
        assert_eq!(format_ratio(&rows[3].cumulative_leakage), "18430");
    }

    #[test]
    fn ambiguous_trace_ends_at_one_in_fifty() {
        let t = trace("1", 100, &[("prior", 500), ("phase2", 50)], Verdict::Ambiguous);
        let rows = phase_leakage_report(&t).unwrap();
        assert_eq!(format_probability(&rows[1].vulnerability), "2%");
        assert_eq!(format_ratio(&rows[1].cumulative_leakage), "10");
    }

    #[test]
    fn step_means_carry_counts_forward() {
        let traces = [
            trace("1", 100, &[("prior", 10), ("phase1_filter", 5), ("phase3", 1)], Verdict::Certain),
            trace("2", 300, &[("prior", 10), ("phase2", 2)], Verdict::CertainState),
        ];
        assert_eq!(step_counts(&traces[0]), [10, 5, 5, 5, 1]);
        assert_eq!(step_counts(&traces[1]), [10, 10, 10, 2, 2]);
        let steps = aggregate_steps(&traces);
        let expect = [0.1, (0.2 + 0.1) / 2.0, (0.2 + 0.1) / 2.0, (0.2 + 0.5) / 2.0, (1.0 + 0.5) / 2.0];
        for (s, e) in steps.iter().zip(expect) {
            assert!((s.probability - e).abs() < 1e-12, "{}: {} vs {e}", s.label, s.probability);
            assert!((s.leakage - e / 0.1).abs() < 1e-9);
        }
        assert_eq!((steps[4].certain, steps[4].certain_value), (1, Quantity::from_units(100)));
        assert_eq!(steps[3].certain, 0);
    }

    #[test]
    fn trace_rows_match_the_header() {
        let release = publish(&walkthrough_world());
        let t = run_attack(&release, TARGET_ORDER, &AttackConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_traces(std::slice::from_ref(&t), &mut buf, false).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header.len(), TRACE_HEADER.len() + TRACE_TAIL.len());
        let row = r.records().next().unwrap().unwrap();
        let get = |name: &str| row.get(header.iter().position(|h| h == name).unwrap()).unwrap().to_string();
        assert_eq!(get("verdict"), "certain");
        assert_eq!(get("phase1_status"), "skipped_complexity");
        assert_eq!(get("phase2_feasible"), "MINAS GERAIS");
        assert_eq!(get("phase3_feasible"), "OURO BRANCO");
        assert_eq!(get("candidates_phase1_solve"), "4923");
        assert_eq!(get("vulnerability"), "100%");
        assert_eq!(get("solver_seconds"), "");
    }

    #[test]
    fn summary_counts_and_precision() {
        let release = publish(&walkthrough_world());
        let world = walkthrough_world();
        let t = run_attack(&release, TARGET_ORDER, &AttackConfig::default()).unwrap();
        let mut s = AttackSummary::new(std::slice::from_ref(&t));
        assert_eq!(s.verdicts[&Verdict::Certain], 1);
        assert_eq!(s.solved.count, 2);
        assert_eq!(s.unsolved.count, 1);
        assert!(s.unsolved.complexity.unwrap() > 100.0);
        assert_eq!(s.reidentified_value, t.value);
        s.evaluate(std::slice::from_ref(&t), &world.transactions, &release.importers);
        let p = s.precision.unwrap();
        assert_eq!((p.certain, p.certain_correct, p.city, p.city_correct), (1, 1, 1, 1));
    }
}
