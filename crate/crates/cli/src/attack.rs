use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use leakfit::attack::{
    aggregate_steps, write_phase_leakage, write_step_averages, write_traces, AttackConfig, AttackSummary,
    AttackTrace, Attacker, ToleranceRule,
};
use leakfit::datagen::{read_ground_truth, read_release};
use leakfit::{Quantity, Scale, SolverConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunFile;
use crate::error::CliError;
use crate::{pick, required};

pub const TRACES_FILE: &str = "traces.csv";
pub const STEPS_FILE: &str = "steps.csv";
pub const LEAKAGE_FILE: &str = "leakage.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Tolerance {
    /// Scaled with the number of packages a bin can hold.
    Clt,
    /// `--tolerance-value` and `--tolerance-weight` for every bin.
    Fixed,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Directory holding the four release files.
    #[arg(long, env = "LEAKFIT_RELEASE")]
    release: Option<PathBuf>,
    /// Directory for traces, step averages, leakage and the summary.
    #[arg(long, env = "LEAKFIT_OUT")]
    out: Option<PathBuf>,
    /// Ground truth CSV; when given, certain verdicts are checked against it.
    #[arg(long, env = "LEAKFIT_GROUND_TRUTH")]
    ground_truth: Option<PathBuf>,
    /// Order number to attack; repeat for several. Default: every transaction.
    #[arg(long = "target")]
    targets: Vec<String>,
    /// Attack a random sample of this many transactions.
    #[arg(long, conflicts_with = "targets")]
    sample: Option<usize>,
    /// Seed for `--sample`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Wall-clock budget per enumeration, in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Search nodes between clock reads.
    #[arg(long)]
    node_interval: Option<u64>,
    /// Complexity cap for all three phases.
    #[arg(long)]
    cap: Option<f64>,
    /// Complexity caps for phases 1, 2 and 3, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 3, conflicts_with = "cap")]
    phase_caps: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    tolerance: Option<Tolerance>,
    /// Fixed value tolerance in USD.
    #[arg(long)]
    tolerance_value: Option<String>,
    /// Fixed weight tolerance in kg.
    #[arg(long)]
    tolerance_weight: Option<String>,
    /// Use value totals only.
    #[arg(long)]
    value_only: bool,
    /// Place targets even when the totals fit without them.
    #[arg(long)]
    no_absence_check: bool,
    /// Report solver times; outputs then differ between runs.
    #[arg(long)]
    timings: bool,
    /// On failed targets, still write the results of the others.
    #[arg(long)]
    keep_partial: bool,
}

fn attack_config(a: &AttackArgs, f: &RunFile) -> Result<AttackConfig, CliError> {
    let d = AttackConfig::default();
    let budget = pick(a.budget, f.budget, d.solver.budget.as_secs_f64());
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(CliError::Config(format!("budget must be a positive number of seconds, got {budget}")));
    }
    let solver = SolverConfig {
        budget: Duration::from_secs_f64(budget),
        node_check_interval: pick(a.node_interval, f.node_interval, d.solver.node_check_interval),
        ..d.solver.clone()
    };
    let phase_caps = match (a.cap, &a.phase_caps, f.cap, &f.phase_caps) {
        (Some(c), ..) => [c; 3],
        (None, Some(v), ..) => caps(v)?,
        (None, None, Some(c), _) => [c; 3],
        (None, None, None, Some(v)) => caps(v)?,
        (None, None, None, None) => d.phase_caps,
    };
    let rule = match a.tolerance {
        Some(t) => t,
        None => match f.tolerance.as_deref() {
            None | Some("clt") => Tolerance::Clt,
            Some("fixed") => Tolerance::Fixed,
            Some(other) => return Err(CliError::Config(format!("tolerance must be clt or fixed, got {other:?}"))),
        },
    };
    let tolerance = match rule {
        Tolerance::Clt => ToleranceRule::Clt,
        Tolerance::Fixed => {
            let parse = |flag: &Option<String>, file: &Option<String>, scale, name: &str| {
                let text = pick(flag.clone(), file.clone(), "0.5".to_string());
                Quantity::parse(&text, scale).map_err(|e| CliError::Config(format!("{name}: {e}")))
            };
            ToleranceRule::Fixed(vec![
                parse(&a.tolerance_value, &f.tolerance_value, Scale::VALUE, "tolerance_value")?,
                parse(&a.tolerance_weight, &f.tolerance_weight, Scale::WEIGHT, "tolerance_weight")?,
            ])
        }
    };
    let cfg = AttackConfig {
        solver,
        tolerance,
        value_only: a.value_only || f.value_only.unwrap_or(false),
        phase_caps,
        absence_check: !a.no_absence_check && f.absence_check.unwrap_or(true),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn caps(v: &[f64]) -> Result<[f64; 3], CliError> {
    v.try_into()
        .map_err(|_| CliError::Config(format!("phase_caps needs 3 values, got {}", v.len())))
}

pub fn run(args: AttackArgs, file: RunFile) -> Result<(), CliError> {
    let release_dir = required(args.release.clone(), file.release.clone(), "--release")?;
    let out = required(args.out.clone(), file.out.clone(), "--out")?;
    let cfg = attack_config(&args, &file)?;
    let release = read_release(&release_dir)?;
    let truth = match args.ground_truth.clone().or(file.ground_truth.clone()) {
        Some(p) => Some(read_ground_truth(&p)?),
        None => None,
    };

    let mut orders: Vec<String> = if !args.targets.is_empty() {
        args.targets.clone()
    } else if let Some(t) = &file.targets {
        t.clone()
    } else {
        release.deidentified.iter().map(|t| t.order.clone()).collect()
    };
    if let Some(n) = args.sample.or(file.sample) {
        let mut rng = ChaCha8Rng::seed_from_u64(pick(args.seed, file.seed, 0));
        orders = orders.choose_multiple(&mut rng, n).cloned().collect();
    }
    orders.sort();
    orders.dedup();

    let keep_partial = args.keep_partial || file.keep_partial.unwrap_or(false);
    let timings = args.timings || file.timings.unwrap_or(false);
    let workers = pick(args.workers, file.workers, 1);

    let attacker = Attacker::new(&release, cfg)?;
    let results = attacker.attack_each(&orders, workers)?;
    let mut traces = Vec::with_capacity(results.len());
    let mut first_err = None;
    let mut failed = 0;
    for (order, r) in orders.iter().zip(results) {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => {
                failed += 1;
                first_err.get_or_insert((order.clone(), e));
            }
        }
    }
    let partial = first_err.map(|(order, source)| CliError::Partial {
        failed,
        total: orders.len(),
        order,
        source,
    });
    let partial = match partial {
        Some(e) if !keep_partial => return Err(e),
        p => p,
    };

    let mut summary = AttackSummary::new(&traces);
    if let Some(truth) = &truth {
        summary.evaluate(&traces, truth, &release.importers);
    }
    write_outputs(&out, &traces, &summary, timings)?;
    let mut stdout = std::io::stdout().lock();
    summary.write_text(&mut stdout, timings).map_err(CliError::io("<stdout>"))?;
    match partial {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

fn write_outputs(out: &Path, traces: &[AttackTrace], summary: &AttackSummary, timings: bool) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let path = out.join(TRACES_FILE);
    write_traces(traces, create(&path)?, timings).map_err(CliError::csv(&path))?;
    let path = out.join(STEPS_FILE);
    write_step_averages(&aggregate_steps(traces), create(&path)?).map_err(CliError::csv(&path))?;
    let path = out.join(LEAKAGE_FILE);
    write_phase_leakage(traces, create(&path)?).map_err(CliError::csv(&path))?;
    let path = out.join(SUMMARY_FILE);
    let mut w = create(&path)?;
    summary.write_text(&mut w, timings).map_err(CliError::io(&path))?;
    std::io::Write::flush(&mut w).map_err(CliError::io(&path))
}
