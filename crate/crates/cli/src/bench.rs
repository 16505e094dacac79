use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use leakfit::ladder::{ladder_bands, run_ladder, write_ladder_csv, LadderConfig};

use crate::config::RunFile;
use crate::error::CliError;
use crate::pick;

pub const LADDER_FILE: &str = "ladder.csv";

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory for the per-instance table. Without it only the band
    /// medians are printed.
    #[arg(long, env = "LEAKFIT_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bin counts to try, comma separated.
    #[arg(long, value_delimiter = ',')]
    bins: Option<Vec<usize>>,
    /// Largest complexity generated.
    #[arg(long)]
    max_complexity: Option<f64>,
    /// Instances per package and bin count.
    #[arg(long)]
    reps: Option<usize>,
    /// Wall-clock budget per enumeration, in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Instances above this complexity are recorded as gated.
    #[arg(long)]
    cap: Option<f64>,
    /// Runs per instance; the fastest is kept.
    #[arg(long)]
    timing_repeats: Option<usize>,
}

pub fn run(args: BenchArgs, file: RunFile) -> Result<(), CliError> {
    let d = LadderConfig::default();
    let budget = pick(args.budget, file.budget, d.solver.budget.as_secs_f64());
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(CliError::Config(format!("budget must be a positive number of seconds, got {budget}")));
    }
    let cfg = LadderConfig {
        bins: pick(args.bins, file.bins, d.bins.clone()),
        max_complexity: pick(args.max_complexity, file.max_complexity, d.max_complexity),
        reps: pick(args.reps, file.reps, d.reps),
        seed: pick(args.seed, file.seed, d.seed),
        solver: leakfit::SolverConfig {
            budget: Duration::from_secs_f64(budget),
            complexity_cap: pick(args.cap, file.cap, d.solver.complexity_cap),
            ..d.solver.clone()
        },
        timing_repeats: pick(args.timing_repeats, file.timing_repeats, d.timing_repeats),
        ..d
    };
    if cfg.bins.iter().any(|&m| m < 2) {
        return Err(CliError::Config("bin counts must be at least 2".into()));
    }
    let rows = run_ladder(&cfg)?;

    if let Some(out) = args.out.or(file.out) {
        std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;
        let path = out.join(LADDER_FILE);
        let w = File::create(&path).map(BufWriter::new).map_err(CliError::io(&path))?;
        write_ladder_csv(&rows, w, true).map_err(CliError::csv(&path))?;
    }

    let gated = rows.iter().filter(|r| r.outcome == leakfit::ladder::LadderOutcome::Gated).count();
    println!("{:<12}{:>10}{:>8}{:>18}", "complexity", "instances", "solved", "median (s)");
    for b in ladder_bands(&rows) {
        let median = b.median.map_or("-".to_string(), |m| format!("{:.6}", m.as_secs_f64()));
        println!("{:<12}{:>10}{:>8}{median:>18}", b.band, b.instances, b.solved);
    }
    if gated > 0 {
        println!("gated: {gated}");
    }
    Ok(())
}
