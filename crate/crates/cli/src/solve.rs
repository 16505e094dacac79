use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use leakfit::allocation::{read_instance, solve_detailed};
use leakfit::attack::enumerate_feasible_bins;
use leakfit::{complexity, Scale, SolveOutcome, SolverConfig};

use crate::config::RunFile;
use crate::error::CliError;
use crate::pick;

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Packages CSV: `id,attr_1,...,attr_k`.
    #[arg(long)]
    packages: PathBuf,
    /// Bins CSV: `id,cap_1,...,cap_k,tol_1,...,tol_k`.
    #[arg(long)]
    bins: PathBuf,
    /// Decimal places per attribute, comma separated. Default: 2 for the
    /// first attribute (USD) and 5 for the rest (kg).
    #[arg(long, value_delimiter = ',')]
    decimals: Option<Vec<u32>>,
    /// Target package id.
    #[arg(long)]
    target: Option<String>,
    /// Pin the target to this bin.
    #[arg(long, requires = "target", conflicts_with = "enumerate")]
    target_bin: Option<String>,
    /// List every bin the target can occupy.
    #[arg(long, requires = "target")]
    enumerate: bool,
    /// Skip the complexity gate.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    cap: Option<f64>,
    /// Wall-clock budget, in seconds.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    node_interval: Option<u64>,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(CliError::io(path))
}

fn attribute_count(path: &Path) -> Result<usize, CliError> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let width = rdr.headers().map_err(CliError::csv(path))?.len();
    if width < 2 {
        return Err(CliError::Config(format!("{}: needs an id column and at least one attribute", path.display())));
    }
    Ok(width - 1)
}

pub fn run(args: SolveArgs, file: RunFile) -> Result<(), CliError> {
    let k = attribute_count(&args.packages)?;
    let scales: Vec<Scale> = match &args.decimals {
        Some(d) if d.len() != k => {
            return Err(CliError::Config(format!("{} decimal counts for {k} attributes", d.len())));
        }
        Some(d) => d.iter().map(|&n| Scale::new(n)).collect(),
        None => (0..k).map(|a| if a == 0 { Scale::VALUE } else { Scale::WEIGHT }).collect(),
    };
    let mut inst = read_instance(open(&args.packages)?, open(&args.bins)?, &scales)?;
    if let Some(t) = &args.target {
        inst = inst.with_target(t)?;
    }
    if let Some(b) = &args.target_bin {
        inst = inst.with_target_bin(b)?;
    }

    let d = SolverConfig::default();
    let budget = pick(args.budget, file.budget, d.budget.as_secs_f64());
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(CliError::Config(format!("budget must be a positive number of seconds, got {budget}")));
    }
    let cfg = SolverConfig {
        budget: Duration::from_secs_f64(budget),
        node_check_interval: pick(args.node_interval, file.node_interval, d.node_check_interval),
        complexity_cap: if args.force { f64::INFINITY } else { pick(args.cap, file.cap, d.complexity_cap) },
        ..d
    };

    println!("packages: {}  bins: {}  attributes: {k}", inst.n(), inst.m());
    println!("complexity: {:.3}", complexity(&inst));
    if args.enumerate {
        let found = enumerate_feasible_bins(&inst, &cfg)?;
        let names: Vec<&str> = found.bins.iter().map(|&b| inst.bins()[b].id.as_str()).collect();
        println!("feasible bins: {}", names.join(";"));
        println!("complete: {}", found.complete);
        return Ok(());
    }
    match solve_detailed(&inst, &cfg, args.force)?.outcome {
        SolveOutcome::Feasible(a) => {
            println!("feasible");
            for (p, pkg) in inst.packages().iter().enumerate() {
                println!("{},{}", pkg.id, inst.bins()[a.bin_of(p)].id);
            }
        }
        SolveOutcome::Infeasible { .. } => println!("infeasible"),
        SolveOutcome::TimedOut => println!("timed out"),
    }
    Ok(())
}
