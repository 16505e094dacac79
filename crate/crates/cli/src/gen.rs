use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::Args;
use leakfit::datagen::{
    generate_world, publish, write_ground_truth, write_release, InclusionClass, TradeWorld, WorldConfig,
    GROUND_TRUTH_FILE,
};
use leakfit::walkthrough::walkthrough_world;

use crate::config::RunFile;
use crate::error::CliError;
use crate::{pick, required};

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Directory for the four release files and the ground truth.
    #[arg(long, env = "LEAKFIT_OUT")]
    out: Option<PathBuf>,
    /// Where to write the ground truth instead of `<out>/ground_truth.csv`.
    #[arg(long, env = "LEAKFIT_GROUND_TRUTH")]
    ground_truth: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the fixed cotton walkthrough world instead of a random one.
    #[arg(long)]
    walkthrough: bool,
    #[arg(long)]
    importers: Option<usize>,
    #[arg(long)]
    cities: Option<usize>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    transactions: Option<usize>,
    #[arg(long)]
    sh4_codes: Option<usize>,
    #[arg(long)]
    ncms_per_sh4: Option<usize>,
    #[arg(long)]
    countries: Option<usize>,
    /// Share of cities with exactly one importer.
    #[arg(long)]
    single_importer_city_fraction: Option<f64>,
    #[arg(long)]
    city_skew: Option<f64>,
    /// Share of transactions left out of the summaries.
    #[arg(long)]
    outlier_rate: Option<f64>,
    /// Share of transactions left out of the microdata.
    #[arg(long)]
    administrative_rate: Option<f64>,
    /// NCMs with fewer distinct importers are withheld from the microdata.
    #[arg(long)]
    suppression_threshold: Option<usize>,
    #[arg(long, conflicts_with = "suppression_threshold")]
    no_suppression: bool,
    /// `YYYYMM` stamped on every transaction.
    #[arg(long)]
    year_month: Option<String>,
}

fn world_config(a: &GenArgs, f: &RunFile) -> WorldConfig {
    let d = WorldConfig::default();
    let threshold = if a.no_suppression {
        0
    } else {
        pick(a.suppression_threshold, f.suppression_threshold, d.suppression_threshold.unwrap_or(0))
    };
    WorldConfig {
        importers: pick(a.importers, f.importers, d.importers),
        cities: pick(a.cities, f.cities, d.cities),
        states: pick(a.states, f.states, d.states),
        transactions: pick(a.transactions, f.transactions, d.transactions),
        sh4_codes: pick(a.sh4_codes, f.sh4_codes, d.sh4_codes),
        ncms_per_sh4: pick(a.ncms_per_sh4, f.ncms_per_sh4, d.ncms_per_sh4),
        countries: pick(a.countries, f.countries, d.countries),
        single_importer_city_fraction: pick(
            a.single_importer_city_fraction,
            f.single_importer_city_fraction,
            d.single_importer_city_fraction,
        ),
        city_skew: pick(a.city_skew, f.city_skew, d.city_skew),
        outlier_rate: pick(a.outlier_rate, f.outlier_rate, d.outlier_rate),
        administrative_rate: pick(a.administrative_rate, f.administrative_rate, d.administrative_rate),
        suppression_threshold: (threshold > 0).then_some(threshold),
        year_month: pick(a.year_month.clone(), f.year_month.clone(), d.year_month.clone()),
        ..d
    }
}

pub fn run(args: GenArgs, file: RunFile) -> Result<(), CliError> {
    let out = required(args.out.clone(), file.out.clone(), "--out")?;
    let world = if args.walkthrough {
        walkthrough_world()
    } else {
        let seed = required(args.seed, file.seed, "--seed")?;
        generate_world(&world_config(&args, &file), seed)?
    };
    let release = publish(&world);

    std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    write_release(&out, &release)?;
    let truth = args
        .ground_truth
        .or(file.ground_truth)
        .unwrap_or_else(|| out.join(GROUND_TRUTH_FILE));
    write_ground_truth(&truth, &world.transactions)?;

    print_stats(&world, &release);
    println!("wrote {}", out.display());
    Ok(())
}

fn print_stats(world: &TradeWorld, release: &leakfit::datagen::SanitizedRelease) {
    let mut per_city: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for i in &world.importers {
        *per_city.entry((&i.state, &i.city)).or_default() += 1;
    }
    let states: BTreeSet<&str> = world.importers.iter().map(|i| i.state.as_str()).collect();
    let single = per_city.values().filter(|&&n| n == 1).count();
    let ncms: BTreeSet<&str> = world.transactions.iter().map(|t| t.ncm.as_str()).collect();
    let published: BTreeSet<&str> = release.deidentified.iter().map(|t| t.ncm.as_str()).collect();

    println!("importers: {}", world.importers.len());
    println!("cities with importers: {} ({single} with exactly one)", per_city.len());
    println!("states with importers: {}", states.len());
    println!("transactions: {}", world.transactions.len());
    for class in [InclusionClass::Effective, InclusionClass::Administrative, InclusionClass::Outlier] {
        let n = world.transactions.iter().filter(|t| t.class == class).count();
        println!("  {:<16}{n:>8}", class.as_str().to_lowercase());
    }
    println!("ncms traded: {} ({} absent from the microdata)", ncms.len(), ncms.len().saturating_sub(published.len()));
    println!("de-identified rows: {}", release.deidentified.len());
    println!("city summary rows: {}", release.by_city.len());
    println!("state summary rows: {}", release.by_state.len());
}
