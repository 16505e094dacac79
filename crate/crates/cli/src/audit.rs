use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use leakfit::datagen::{audit_divergence, read_release, DivergenceBucket};
use leakfit::{Quantity, Scale};

use crate::config::RunFile;
use crate::error::CliError;
use crate::required;

pub const AUDIT_FILE: &str = "audit.csv";

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Directory holding the four release files.
    #[arg(long, env = "LEAKFIT_RELEASE")]
    release: Option<PathBuf>,
    /// Directory for the per-NCM audit table. Without it only the bucket
    /// totals are printed.
    #[arg(long, env = "LEAKFIT_OUT")]
    out: Option<PathBuf>,
}

pub fn run(args: AuditArgs, file: RunFile) -> Result<(), CliError> {
    let dir = required(args.release, file.release, "--release")?;
    let release = read_release(&dir)?;
    let report = audit_divergence(&release);

    let total = report.total_value();
    println!("{:<24}{:>8}{:>20}{:>10}", "bucket", "ncms", "summary value", "share");
    for bucket in DivergenceBucket::ALL {
        let value = report.value(bucket);
        let share = if total == 0 { 0.0 } else { 100.0 * value as f64 / total as f64 };
        println!(
            "{:<24}{:>8}{:>20}{:>9.2}%",
            bucket.label(),
            report.count(bucket),
            Quantity::from_units(value).display(Scale::VALUE).to_string(),
            share
        );
    }
    println!(
        "{:<24}{:>8}{:>20}",
        "total",
        report.groups.len(),
        Quantity::from_units(total).display(Scale::VALUE).to_string()
    );

    if let Some(out) = args.out.or(file.out) {
        std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;
        let path = out.join(AUDIT_FILE);
        let w = File::create(&path).map(BufWriter::new).map_err(CliError::io(&path))?;
        report.write_csv(w).map_err(CliError::csv(&path))?;
    }
    Ok(())
}
