use std::collections::BTreeMap;

use super::{Ncm, SanitizedRelease};
use crate::quantity::Scale;

/// Differences below this many cents are attributed to rounding.
const ROUNDING_BAND_CENTS: i64 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DivergenceBucket {
    /// Present in the state summary, absent from the microdata.
    Suppressed,
    /// `|diff| < 2 USD`.
    Rounding,
    /// The summary reports at least 2 USD more than the microdata.
    SummaryHigher,
    /// The summary reports at least 2 USD less than the microdata.
    SummaryLower,
}

impl DivergenceBucket {
    pub const ALL: [DivergenceBucket; 4] = [
        DivergenceBucket::Suppressed,
        DivergenceBucket::Rounding,
        DivergenceBucket::SummaryHigher,
        DivergenceBucket::SummaryLower,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DivergenceBucket::Suppressed => "suppressed",
            DivergenceBucket::Rounding => "abs_diff_below_2",
            DivergenceBucket::SummaryHigher => "diff_at_least_2",
            DivergenceBucket::SummaryLower => "diff_at_most_minus_2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupDivergence {
    pub ncm: Ncm,
    /// Summed state-summary value, in cents.
    pub summary_value: u64,
    /// Summed microdata value, in cents.
    pub microdata_value: u64,
    /// `summary - microdata`, in cents.
    pub diff: i64,
    pub bucket: DivergenceBucket,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DivergenceReport {
    pub groups: Vec<GroupDivergence>,
}

impl DivergenceReport {
    pub fn count(&self, bucket: DivergenceBucket) -> usize {
        self.groups.iter().filter(|g| g.bucket == bucket).count()
    }

    /// Summary-side value of the groups in `bucket`, in cents.
    pub fn value(&self, bucket: DivergenceBucket) -> u64 {
        self.groups
            .iter()
            .filter(|g| g.bucket == bucket)
            .map(|g| g.summary_value)
            .sum()
    }

    pub fn total_value(&self) -> u64 {
        self.groups.iter().map(|g| g.summary_value).sum()
    }

    pub fn group(&self, ncm: &str) -> Option<&GroupDivergence> {
        self.groups.iter().find(|g| g.ncm.as_str() == ncm)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ncm", "summary_value", "microdata_value", "diff", "bucket"])?;
        for g in &self.groups {
            let cents = |c: u64| crate::quantity::Quantity::from_units(c).display(Scale::VALUE).to_string();
            let diff = format!(
                "{}{}",
                if g.diff < 0 { "-" } else { "" },
                cents(g.diff.unsigned_abs())
            );
            w.write_record([
                g.ncm.as_str(),
                &cents(g.summary_value),
                &cents(g.microdata_value),
                &diff,
                g.bucket.label(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compares, per NCM, the value published in the state summary against the
/// sum of the de-identified transactions.
pub fn audit_divergence(release: &SanitizedRelease) -> DivergenceReport {
    let mut sums: BTreeMap<&Ncm, (u64, Option<u64>)> = BTreeMap::new();
    for s in &release.by_state {
        sums.entry(&s.ncm).or_default().0 += s.value.units();
    }
    for t in &release.deidentified {
        let e = sums.entry(&t.ncm).or_default();
        *e.1.get_or_insert(0) += t.value.units();
    }
    let groups = sums
        .into_iter()
        .map(|(ncm, (summary, micro))| {
            let microdata_value = micro.unwrap_or(0);
            let diff = summary as i64 - microdata_value as i64;
            let bucket = match micro {
                None => DivergenceBucket::Suppressed,
                Some(_) if diff.abs() < ROUNDING_BAND_CENTS => DivergenceBucket::Rounding,
                Some(_) if diff > 0 => DivergenceBucket::SummaryHigher,
                Some(_) => DivergenceBucket::SummaryLower,
            };
            GroupDivergence {
                ncm: ncm.clone(),
                summary_value: summary,
                microdata_value,
                diff,
                bucket,
            }
        })
        .collect();
    DivergenceReport { groups }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::publish::tests::{hand_world, tx};
    use crate::datagen::{generate_world, publish, InclusionClass, WorldConfig};

    #[test]
    fn clean_release_is_rounding_only() {
        // At most three state rows per NCM, so rounding alone stays under 2 USD.
        let cfg = WorldConfig {
            states: 3,
            countries: 1,
            countries_per_importer: 1,
            transactions: 2_000,
            suppression_threshold: None,
            ..WorldConfig::default()
        };
        let report = audit_divergence(&publish(&generate_world(&cfg, 4).unwrap()));
        assert!(!report.groups.is_empty());
        assert_eq!(report.count(DivergenceBucket::Rounding), report.groups.len());
    }

    #[test]
    fn suppressed_group_is_reported() {
        let world = hand_world(
            vec![
                tx("1", "52083900", 300, "I1"),
                tx("2", "52083900", 500, "I2"),
                tx("3", "52083900", 700, "I3"),
            ],
            Some(4),
        );
        let report = audit_divergence(&publish(&world));
        assert_eq!(report.group("52083900").unwrap().bucket, DivergenceBucket::Suppressed);
    }

    #[test]
    fn dropped_outlier_shows_on_summary_side() {
        // Five transactions, whole dollars, one 100 USD outlier.
        let mut rows = vec![
            tx("1", "52083900", 12_000, "I1"),
            tx("2", "52083900", 3_000, "I2"),
            tx("3", "52083900", 10_000, "I3"),
            tx("4", "52083900", 45_000, "I4"),
            tx("5", "52083900", 7_700, "I5"),
        ];
        rows[2].class = InclusionClass::Outlier;
        let report = audit_divergence(&publish(&hand_world(rows, Some(4))));
        let g = report.group("52083900").unwrap();
        assert_eq!(g.summary_value, 67_700);
        assert_eq!(g.microdata_value, 77_700);
        assert_eq!(g.diff, -10_000);
        assert_eq!(g.bucket, DivergenceBucket::SummaryLower);
    }
}
