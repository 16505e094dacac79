//! Bayes vulnerability and multiplicative leakage.
//!
//! Secrets are importers. The attack only ever narrows a uniform prior to a
//! smaller candidate set, so the report helpers work from candidate counts;
//! the general prior/channel functions are exact over rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QifError {
    #[error("a distribution needs at least one secret")]
    Empty,
    #[error("probabilities must be non-negative and sum to 1")]
    NotDistribution,
    #[error("channel row {0} is not a probability distribution")]
    RowNotStochastic(usize),
    #[error("channel row {row} names observation {output}, but there are only {outputs}")]
    OutputOutOfRange { row: usize, output: usize, outputs: usize },
    #[error("prior has {prior} secrets, channel has {channel} rows")]
    Dimension { prior: usize, channel: usize },
    #[error("candidate counts must be positive and non-increasing")]
    Candidates,
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A distribution over secrets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prior {
    probs: Vec<BigRational>,
}

impl Prior {
    pub fn new(probs: Vec<BigRational>) -> Result<Prior, QifError> {
        if probs.is_empty() {
            return Err(QifError::Empty);
        }
        let total: BigRational = probs.iter().sum();
        if probs.iter().any(|p| p.is_negative()) || !total.is_one() {
            return Err(QifError::NotDistribution);
        }
        Ok(Prior { probs })
    }

    pub fn uniform(n: usize) -> Result<Prior, QifError> {
        if n == 0 {
            return Err(QifError::Empty);
        }
        Ok(Prior {
            probs: vec![ratio(1, n as u64); n],
        })
    }

    pub fn point(n: usize, secret: usize) -> Result<Prior, QifError> {
        if secret >= n {
            return Err(QifError::Empty);
        }
        let mut probs = vec![BigRational::zero(); n];
        probs[secret] = BigRational::one();
        Ok(Prior { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }
}

/// A row-stochastic matrix from secrets to observations, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    rows: Vec<Vec<(usize, BigRational)>>,
    outputs: usize,
}

impl Channel {
    pub fn new(rows: Vec<Vec<(usize, BigRational)>>, outputs: usize) -> Result<Channel, QifError> {
        if rows.is_empty() {
            return Err(QifError::Empty);
        }
        for (r, row) in rows.iter().enumerate() {
            let mut total = BigRational::zero();
            for (y, p) in row {
                if *y >= outputs {
                    return Err(QifError::OutputOutOfRange {
                        row: r,
                        output: *y,
                        outputs,
                    });
                }
                if p.is_negative() {
                    return Err(QifError::RowNotStochastic(r));
                }
                total += p;
            }
            if !total.is_one() {
                return Err(QifError::RowNotStochastic(r));
            }
        }
        Ok(Channel { rows, outputs })
    }

    /// Secret `x` always produces observation `observations[x]`.
    pub fn deterministic(observations: &[usize], outputs: usize) -> Result<Channel, QifError> {
        Channel::new(
            observations
                .iter()
                .map(|&y| vec![(y, BigRational::one())])
                .collect(),
            outputs,
        )
    }

    pub fn identity(n: usize) -> Result<Channel, QifError> {
        Channel::deterministic(&(0..n).collect::<Vec<_>>(), n)
    }

    /// Every secret produces the same observation.
    pub fn constant(n: usize) -> Result<Channel, QifError> {
        Channel::deterministic(&vec![0; n], 1)
    }

    pub fn from_dense(matrix: Vec<Vec<BigRational>>) -> Result<Channel, QifError> {
        let outputs = matrix.first().map_or(0, Vec::len);
        let rows = matrix
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .collect()
            })
            .collect();
        Channel::new(rows, outputs)
    }

    pub fn secrets(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }
}

/// `max_x pi(x)`
pub fn prior_vulnerability(prior: &Prior) -> BigRational {
    prior.probs.iter().max().cloned().expect("priors are non-empty")
}

/// `sum_y max_x pi(x) C[x][y]`
pub fn posterior_vulnerability(prior: &Prior, channel: &Channel) -> Result<BigRational, QifError> {
    if prior.len() != channel.secrets() {
        return Err(QifError::Dimension {
            prior: prior.len(),
            channel: channel.secrets(),
        });
    }
    let mut best: Vec<BigRational> = vec![BigRational::zero(); channel.outputs];
    for (pi, row) in prior.probs.iter().zip(&channel.rows) {
        for (y, c) in row {
            let joint = pi * c;
            if joint > best[*y] {
                best[*y] = joint;
            }
        }
    }
    Ok(best.into_iter().sum())
}

/// Posterior over prior Bayes vulnerability.
pub fn multiplicative_leakage(prior: &Prior, channel: &Channel) -> Result<BigRational, QifError> {
    Ok(posterior_vulnerability(prior, channel)? / prior_vulnerability(prior))
}

/// One step of a candidate-set refinement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageRow {
    pub label: String,
    pub candidates: u64,
    /// `1 / candidates`
    pub vulnerability: BigRational,
    /// Vulnerability over the previous row's.
    pub step_leakage: BigRational,
    /// Vulnerability over the first row's.
    pub cumulative_leakage: BigRational,
}

/// Leakage of a uniform prior narrowed step by step. The first entry is the
/// prior; every later count must be positive and no larger than the one
/// before it.
pub fn leakage_from_counts(steps: &[(String, u64)]) -> Result<Vec<LeakageRow>, QifError> {
    let Some((_, first)) = steps.first() else {
        return Err(QifError::Empty);
    };
    let mut prev = *first;
    let mut out = Vec::with_capacity(steps.len());
    for (label, c) in steps {
        if *c == 0 || *c > prev {
            return Err(QifError::Candidates);
        }
        out.push(LeakageRow {
            label: label.clone(),
            candidates: *c,
            vulnerability: ratio(1, *c),
            step_leakage: ratio(prev, *c),
            cumulative_leakage: ratio(*first, *c),
        });
        prev = *c;
    }
    Ok(out)
}

pub fn write_leakage_csv<W: std::io::Write>(rows: &[LeakageRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phase", "candidates", "vulnerability", "step_leakage", "cumulative_leakage"])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.candidates.to_string(),
            format_probability(&r.vulnerability),
            format_ratio(&r.step_leakage),
            format_ratio(&r.cumulative_leakage),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn significant(x: f64, digits: i32) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (digits - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// A probability as a percentage: exact when whole, otherwise one
/// significant figure (`0.005%`, `0.3%`, `100%`).
pub fn format_probability(p: &BigRational) -> String {
    let pct = p * BigRational::from_integer(100.into());
    if pct.is_integer() {
        return format!("{}%", pct.to_integer());
    }
    format!("{}%", significant(pct.to_f64().unwrap_or(f64::NAN), 1))
}

/// A leakage factor: exact when whole, otherwise two significant figures.
pub fn format_ratio(r: &BigRational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    significant(r.to_f64().unwrap_or(f64::NAN), 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prior_examples() {
        assert_eq!(prior_vulnerability(&Prior::uniform(18_430).unwrap()), ratio(1, 18_430));
        assert_eq!(prior_vulnerability(&Prior::point(3, 1).unwrap()), ratio(1, 1));
        let p = Prior::new(vec![ratio(1, 2), ratio(3, 10), ratio(1, 5)]).unwrap();
        assert_eq!(prior_vulnerability(&p), ratio(1, 2));
        assert_eq!(Prior::new(vec![ratio(1, 2)]), Err(QifError::NotDistribution));
        assert_eq!(Prior::uniform(0), Err(QifError::Empty));
    }

    #[test]
    fn posterior_examples() {
        let u = Prior::uniform(4_923).unwrap();
        let c = Channel::constant(4_923).unwrap();
        assert_eq!(posterior_vulnerability(&u, &c).unwrap(), ratio(1, 4_923));
        assert_eq!(multiplicative_leakage(&u, &c).unwrap(), ratio(1, 1));

        let u = Prior::uniform(5).unwrap();
        assert_eq!(posterior_vulnerability(&u, &Channel::identity(5).unwrap()).unwrap(), ratio(1, 1));

        let skew = Prior::new(vec![ratio(1, 2), ratio(3, 10), ratio(1, 5)]).unwrap();
        let c = Channel::constant(3).unwrap();
        assert_eq!(posterior_vulnerability(&skew, &c).unwrap(), ratio(1, 2));
        assert!(matches!(
            posterior_vulnerability(&u, &c),
            Err(QifError::Dimension { prior: 5, channel: 3 })
        ));
    }

    #[test]
    fn channel_validation() {
        let half = ratio(1, 2);
        assert!(Channel::new(vec![vec![(0, half.clone())]], 1).is_err());
        assert!(Channel::new(vec![vec![(2, ratio(1, 1))]], 2).is_err());
        let c = Channel::from_dense(vec![
            vec![half.clone(), half.clone()],
            vec![BigRational::zero(), ratio(1, 1)],
        ])
        .unwrap();
        let p = Prior::uniform(2).unwrap();
        // max(1/4, 0) + max(1/4, 1/2)
        assert_eq!(posterior_vulnerability(&p, &c).unwrap(), ratio(3, 4));
    }

    #[test]
    fn walkthrough_table() {
        let steps: Vec<(String, u64)> = [("prior", 18_430), ("1", 4_923), ("2", 326), ("3", 1)]
            .iter()
            .map(|(l, c)| (l.to_string(), *c))
            .collect();
        let rows = leakage_from_counts(&steps).unwrap();
        let v: Vec<String> = rows.iter().map(|r| format_probability(&r.vulnerability)).collect();
        assert_eq!(v, ["0.005%", "0.02%", "0.3%", "100%"]);
        let s: Vec<String> = rows.iter().map(|r| format_ratio(&r.step_leakage)).collect();
        assert_eq!(s, ["1", "3.7", "15", "326"]);
        assert_eq!(format_ratio(&rows[3].cumulative_leakage), "18430");
        let product: BigRational = rows.iter().map(|r| r.step_leakage.clone()).product();
        assert_eq!(product, rows[3].cumulative_leakage);
    }

    #[test]
    fn ambiguous_tail() {
        let rows = leakage_from_counts(&[("prior".into(), 500), ("2".into(), 50)]).unwrap();
        assert_eq!(rows[1].vulnerability, ratio(1, 50));
        assert_eq!(leakage_from_counts(&[("a".into(), 5), ("b".into(), 6)]), Err(QifError::Candidates));
    }

    fn prior_and_channel() -> impl Strategy<Value = (Prior, Channel)> {
        (1usize..6, 1usize..5).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(1u64..10, n),
                proptest::collection::vec(proptest::collection::vec(0u64..5, m), n),
            )
                .prop_map(move |(pw, cw)| {
                    let total: u64 = pw.iter().sum();
                    let prior = Prior::new(pw.iter().map(|&w| ratio(w, total)).collect()).unwrap();
                    let rows = cw
                        .iter()
                        .map(|row| {
                            let mut row = row.clone();
                            row[0] += 1;
                            let t: u64 = row.iter().sum();
                            row.iter()
                                .enumerate()
                                .filter(|(_, &w)| w > 0)
                                .map(|(y, &w)| (y, ratio(w, t)))
                                .collect()
                        })
                        .collect();
                    (prior, Channel::new(rows, m).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn leakage_bounds((prior, channel) in prior_and_channel()) {
            let v0 = prior_vulnerability(&prior);
            let v1 = posterior_vulnerability(&prior, &channel).unwrap();
            prop_assert!(v1 >= v0);
            prop_assert!(v1 <= BigRational::one());
            prop_assert!(multiplicative_leakage(&prior, &channel).unwrap() >= BigRational::one());
        }

        #[test]
        fn uniform_partition_counts_blocks(blocks in proptest::collection::vec(0usize..6, 1..40)) {
            let used: std::collections::BTreeSet<usize> = blocks.iter().copied().collect();
            let prior = Prior::uniform(blocks.len()).unwrap();
            let channel = Channel::deterministic(&blocks, 6).unwrap();
            prop_assert_eq!(
                posterior_vulnerability(&prior, &channel).unwrap(),
                ratio(used.len() as u64, blocks.len() as u64)
            );
        }

        #[test]
        fn refinement_composes(mut counts in proptest::collection::vec(1u64..100_000, 1..6)) {
            counts.sort_unstable_by(|a, b| b.cmp(a));
            let steps: Vec<(String, u64)> = counts.iter().map(|c| (String::new(), *c)).collect();
            let rows = leakage_from_counts(&steps).unwrap();
            let product: BigRational = rows.iter().map(|r| r.step_leakage.clone()).product();
            prop_assert_eq!(&product, &rows.last().unwrap().cumulative_leakage);
        }
    }
}
