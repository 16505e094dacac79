use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use super::classifier::{clt_tolerance, divergence_classifier, Divergence, clt_threshold};
use super::enumerate::PackageBins;
use super::{AttackConfig, Attribute, ToleranceRule};
use crate::allocation::{AllocationInstance, Bin, Package};
use crate::datagen::{DeidentifiedTransaction, SanitizedRelease};
use crate::quantity::Quantity;

/// `(state, city)`
pub(crate) type CityKey<'a> = (&'a str, &'a str);
/// Owned `(state, city)`.
pub(crate) type City = (String, String);
/// `(year-month, code, origin)`
pub(crate) type GroupKey<'a> = (&'a str, &'a str, &'a str);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PhaseLevel {
    /// Transactions of the target's SH4 and origin against city totals.
    CityDirect,
    /// Transactions of the target's NCM and origin against state totals.
    State,
    /// City totals of one state, with everything outside it pooled per NCM.
    CityWithinState(String),
}

impl PhaseLevel {
    pub(crate) fn index(&self) -> usize {
        match self {
            PhaseLevel::CityDirect => 0,
            PhaseLevel::State => 1,
            PhaseLevel::CityWithinState(_) => 2,
        }
    }
}

/// Why a phase was not solved.
#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    /// No published total matches the target's group.
    NoSummary,
    /// An NCM with published totals is missing from the microdata.
    Suppressed { ncm: String },
    /// The published and microdata totals differ by more than rounding explains.
    Divergent {
        attribute: &'static str,
        /// In attribute units.
        diff: f64,
        threshold: f64,
    },
    /// No allocation fits the published totals.
    Inconsistent,
    /// The totals also fit with the target left out.
    Dispensable,
    Complexity { complexity: f64, cap: f64 },
}

impl SkipReason {
    pub fn label(&self) -> &'static str {
        match self {
            SkipReason::NoSummary => "no_summary",
            SkipReason::Suppressed { .. } => "suppressed",
            SkipReason::Divergent { .. } => "divergent",
            SkipReason::Inconsistent => "inconsistent",
            SkipReason::Dispensable => "dispensable",
            SkipReason::Complexity { .. } => "complexity",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::NoSummary => write!(f, "no matching summary rows"),
            SkipReason::Suppressed { ncm } => write!(f, "NCM {ncm} is suppressed"),
            SkipReason::Divergent {
                attribute,
                diff,
                threshold,
            } => write!(f, "{attribute} differs by {diff:.2}, above {threshold:.3}"),
            SkipReason::Inconsistent => write!(f, "no allocation fits the totals"),
            SkipReason::Dispensable => write!(f, "the totals also fit without the target"),
            SkipReason::Complexity { complexity, cap } => {
                write!(f, "complexity {complexity:.2} above cap {cap:.2}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinKind {
    City { state: String, city: String },
    State(String),
    /// Everything of one NCM outside the phase-3 state.
    Outside(String),
}

/// An allocation instance for one phase, with the meaning of each bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInstance {
    pub level: PhaseLevel,
    pub instance: AllocationInstance,
    pub bins: Vec<BinKind>,
}

/// Result of analysing every package of one NCM/origin group against the
/// state totals.
#[derive(Debug, Clone)]
pub(crate) enum GroupAnalysis {
    Skipped(SkipReason),
    Done {
        /// State of each bin.
        states: Vec<String>,
        /// Per package, in microdata order of the group.
        packages: Vec<PackageBins>,
        /// Per package, whether the totals fit without it.
        dispensable: Vec<bool>,
        complexity: f64,
        n: usize,
        m: usize,
        solves: usize,
        elapsed: Duration,
    },
}

pub(crate) struct ReleaseIndex<'a> {
    pub release: &'a SanitizedRelease,
    by_ncm: HashMap<GroupKey<'a>, Vec<usize>>,
    by_sh4: HashMap<GroupKey<'a>, Vec<usize>>,
    state_rows: HashMap<GroupKey<'a>, Vec<usize>>,
    sh4_ncms: HashMap<GroupKey<'a>, BTreeSet<&'a str>>,
    city_rows: HashMap<GroupKey<'a>, Vec<usize>>,
    pub importers: BTreeMap<CityKey<'a>, Vec<usize>>,
}

struct Draft<'a> {
    packages: Vec<usize>,
    allowed: Vec<Vec<usize>>,
    bins: Vec<(BinKind, Vec<Quantity>)>,
    target: Option<usize>,
    txs: &'a [DeidentifiedTransaction],
}

impl<'a> ReleaseIndex<'a> {
    pub fn new(release: &'a SanitizedRelease) -> Self {
        let mut idx = ReleaseIndex {
            release,
            by_ncm: HashMap::new(),
            by_sh4: HashMap::new(),
            state_rows: HashMap::new(),
            sh4_ncms: HashMap::new(),
            city_rows: HashMap::new(),
            importers: BTreeMap::new(),
        };
        for (i, t) in release.deidentified.iter().enumerate() {
            let (ym, c) = (t.year_month.as_str(), t.country.as_str());
            idx.by_ncm.entry((ym, t.ncm.as_str(), c)).or_default().push(i);
            idx.by_sh4.entry((ym, t.ncm.sh4(), c)).or_default().push(i);
        }
        for (i, s) in release.by_state.iter().enumerate() {
            let (ym, c) = (s.year_month.as_str(), s.country.as_str());
            idx.state_rows.entry((ym, s.ncm.as_str(), c)).or_default().push(i);
            idx.sh4_ncms
                .entry((ym, s.ncm.sh4(), c))
                .or_default()
                .insert(s.ncm.as_str());
        }
        for (i, c) in release.by_city.iter().enumerate() {
            idx.city_rows
                .entry((c.year_month.as_str(), c.sh4.as_str(), c.country.as_str()))
                .or_default()
                .push(i);
        }
        for (i, imp) in release.importers.iter().enumerate() {
            idx.importers
                .entry((imp.state.as_str(), imp.city.as_str()))
                .or_default()
                .push(i);
        }
        idx
    }

    pub fn importers_in<'s>(&'s self, city: &'s City) -> &'s [usize] {
        self.importers
            .get(&(city.0.as_str(), city.1.as_str()))
            .map_or(&[], Vec::as_slice)
    }

    pub fn importer_count<'c>(&self, cities: impl IntoIterator<Item = &'c City>) -> usize {
        cities.into_iter().map(|c| self.importers_in(c).len()).sum()
    }

    /// Microdata rows of an NCM/origin group.
    pub fn ncm_group(&self, t: &'a DeidentifiedTransaction) -> GroupKey<'a> {
        (t.year_month.as_str(), t.ncm.as_str(), t.country.as_str())
    }

    pub fn ncm_rows(&self, key: GroupKey<'a>) -> &[usize] {
        self.by_ncm.get(&key).map_or(&[], Vec::as_slice)
    }

    fn states_with_row(&self, key: GroupKey<'a>) -> BTreeSet<&'a str> {
        self.state_rows
            .get(&key)
            .into_iter()
            .flatten()
            .map(|&i| self.release.by_state[i].state.as_str())
            .collect()
    }

    fn check(
        &self,
        attrs: &[Attribute],
        published: &[Quantity],
        micro: &[usize],
        rows: usize,
    ) -> Result<(), SkipReason> {
        for (i, &a) in attrs.iter().enumerate() {
            let sum: Quantity = micro
                .iter()
                .map(|&p| a.of_transaction(&self.release.deidentified[p]))
                .sum();
            let diff = sum.abs_diff(published[i]);
            if divergence_classifier(rows, diff, a.scale()) == Divergence::Excluded {
                return Err(SkipReason::Divergent {
                    attribute: a.name(),
                    diff: diff.to_f64(a.scale()),
                    threshold: clt_threshold(rows),
                });
            }
        }
        Ok(())
    }

    /// Phase 1: every SH4/origin transaction against the SH4/origin city
    /// totals. A package may only go to cities whose state published a
    /// total for its NCM.
    pub fn city_direct(
        &self,
        cfg: &AttackConfig,
        target: usize,
    ) -> Result<PhaseInstance, SkipReason> {
        let t = &self.release.deidentified[target];
        let key = (t.year_month.as_str(), t.ncm.sh4(), t.country.as_str());
        let rows = self.city_rows.get(&key).ok_or(SkipReason::NoSummary)?;
        for ncm in self.sh4_ncms.get(&key).into_iter().flatten() {
            if !self.by_ncm.contains_key(&(key.0, *ncm, key.2)) {
                return Err(SkipReason::Suppressed {
                    ncm: ncm.to_string(),
                });
            }
        }
        let attrs = cfg.attributes();
        let packages = self.by_sh4.get(&key).cloned().unwrap_or_default();
        let published: Vec<Quantity> = attrs
            .iter()
            .map(|a| rows.iter().map(|&r| a.of_city(&self.release.by_city[r])).sum())
            .collect();
        self.check(attrs, &published, &packages, rows.len())?;

        let bins: Vec<(BinKind, Vec<Quantity>)> = rows
            .iter()
            .map(|&r| {
                let c = &self.release.by_city[r];
                (
                    BinKind::City {
                        state: c.state.clone(),
                        city: c.city.clone(),
                    },
                    attrs.iter().map(|a| a.of_city(c)).collect(),
                )
            })
            .collect();
        let mut states_by_ncm: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        let allowed = packages
            .iter()
            .map(|&p| {
                let ncm = self.release.deidentified[p].ncm.as_str();
                let states = states_by_ncm
                    .entry(ncm)
                    .or_insert_with(|| self.states_with_row((key.0, ncm, key.2)));
                rows.iter()
                    .enumerate()
                    .filter(|(_, &r)| states.contains(self.release.by_city[r].state.as_str()))
                    .map(|(b, _)| b)
                    .collect()
            })
            .collect();
        let target_pos = packages.iter().position(|&p| p == target);
        Draft {
            packages,
            allowed,
            bins,
            target: target_pos,
            txs: &self.release.deidentified,
        }
        .finish(PhaseLevel::CityDirect, cfg)
    }

    /// Phase 2: NCM/origin transactions against the state totals.
    pub fn state(&self, cfg: &AttackConfig, key: GroupKey<'a>) -> Result<PhaseInstance, SkipReason> {
        let rows = self.state_rows.get(&key).ok_or(SkipReason::NoSummary)?;
        let packages = self.by_ncm.get(&key).cloned().ok_or_else(|| SkipReason::Suppressed {
            ncm: key.1.to_string(),
        })?;
        let attrs = cfg.attributes();
        let published: Vec<Quantity> = attrs
            .iter()
            .map(|a| rows.iter().map(|&r| a.of_state(&self.release.by_state[r])).sum())
            .collect();
        self.check(attrs, &published, &packages, rows.len())?;
        let bins: Vec<(BinKind, Vec<Quantity>)> = rows
            .iter()
            .map(|&r| {
                let s = &self.release.by_state[r];
                (
                    BinKind::State(s.state.clone()),
                    attrs.iter().map(|a| a.of_state(s)).collect(),
                )
            })
            .collect();
        let allowed = vec![(0..bins.len()).collect(); packages.len()];
        Draft {
            packages,
            allowed,
            bins,
            target: None,
            txs: &self.release.deidentified,
        }
        .finish(PhaseLevel::State, cfg)
    }

    /// Phase 3: the city totals of `state` for the target's SH4 and origin.
    ///
    /// Only NCMs with a total in `state` contribute packages, and of those
    /// only the packages whose feasible states include `state`. Packages
    /// that could also lie elsewhere may go to a per-NCM outside bin holding
    /// the rest of that NCM's mass. `analysis` supplies the feasible states.
    pub fn city_within_state(
        &self,
        cfg: &AttackConfig,
        target: usize,
        state: &str,
        target_cities: Option<&BTreeSet<City>>,
        analysis: &dyn Fn(GroupKey<'a>) -> Arc<GroupAnalysis>,
    ) -> Result<PhaseInstance, SkipReason> {
        let t = &self.release.deidentified[target];
        let key = (t.year_month.as_str(), t.ncm.sh4(), t.country.as_str());
        let attrs = cfg.attributes();
        let city_rows: Vec<usize> = self
            .city_rows
            .get(&key)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&r| self.release.by_city[r].state == state)
            .collect();
        if city_rows.is_empty() {
            return Err(SkipReason::NoSummary);
        }
        let mut bins: Vec<(BinKind, Vec<Quantity>)> = city_rows
            .iter()
            .map(|&r| {
                let c = &self.release.by_city[r];
                (
                    BinKind::City {
                        state: c.state.clone(),
                        city: c.city.clone(),
                    },
                    attrs.iter().map(|a| a.of_city(c)).collect(),
                )
            })
            .collect();
        let cities: Vec<usize> = (0..bins.len()).collect();
        let mut packages = Vec::new();
        let mut allowed = Vec::new();

        for &ncm in self.sh4_ncms.get(&key).into_iter().flatten() {
            let gkey = (key.0, ncm, key.2);
            let Some(row) = self.state_rows[&gkey]
                .iter()
                .map(|&r| &self.release.by_state[r])
                .find(|s| s.state == state)
            else {
                continue;
            };
            let members = self.by_ncm.get(&gkey).ok_or_else(|| SkipReason::Suppressed {
                ncm: ncm.to_string(),
            })?;
            let possible: Vec<BTreeSet<String>> = match &*analysis(gkey) {
                GroupAnalysis::Done {
                    states,
                    packages: per,
                    ..
                } => per
                    .iter()
                    .map(|pb| pb.possible().into_iter().map(|b| states[b].clone()).collect())
                    .collect(),
                GroupAnalysis::Skipped(SkipReason::Complexity { .. }) => {
                    let all: BTreeSet<String> =
                        self.states_with_row(gkey).into_iter().map(str::to_string).collect();
                    vec![all; members.len()]
                }
                GroupAnalysis::Skipped(other) => return Err(other.clone()),
            };

            let kept: Vec<usize> = (0..members.len())
                .filter(|&j| possible[j].contains(state))
                .collect();
            let half = |a: &Attribute| a.scale().unit() / 2;
            let mut outside = Vec::with_capacity(attrs.len());
            for a in attrs {
                let mass: Quantity = kept
                    .iter()
                    .map(|&j| a.of_transaction(&self.release.deidentified[members[j]]))
                    .sum();
                let published = a.of_state(row);
                if published > mass && published.abs_diff(mass).units() > half(a) {
                    return Err(SkipReason::Inconsistent);
                }
                outside.push(mass.saturating_sub(published));
            }
            let mixed: Vec<usize> = kept.iter().copied().filter(|&j| possible[j].len() > 1).collect();
            let outside_bin = if mixed.is_empty() {
                if outside.iter().zip(attrs).any(|(q, a)| q.units() > half(a)) {
                    return Err(SkipReason::Inconsistent);
                }
                None
            } else {
                bins.push((BinKind::Outside(ncm.to_string()), outside));
                Some(bins.len() - 1)
            };
            for &j in &kept {
                let mut ok = cities.clone();
                if possible[j].len() > 1 {
                    ok.extend(outside_bin);
                }
                packages.push(members[j]);
                allowed.push(ok);
            }
        }

        let target_pos = packages
            .iter()
            .position(|&p| p == target)
            .ok_or(SkipReason::Inconsistent)?;
        allowed[target_pos] = cities
            .iter()
            .copied()
            .filter(|&b| match (&bins[b].0, target_cities) {
                (BinKind::City { state, city }, Some(keep)) => {
                    keep.contains(&(state.clone(), city.clone()))
                }
                _ => true,
            })
            .collect();
        if allowed[target_pos].is_empty() {
            return Err(SkipReason::Inconsistent);
        }
        Draft {
            packages,
            allowed,
            bins,
            target: Some(target_pos),
            txs: &self.release.deidentified,
        }
        .finish(PhaseLevel::CityWithinState(state.to_string()), cfg)
    }
}

fn bin_id(kind: &BinKind, duplicate_city: bool) -> String {
    match kind {
        BinKind::City { state, city } if duplicate_city => format!("{city}/{state}"),
        BinKind::City { city, .. } => city.clone(),
        BinKind::State(s) => s.clone(),
        BinKind::Outside(ncm) => format!("outside:{ncm}"),
    }
}

impl Draft<'_> {
    fn finish(self, level: PhaseLevel, cfg: &AttackConfig) -> Result<PhaseInstance, SkipReason> {
        if self.packages.is_empty() {
            return Err(SkipReason::NoSummary);
        }
        if let Some(t) = self.target {
            if self.allowed[t].is_empty() {
                return Err(SkipReason::Inconsistent);
            }
        }
        let attrs = cfg.attributes();
        let k = attrs.len();
        let pkg_attrs: Vec<Vec<Quantity>> = self
            .packages
            .iter()
            .map(|&p| attrs.iter().map(|a| a.of_transaction(&self.txs[p])).collect())
            .collect();

        let tolerance: Vec<Vec<Quantity>> = match &cfg.tolerance {
            ToleranceRule::Fixed(t) => vec![t[..k].to_vec(); self.bins.len()],
            ToleranceRule::Clt => (0..self.bins.len())
                .map(|b| {
                    let cap = &self.bins[b].1;
                    let fits = (0..self.packages.len())
                        .filter(|&p| self.allowed[p].contains(&b))
                        .filter(|&p| {
                            attrs.iter().enumerate().all(|(i, a)| {
                                pkg_attrs[p][i].units() <= cap[i].units() + a.scale().unit() / 2
                            })
                        })
                        .count();
                    attrs.iter().map(|a| clt_tolerance(fits, a.scale())).collect()
                })
                .collect(),
        };

        let mut names = BTreeSet::new();
        let duplicate_city = !self.bins.iter().all(|(kind, _)| match kind {
            BinKind::City { city, .. } => names.insert(city.as_str()),
            _ => true,
        });
        let bins = self
            .bins
            .iter()
            .zip(tolerance)
            .map(|((kind, cap), tol)| Bin::new(bin_id(kind, duplicate_city), cap.clone(), tol))
            .collect();
        let packages = self
            .packages
            .iter()
            .zip(pkg_attrs)
            .map(|(&p, a)| Package::new(self.txs[p].order.clone(), a))
            .collect();
        let mut instance =
            AllocationInstance::new(k, packages, bins).map_err(|_| SkipReason::Inconsistent)?;
        for (p, ok) in self.allowed.iter().enumerate() {
            if ok.len() < instance.m() {
                instance.restrict(p, ok);
            }
        }
        if let Some(t) = self.target {
            instance.set_target(t);
        }
        Ok(PhaseInstance {
            level,
            instance,
            bins: self.bins.into_iter().map(|(kind, _)| kind).collect(),
        })
    }
}
