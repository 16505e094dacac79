use std::collections::{BTreeMap, BTreeSet};

use super::{Ncm, TradeWorld};
use crate::quantity::{Quantity, Scale};

/// A microdata row with the importer removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeidentifiedTransaction {
    pub order: String,
    pub year_month: String,
    pub ncm: Ncm,
    pub country: String,
    pub weight: Quantity,
    pub value: Quantity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImporterRecord {
    pub id: String,
    pub name: String,
    pub city: String,
    pub state: String,
}

/// Totals by SH4, origin, state and city, in whole units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitySummary {
    pub year_month: String,
    pub sh4: String,
    pub country: String,
    pub state: String,
    pub city: String,
    pub weight: Quantity,
    pub value: Quantity,
}

/// Totals by NCM, origin and state, in whole units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSummary {
    pub year_month: String,
    pub ncm: Ncm,
    pub country: String,
    pub state: String,
    pub weight: Quantity,
    pub value: Quantity,
}

/// The four public datasets. Rows are sorted by their natural keys.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SanitizedRelease {
    pub deidentified: Vec<DeidentifiedTransaction>,
    pub importers: Vec<ImporterRecord>,
    pub by_city: Vec<CitySummary>,
    pub by_state: Vec<StateSummary>,
}

impl SanitizedRelease {
    pub fn transaction(&self, order: &str) -> Option<&DeidentifiedTransaction> {
        self.deidentified
            .binary_search_by(|t| t.order.as_str().cmp(order))
            .ok()
            .map(|ix| &self.deidentified[ix])
    }

    pub(crate) fn sort(&mut self) {
        self.deidentified.sort_by(|a, b| a.order.cmp(&b.order));
        self.importers.sort_by(|a, b| a.id.cmp(&b.id));
        self.by_city.sort_by(|a, b| {
            (&a.year_month, &a.sh4, &a.country, &a.state, &a.city)
                .cmp(&(&b.year_month, &b.sh4, &b.country, &b.state, &b.city))
        });
        self.by_state.sort_by(|a, b| {
            (&a.year_month, &a.ncm, &a.country, &a.state)
                .cmp(&(&b.year_month, &b.ncm, &b.country, &b.state))
        });
    }
}

#[derive(Default, Clone, Copy)]
struct Totals {
    weight: Quantity,
    value: Quantity,
}

/// Derives the public release from a world.
///
/// Summaries aggregate the transactions whose class belongs in them and are
/// rounded half-to-even per row. The microdata drops administrative
/// transactions and every NCM traded by fewer importers than the
/// suppression threshold.
pub fn publish(world: &TradeWorld) -> SanitizedRelease {
    let mut by_city: BTreeMap<(String, String, String, String, String), Totals> = BTreeMap::new();
    let mut by_state: BTreeMap<(String, Ncm, String, String), Totals> = BTreeMap::new();
    let mut importers_per_ncm: BTreeMap<&Ncm, BTreeSet<&str>> = BTreeMap::new();

    for t in &world.transactions {
        importers_per_ncm.entry(&t.ncm).or_default().insert(&t.importer);
        if !t.class.in_summaries() {
            continue;
        }
        let imp = world
            .importer(&t.importer)
            .expect("transaction importer exists in world");
        let city = by_city
            .entry((
                t.year_month.clone(),
                t.ncm.sh4().to_string(),
                t.country.clone(),
                imp.state.clone(),
                imp.city.clone(),
            ))
            .or_default();
        city.weight += t.weight;
        city.value += t.value;
        let state = by_state
            .entry((t.year_month.clone(), t.ncm.clone(), t.country.clone(), imp.state.clone()))
            .or_default();
        state.weight += t.weight;
        state.value += t.value;
    }

    let suppressed: BTreeSet<&Ncm> = match world.config.suppression_threshold {
        Some(min) => importers_per_ncm
            .iter()
            .filter(|(_, imps)| imps.len() < min)
            .map(|(ncm, _)| *ncm)
            .collect(),
        None => BTreeSet::new(),
    };

    let mut release = SanitizedRelease {
        deidentified: world
            .transactions
            .iter()
            .filter(|t| t.class.in_microdata() && !suppressed.contains(&t.ncm))
            .map(|t| DeidentifiedTransaction {
                order: t.order.clone(),
                year_month: t.year_month.clone(),
                ncm: t.ncm.clone(),
                country: t.country.clone(),
                weight: t.weight,
                value: t.value,
            })
            .collect(),
        importers: world
            .importers
            .iter()
            .map(|i| ImporterRecord {
                id: i.id.clone(),
                name: i.name.clone(),
                city: i.city.clone(),
                state: i.state.clone(),
            })
            .collect(),
        by_city: by_city
            .into_iter()
            .map(|((year_month, sh4, country, state, city), tot)| CitySummary {
                year_month,
                sh4,
                country,
                state,
                city,
                weight: tot.weight.round_half_even(Scale::WEIGHT),
                value: tot.value.round_half_even(Scale::VALUE),
            })
            .collect(),
        by_state: by_state
            .into_iter()
            .map(|((year_month, ncm, country, state), tot)| StateSummary {
                year_month,
                ncm,
                country,
                state,
                weight: tot.weight.round_half_even(Scale::WEIGHT),
                value: tot.value.round_half_even(Scale::VALUE),
            })
            .collect(),
    };
    release.sort();
    release
}
