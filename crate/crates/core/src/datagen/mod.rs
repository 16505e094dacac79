//! Synthetic trade microdata and the sanitized releases derived from it.
//!
//! A [`TradeWorld`] is the ground truth: importers with a city and state, and
//! the transactions they filed. [`publish`] turns it into the four public
//! datasets: de-identified transactions, the importer list, totals by
//! SH4/country/state/city and totals by NCM/country/state.

mod audit;
mod io;
pub(crate) mod publish;

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::quantity::Quantity;

pub use audit::{audit_divergence, DivergenceBucket, DivergenceReport, GroupDivergence};
pub use io::{
    read_ground_truth, read_release, write_ground_truth, write_release, ReleaseIoError, CITY_FILE,
    DEIDENTIFIED_FILE, GROUND_TRUTH_FILE, IMPORTERS_FILE, STATE_FILE,
};
pub use publish::{
    publish, CitySummary, DeidentifiedTransaction, ImporterRecord, SanitizedRelease, StateSummary,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatagenError {
    #[error("invalid world configuration: {0}")]
    Config(String),
}

/// An eight-digit product code; its first four digits are the SH4 heading.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ncm(String);

impl Ncm {
    pub fn new(code: impl Into<String>) -> Option<Ncm> {
        let code = code.into();
        (code.len() == 8 && code.bytes().all(|b| b.is_ascii_digit())).then_some(Ncm(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn sh4(&self) -> &str {
        &self.0[..4]
    }
}

impl fmt::Display for Ncm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// How the statistics office treats a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InclusionClass {
    /// Published everywhere.
    Effective,
    /// Counted in the summaries but absent from the de-identified microdata.
    Administrative,
    /// Present in the microdata but discarded from the summaries.
    Outlier,
}

impl InclusionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            InclusionClass::Effective => "EFFECTIVE",
            InclusionClass::Administrative => "ADMINISTRATIVE",
            InclusionClass::Outlier => "OUTLIER",
        }
    }

    pub fn parse(s: &str) -> Option<InclusionClass> {
        match s {
            "EFFECTIVE" => Some(InclusionClass::Effective),
            "ADMINISTRATIVE" => Some(InclusionClass::Administrative),
            "OUTLIER" => Some(InclusionClass::Outlier),
            _ => None,
        }
    }

    pub fn in_summaries(self) -> bool {
        self != InclusionClass::Outlier
    }

    pub fn in_microdata(self) -> bool {
        self != InclusionClass::Administrative
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroTransaction {
    pub order: String,
    /// `YYYYMM`
    pub year_month: String,
    pub ncm: Ncm,
    pub country: String,
    pub value: Quantity,
    pub weight: Quantity,
    pub importer: String,
    pub class: InclusionClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Importer {
    pub id: String,
    pub name: String,
    pub city: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub importers: usize,
    pub cities: usize,
    pub states: usize,
    pub transactions: usize,
    pub sh4_codes: usize,
    pub ncms_per_sh4: usize,
    pub countries: usize,
    /// Share of cities hosting exactly one importer.
    pub single_importer_city_fraction: f64,
    /// Zipf exponent for importer counts across the remaining cities.
    pub city_skew: f64,
    /// Zipf exponent for how many transactions each importer files.
    pub importer_activity_skew: f64,
    /// Distinct NCMs each importer trades in.
    pub ncms_per_importer: usize,
    /// Distinct origin countries each importer buys from.
    pub countries_per_importer: usize,
    /// Log-uniform transaction values, in cents.
    pub value_range_cents: (u64, u64),
    /// Log-uniform unit prices, in USD per kg.
    pub price_per_kg_range: (f64, f64),
    pub outlier_rate: f64,
    pub administrative_rate: f64,
    /// NCMs with fewer distinct importers are withheld from the microdata.
    pub suppression_threshold: Option<usize>,
    pub year_month: String,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            importers: 500,
            cities: 120,
            states: 12,
            transactions: 10_000,
            sh4_codes: 300,
            ncms_per_sh4: 3,
            countries: 12,
            single_importer_city_fraction: 0.3,
            city_skew: 1.0,
            importer_activity_skew: 0.6,
            ncms_per_importer: 8,
            countries_per_importer: 3,
            value_range_cents: (10, 10_000_000),
            price_per_kg_range: (0.5, 200.0),
            outlier_rate: 0.0,
            administrative_rate: 0.0,
            suppression_threshold: Some(4),
            year_month: "202101".to_string(),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let err = |m: &str| Err(DatagenError::Config(m.to_string()));
        if self.importers == 0
            || self.cities == 0
            || self.states == 0
            || self.transactions == 0
            || self.sh4_codes == 0
            || self.ncms_per_sh4 == 0
            || self.countries == 0
            || self.ncms_per_importer == 0
            || self.countries_per_importer == 0
        {
            return err("all counts must be at least 1");
        }
        if self.states > self.cities {
            return err("every state needs at least one city");
        }
        if self.sh4_codes > 9000 || self.ncms_per_sh4 > 9999 {
            return err("code space exhausted");
        }
        if !(0.0..=1.0).contains(&self.single_importer_city_fraction) {
            return err("single-importer city fraction must lie in [0, 1]");
        }
        let (lo, hi) = self.value_range_cents;
        if lo == 0 || lo > hi {
            return err("value range must be positive and ordered");
        }
        let (plo, phi) = self.price_per_kg_range;
        if !(plo > 0.0 && plo <= phi) {
            return err("price range must be positive and ordered");
        }
        for rate in [self.outlier_rate, self.administrative_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return err("exclusion rates must lie in [0, 1]");
            }
        }
        if self.outlier_rate + self.administrative_rate > 1.0 {
            return err("exclusion rates sum above 1");
        }
        let (single, multi) = self.city_split();
        let rest = self.importers.checked_sub(single);
        match rest {
            None => return err("more single-importer cities than importers"),
            Some(rest) if multi == 0 && rest > 0 => {
                return err("importers left over with no multi-importer city to hold them")
            }
            Some(rest) if rest < 2 * multi => {
                return err("too few importers for the multi-importer cities")
            }
            _ => {}
        }
        if self.year_month.len() != 6 || !self.year_month.bytes().all(|b| b.is_ascii_digit()) {
            return err("year_month must be YYYYMM");
        }
        Ok(())
    }

    fn city_split(&self) -> (usize, usize) {
        let single = (self.single_importer_city_fraction * self.cities as f64).round() as usize;
        let single = single.min(self.cities);
        (single, self.cities - single)
    }
}

/// Ground-truth microdata. Reproducible from `seed` and `config`.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeWorld {
    pub config: WorldConfig,
    pub seed: u64,
    pub importers: Vec<Importer>,
    pub transactions: Vec<MicroTransaction>,
}

impl TradeWorld {
    pub fn importer(&self, id: &str) -> Option<&Importer> {
        self.importers
            .binary_search_by(|i| i.id.as_str().cmp(id))
            .ok()
            .map(|ix| &self.importers[ix])
    }
}

pub fn state_name(i: usize) -> String {
    format!("STATE {:02}", i + 1)
}

pub fn city_name(i: usize) -> String {
    format!("CITY {:04}", i + 1)
}

pub fn country_name(i: usize) -> String {
    format!("COUNTRY {:02}", i + 1)
}

fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    (0..n).map(|j| 1.0 / ((j + 1) as f64).powf(exponent)).collect()
}

fn pick_weighted(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("non-empty weights");
    let x = rng.gen::<f64>() * total;
    cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<TradeWorld, DatagenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Geography: every state gets one city first, the rest are spread at random.
    let mut city_state: Vec<usize> = (0..config.cities)
        .map(|c| {
            if c < config.states {
                c
            } else {
                rng.gen_range(0..config.states)
            }
        })
        .collect();
    city_state.shuffle(&mut rng);

    // Importer counts per city.
    let (single, multi) = config.city_split();
    let mut city_order: Vec<usize> = (0..config.cities).collect();
    city_order.shuffle(&mut rng);
    let (single_cities, multi_cities) = city_order.split_at(single);
    let mut per_city = vec![0usize; config.cities];
    for &c in single_cities {
        per_city[c] = 1;
    }
    if multi > 0 {
        for &c in multi_cities {
            per_city[c] = 2;
        }
        let extra = config.importers - single - 2 * multi;
        let cum = cumulative(&zipf_weights(multi, config.city_skew));
        for _ in 0..extra {
            per_city[multi_cities[pick_weighted(&mut rng, &cum)]] += 1;
        }
    }

    let mut importers = Vec::with_capacity(config.importers);
    for (city, &count) in per_city.iter().enumerate() {
        for _ in 0..count {
            let ix = importers.len();
            importers.push(Importer {
                id: format!("{:08}0001{:02}", ix + 1, (ix * 7 + 3) % 97),
                name: format!("EMPRESA {:05}", ix + 1),
                city: city_name(city),
                state: state_name(city_state[city]),
            });
        }
    }
    importers.sort_by(|a, b| a.id.cmp(&b.id));

    // Product codes: distinct SH4 headings, each with a few NCM subheadings.
    let sh4_pool: Vec<u32> = {
        let mut all: Vec<u32> = (1000..10000).collect();
        all.shuffle(&mut rng);
        let mut chosen = all[..config.sh4_codes].to_vec();
        chosen.sort_unstable();
        chosen
    };
    let mut ncms = Vec::with_capacity(config.sh4_codes * config.ncms_per_sh4);
    for &sh4 in &sh4_pool {
        let mut subs = BTreeSet::new();
        while subs.len() < config.ncms_per_sh4 {
            subs.insert(rng.gen_range(0..10000u32));
        }
        for sub in subs {
            ncms.push(Ncm(format!("{sh4:04}{sub:04}")));
        }
    }

    // Each importer trades a handful of NCMs from a handful of origins.
    let ncm_cum = cumulative(&zipf_weights(ncms.len(), 0.5));
    let mut ncm_rank: Vec<usize> = (0..ncms.len()).collect();
    ncm_rank.shuffle(&mut rng);
    let portfolios: Vec<(Vec<usize>, Vec<usize>)> = (0..importers.len())
        .map(|_| {
            let n_ncm = config.ncms_per_importer.min(ncms.len());
            let mut own = BTreeSet::new();
            while own.len() < n_ncm {
                own.insert(ncm_rank[pick_weighted(&mut rng, &ncm_cum)]);
            }
            let n_cty = config.countries_per_importer.min(config.countries);
            let mut origins = BTreeSet::new();
            while origins.len() < n_cty {
                origins.insert(rng.gen_range(0..config.countries));
            }
            (own.into_iter().collect(), origins.into_iter().collect())
        })
        .collect();

    let mut activity_rank: Vec<usize> = (0..importers.len()).collect();
    activity_rank.shuffle(&mut rng);
    let activity_cum = cumulative(&zipf_weights(importers.len(), config.importer_activity_skew));

    let (vlo, vhi) = config.value_range_cents;
    let (plo, phi) = config.price_per_kg_range;
    let mut transactions = Vec::with_capacity(config.transactions);
    for t in 0..config.transactions {
        let imp = activity_rank[pick_weighted(&mut rng, &activity_cum)];
        let (own, origins) = &portfolios[imp];
        let ncm = &ncms[*own.choose(&mut rng).expect("non-empty portfolio")];
        let country = *origins.choose(&mut rng).expect("non-empty origins");
        let cents = log_uniform(&mut rng, vlo as f64, vhi as f64).round().max(1.0) as u64;
        let price = log_uniform(&mut rng, plo, phi);
        let weight_units = ((cents as f64 / 100.0) / price * 1e5).round().max(1.0) as u64;
        let draw: f64 = rng.gen();
        let class = if draw < config.outlier_rate {
            InclusionClass::Outlier
        } else if draw < config.outlier_rate + config.administrative_rate {
            InclusionClass::Administrative
        } else {
            InclusionClass::Effective
        };
        transactions.push(MicroTransaction {
            order: format!("{:09}{:02}", 100_000 + t * 13, 1 + t % 97),
            year_month: config.year_month.clone(),
            ncm: ncm.clone(),
            country: country_name(country),
            value: Quantity::from_units(cents),
            weight: Quantity::from_units(weight_units),
            importer: importers[imp].id.clone(),
            class,
        });
    }
    transactions.sort_by(|a, b| a.order.cmp(&b.order));

    Ok(TradeWorld {
        config: config.clone(),
        seed,
        importers,
        transactions,
    })
}
