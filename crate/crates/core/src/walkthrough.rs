//! The cotton-cloth release used throughout the tests and the CLI demo.
//!
//! Fourteen transactions of NCM 52083900 from China and the five state
//! totals they were published under. [`walkthrough_world`] embeds them in a
//! larger synthetic world whose city layout makes the single-importer city
//! OURO BRANCO recoverable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{Importer, InclusionClass, MicroTransaction, Ncm, TradeWorld, WorldConfig};
use crate::quantity::{Quantity, Scale};

/// `(order number, value USD, weight kg)`; the first row is the target.
pub const COTTON_TRANSACTIONS: [(&str, &str, &str); 14] = [
    ("10653400001", "3388.41", "420.69"),
    ("08986300003", "111.91", "23.1"),
    ("02113100001", "1116.52", "242.86"),
    ("05566500003", "19856.21", "4055"),
    ("12343400002", "20216.8", "2091.3"),
    ("12319800004", "1346.64", "136"),
    ("12634700012", "7698.19", "918.25"),
    ("02898100002", "57194.45", "14986"),
    ("13460400002", "13434.69", "2420"),
    ("11554100002", "2400.31", "182"),
    ("11722800003", "9064.28", "1644"),
    ("11717600002", "22297.1", "1850"),
    ("11722600002", "7024.53", "1265"),
    ("10652800002", "3618.88", "425.34"),
];

/// `(state, value USD, weight kg)` as published.
pub const COTTON_STATES: [(&str, &str, &str); 5] = [
    ("CEARA", "19856", "4055"),
    ("ESPIRITO SANTO", "112762", "22483"),
    ("MINAS GERAIS", "27224", "2937"),
    ("SANTA CATARINA", "8815", "1161"),
    ("SAO PAULO", "112", "23"),
];

pub const TARGET_ORDER: &str = "10653400001";

/// Importers in the walkthrough world.
pub const POPULATION: usize = 18_430;
pub const TARGET_CITY: &str = "OURO BRANCO";
pub const TARGET_STATE: &str = "MINAS GERAIS";
pub const YEAR_MONTH: &str = "202101";
pub const ORIGIN: &str = "CHINA";

/// `(state, city, importers)`. The first nineteen cities hold every SH4 5208
/// import from China and 4,923 importers between them.
const CITIES: [(&str, &str, usize); 24] = [
    ("MINAS GERAIS", "BELO HORIZONTE", 276),
    ("MINAS GERAIS", "EXTREMA", 49),
    ("MINAS GERAIS", "OURO BRANCO", 1),
    ("SAO PAULO", "SAO PAULO", 2_900),
    ("SAO PAULO", "CAMPINAS", 400),
    ("SAO PAULO", "GUARULHOS", 300),
    ("SAO PAULO", "SOROCABA", 150),
    ("SAO PAULO", "JUNDIAI", 120),
    ("SANTA CATARINA", "BLUMENAU", 200),
    ("SANTA CATARINA", "JOINVILLE", 180),
    ("SANTA CATARINA", "ITAJAI", 90),
    ("SANTA CATARINA", "BRUSQUE", 60),
    ("ESPIRITO SANTO", "VITORIA", 70),
    ("ESPIRITO SANTO", "SERRA", 50),
    ("ESPIRITO SANTO", "VILA VELHA", 40),
    ("ESPIRITO SANTO", "CARIACICA", 20),
    ("CEARA", "FORTALEZA", 10),
    ("CEARA", "MARACANAU", 5),
    ("CEARA", "CAUCAIA", 2),
    ("RIO DE JANEIRO", "RIO DE JANEIRO", 6_000),
    ("RIO DE JANEIRO", "NITEROI", 1_500),
    ("PARANA", "CURITIBA", 3_000),
    ("RIO GRANDE DO SUL", "PORTO ALEGRE", 2_000),
    ("BAHIA", "SALVADOR", 1_007),
];

/// City of each cotton transaction, in [`COTTON_TRANSACTIONS`] order.
const COTTON_CITIES: [&str; 14] = [
    "OURO BRANCO",
    "SAO PAULO",
    "BLUMENAU",
    "FORTALEZA",
    "BELO HORIZONTE",
    "VITORIA",
    "JOINVILLE",
    "SERRA",
    "VILA VELHA",
    "CARIACICA",
    "VITORIA",
    "SERRA",
    "VILA VELHA",
    "EXTREMA",
];

/// The other SH4 5208 codes imported from China.
const OTHER_NCMS: [&str; 6] = ["52081100", "52081200", "52082100", "52082200", "52084200", "52085200"];

/// Cities outside Minas Gerais that import the other codes.
const OTHER_CITIES: std::ops::Range<usize> = 3..19;

/// A release built around the cotton transactions.
///
/// SH4 5208 from China has 99 transactions spread over 19 cities, too many
/// to allocate to cities directly. Narrowing to Minas Gerais through the
/// cotton state totals leaves three cities, and only OURO BRANCO can hold
/// the target. Its one importer is [`target_importer`].
pub fn walkthrough_world() -> TradeWorld {
    let mut importers = Vec::with_capacity(POPULATION);
    let mut first_of_city = Vec::with_capacity(CITIES.len());
    for (state, city, count) in CITIES {
        first_of_city.push(importers.len());
        for _ in 0..count {
            let i = importers.len();
            importers.push(Importer {
                id: format!("{:08}000{:03}", 10_000_000 + i, i % 97),
                name: format!("IMPORTADORA {i:05}"),
                city: city.to_string(),
                state: state.to_string(),
            });
        }
    }
    let city_index = |name: &str| CITIES.iter().position(|c| c.1 == name).expect("known city");
    let importer_of = |city: usize, k: usize| importers[first_of_city[city] + k % CITIES[city].2].id.clone();

    let tx = |order: String, ncm: &str, value: Quantity, weight: Quantity, importer: String| MicroTransaction {
        order,
        year_month: YEAR_MONTH.to_string(),
        ncm: Ncm::new(ncm).expect("valid NCM"),
        country: ORIGIN.to_string(),
        value,
        weight,
        importer,
        class: InclusionClass::Effective,
    };
    let mut transactions = Vec::with_capacity(99);
    for (k, ((order, v, w), city)) in COTTON_TRANSACTIONS.iter().zip(COTTON_CITIES).enumerate() {
        transactions.push(tx(
            order.to_string(),
            "52083900",
            Quantity::parse(v, Scale::VALUE).expect("valid value"),
            Quantity::parse(w, Scale::WEIGHT).expect("valid weight"),
            importer_of(city_index(city), k),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5208);
    let mut other = |i: usize, ncm: &str, city: usize| {
        let cents = (rng.gen_range(50.0f64..50_000.0) * 100.0).round() as u64;
        let per_kg = rng.gen_range(2.0f64..20.0);
        // Weight to the nearest 10 g.
        let weight = ((cents as f64 / 100.0 / per_kg) * 100.0).round().max(1.0) as u64 * 1_000;
        tx(
            format!("{:09}01", 300_000_000 + i),
            ncm,
            Quantity::from_units(cents),
            Quantity::from_units(weight),
            importer_of(city, i / OTHER_CITIES.len()),
        )
    };
    transactions.push(other(0, OTHER_NCMS[0], city_index("BELO HORIZONTE")));
    transactions.push(other(1, OTHER_NCMS[5], city_index("EXTREMA")));
    for i in 0..83 {
        let city = OTHER_CITIES.start + i % OTHER_CITIES.len();
        transactions.push(other(i + 2, OTHER_NCMS[i % OTHER_NCMS.len()], city));
    }

    importers.sort_by(|a, b| a.id.cmp(&b.id));
    transactions.sort_by(|a, b| a.order.cmp(&b.order));
    TradeWorld {
        config: WorldConfig {
            importers: POPULATION,
            cities: CITIES.len(),
            states: 9,
            transactions: transactions.len(),
            sh4_codes: 1,
            ncms_per_sh4: 1 + OTHER_NCMS.len(),
            countries: 1,
            single_importer_city_fraction: 1.0 / CITIES.len() as f64,
            year_month: YEAR_MONTH.to_string(),
            ..WorldConfig::default()
        },
        seed: 5208,
        importers,
        transactions,
    }
}

/// The only importer in OURO BRANCO.
pub fn target_importer(world: &TradeWorld) -> &Importer {
    world
        .importers
        .iter()
        .find(|i| i.city == TARGET_CITY)
        .expect("OURO BRANCO has an importer")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{run_attack, AttackConfig, PhaseOutcome, SkipReason, Verdict};
    use crate::datagen::publish;

    #[test]
    fn world_shape() {
        let world = walkthrough_world();
        assert_eq!(world.importers.len(), POPULATION);
        assert_eq!(world.transactions.len(), 99);
        let release = publish(&world);
        assert_eq!(release.deidentified.len(), 99);
        assert_eq!(release.by_city.len(), 19);
        let cotton: Vec<(String, String, String)> = release
            .by_state
            .iter()
            .filter(|s| s.ncm.as_str() == "52083900")
            .map(|s| {
                (
                    s.state.clone(),
                    s.value.display(Scale::VALUE).to_string(),
                    s.weight.display(Scale::WEIGHT).to_string(),
                )
            })
            .collect();
        let expect: Vec<(String, String, String)> = COTTON_STATES
            .iter()
            .map(|(s, v, w)| (s.to_string(), v.to_string(), w.to_string()))
            .collect();
        assert_eq!(cotton, expect);
        assert_eq!(target_importer(&world).state, TARGET_STATE);
    }

    #[test]
    fn target_is_reidentified() {
        let world = walkthrough_world();
        let release = publish(&world);
        let trace = run_attack(&release, TARGET_ORDER, &AttackConfig::default()).unwrap();
        assert!(matches!(
            trace.phases[0].outcome,
            PhaseOutcome::Skipped(SkipReason::Complexity { .. })
        ));
        assert_eq!(trace.phases[0].packages, 99);
        assert_eq!(trace.phases[0].bins, 19);
        assert_eq!(
            trace.phases[1].outcome,
            PhaseOutcome::Solved {
                feasible: vec![TARGET_STATE.to_string()],
                complete: true
            }
        );
        assert_eq!(trace.phases[1].packages, 14);
        assert_eq!(trace.phases[1].bins, 5);
        let counts: Vec<(&str, usize)> = trace.steps.iter().map(|s| (s.label, s.importers)).collect();
        assert_eq!(
            counts,
            [("prior", 18_430), ("phase1_filter", 4_923), ("phase2", 326), ("phase3", 1)]
        );
        assert_eq!(trace.verdict, Verdict::Certain);
        assert_eq!(trace.city.as_deref(), Some(TARGET_CITY));
        assert_eq!(trace.importer.as_deref(), Some(target_importer(&world).id.as_str()));
    }
}
