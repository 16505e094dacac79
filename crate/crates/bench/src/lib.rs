//! Shared fixtures for the solver benchmarks.

use leakfit::allocation::{planted_instance, PlantedConfig};
use leakfit::walkthrough::{COTTON_STATES, COTTON_TRANSACTIONS, TARGET_ORDER};
use leakfit::{AllocationInstance, Bin, Package, Quantity, Scale};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The fourteen cotton transactions over the five published state totals,
/// with half a unit of tolerance and the first transaction as target.
pub fn cotton_instance() -> AllocationInstance {
    let q = |s: &str, scale| Quantity::parse(s, scale).expect("walkthrough literals parse");
    let tol = vec![q("0.5", Scale::VALUE), q("0.5", Scale::WEIGHT)];
    let packages = COTTON_TRANSACTIONS
        .iter()
        .map(|(id, v, w)| Package::new(*id, vec![q(v, Scale::VALUE), q(w, Scale::WEIGHT)]))
        .collect();
    let bins = COTTON_STATES
        .iter()
        .map(|(id, v, w)| Bin::new(*id, vec![q(v, Scale::VALUE), q(w, Scale::WEIGHT)], tol.clone()))
        .collect();
    AllocationInstance::new(2, packages, bins)
        .and_then(|i| i.with_target(TARGET_ORDER))
        .expect("cotton instance is well formed")
}

/// A two-attribute planted instance with `n` packages over `m` bins, its
/// first package as target.
pub fn planted(n: usize, m: usize, seed: u64) -> AllocationInstance {
    let cfg = PlantedConfig {
        units: (100, 10_000_000),
        tolerance: 100,
        ..PlantedConfig::new(n, m, 2)
    };
    let (mut inst, _) = planted_instance(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    inst.set_target(0);
    inst
}
