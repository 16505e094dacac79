//! Random instances with a known valid assignment.

use rand::Rng;

use super::{AllocationInstance, Assignment, Bin, Package};
use crate::quantity::Quantity;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub packages: usize,
    pub bins: usize,
    pub attributes: usize,
    /// Package attributes are drawn log-uniformly from this range of units.
    pub units: (u64, u64),
    /// Per-bin, per-attribute tolerance in units.
    pub tolerance: u64,
    /// Each capacity is shifted by up to this many units either way, which
    /// can make the instance infeasible.
    pub noise: u64,
}

impl PlantedConfig {
    pub fn new(packages: usize, bins: usize, attributes: usize) -> Self {
        PlantedConfig {
            packages,
            bins,
            attributes,
            units: (1, 20),
            tolerance: 0,
            noise: 0,
        }
    }
}

/// Draws packages, drops each into a random bin and sets every capacity to
/// the load that results, then applies the noise. The returned assignment
/// is valid whenever `noise <= tolerance`.
pub fn planted_instance<R: Rng>(cfg: &PlantedConfig, rng: &mut R) -> (AllocationInstance, Assignment) {
    assert!(cfg.packages > 0 && cfg.bins > 0 && cfg.attributes > 0);
    assert!(0 < cfg.units.0 && cfg.units.0 <= cfg.units.1);
    let (lo, hi) = (cfg.units.0 as f64, cfg.units.1 as f64 + 1.0);
    let draw = |rng: &mut R| {
        let x = rng.gen_range(lo.ln()..hi.ln()).exp().floor() as u64;
        Quantity::from_units(x.clamp(cfg.units.0, cfg.units.1))
    };
    let truth: Vec<usize> = (0..cfg.packages).map(|_| rng.gen_range(0..cfg.bins)).collect();
    let packages: Vec<Package> = (0..cfg.packages)
        .map(|i| Package::new(format!("p{i}"), (0..cfg.attributes).map(|_| draw(rng)).collect()))
        .collect();
    let mut loads = vec![vec![0i64; cfg.attributes]; cfg.bins];
    for (p, &b) in truth.iter().enumerate() {
        for (a, q) in packages[p].attrs.iter().enumerate() {
            loads[b][a] += q.units() as i64;
        }
    }
    let noise = cfg.noise as i64;
    let bins = loads
        .iter()
        .enumerate()
        .map(|(j, load)| {
            let cap = load
                .iter()
                .map(|&l| Quantity::from_units((l + rng.gen_range(-noise..=noise)).max(0) as u64))
                .collect();
            Bin::new(format!("b{j}"), cap, vec![Quantity::from_units(cfg.tolerance); cfg.attributes])
        })
        .collect();
    let inst = AllocationInstance::new(cfg.attributes, packages, bins).expect("planted instances are well formed");
    (inst, Assignment::new(truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::validate_assignment;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn plant_is_valid_without_noise(seed in any::<u64>(), n in 1usize..30, m in 1usize..6, k in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = PlantedConfig { units: (1, 10_000), ..PlantedConfig::new(n, m, k) };
            let (inst, truth) = planted_instance(&cfg, &mut rng);
            prop_assert_eq!((inst.n(), inst.m(), inst.k()), (n, m, k));
            prop_assert!(validate_assignment(&inst, &truth).unwrap());
        }
    }
}
