//! Acceptance suite: one PASS or FAIL line per criterion, nonzero exit if
//! any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use leakfit::allocation::{planted_instance, subset_sum_via_reduction, PlantedConfig};
use leakfit::attack::{
    clt_threshold, divergence_classifier, enumerate_feasible_bins, AttackConfig, AttackSummary, Attacker,
    Divergence, Z_99,
};
use leakfit::datagen::{generate_world, publish, WorldConfig};
use leakfit::ladder::{ladder_bands, run_ladder, LadderConfig, LadderOutcome};
use leakfit::qif::{format_probability, format_ratio, leakage_from_counts};
use leakfit::walkthrough::{COTTON_STATES, COTTON_TRANSACTIONS, TARGET_ORDER};
use leakfit::{
    solve, validate_assignment, AllocationInstance, Bin, Package, Quantity, Scale, SolveOutcome, SolverConfig,
};
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cotton() -> AllocationInstance {
    let q = |s: &str, scale| Quantity::parse(s, scale).unwrap();
    let tol = vec![q("0.5", Scale::VALUE), q("0.5", Scale::WEIGHT)];
    let packages = COTTON_TRANSACTIONS
        .iter()
        .map(|(id, v, w)| Package::new(*id, vec![q(v, Scale::VALUE), q(w, Scale::WEIGHT)]))
        .collect();
    let bins = COTTON_STATES
        .iter()
        .map(|(id, v, w)| Bin::new(*id, vec![q(v, Scale::VALUE), q(w, Scale::WEIGHT)], tol.clone()))
        .collect();
    AllocationInstance::new(2, packages, bins).unwrap().with_target(TARGET_ORDER).unwrap()
}

fn worked_example() -> Outcome {
    let start = Instant::now();
    let inst = cotton();
    let cfg = SolverConfig::default();
    let found = enumerate_feasible_bins(&inst, &cfg).map_err(|e| e.to_string())?;
    let names: Vec<&str> = found.bins.iter().map(|&b| inst.bins()[b].id.as_str()).collect();
    check(found.complete && names == ["MINAS GERAIS"], || format!("feasible states {names:?}"))?;

    let SolveOutcome::Feasible(mut a) = solve(&inst, &cfg).map_err(|e| e.to_string())? else {
        return Err("the cotton instance has no valid allocation".into());
    };
    check(validate_assignment(&inst, &a) == Ok(true), || "witness fails validation".into())?;
    let (x, y) = (inst.package_index("12343400002").unwrap(), inst.package_index("05566500003").unwrap());
    check(a.bin_of(x) != a.bin_of(y), || "swap partners share a state".into())?;
    a.swap(x, y);
    check(validate_assignment(&inst, &a) == Ok(false), || "swapped allocation still validates".into())?;

    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("R = {{MINAS GERAIS}}, swap rejected, {:.1} ms", elapsed.as_secs_f64() * 1e3))
}

fn leakage_table() -> Outcome {
    let counts: Vec<(String, u64)> = [("prior", 18_430), ("phase1", 4_923), ("phase2", 326), ("phase3", 1)]
        .iter()
        .map(|(l, c)| (l.to_string(), *c))
        .collect();
    let rows = leakage_from_counts(&counts).map_err(|e| e.to_string())?;
    let vuln: Vec<String> = rows.iter().map(|r| format_probability(&r.vulnerability)).collect();
    let step: Vec<String> = rows[1..].iter().map(|r| format_ratio(&r.step_leakage)).collect();
    check(vuln == ["0.005%", "0.02%", "0.3%", "100%"], || format!("vulnerabilities {vuln:?}"))?;
    check(step == ["3.7", "15", "326"], || format!("step leakages {step:?}"))?;
    Ok(format!("vulnerabilities {} / step leakages {}", vuln.join(" "), step.join(" ")))
}

fn clt() -> Outcome {
    let usd = Quantity::parse("1.2", Scale::VALUE).unwrap();
    check(
        divergence_classifier(3, usd, Scale::VALUE) == Divergence::Excluded,
        || "diff 1.2 over 3 rows is not excluded".into(),
    )?;
    let printed = format!("{:.3}", clt_threshold(3));
    check(printed == "1.165", || format!("T(3) prints as {printed}"))?;

    let direct = |n: usize| Z_99 * (n as f64 / 12.0).sqrt();
    let rel = |n: usize| ((clt_threshold(n) - direct(n)) / direct(n)).abs();
    for n in [1, 2, 3, 12, 999_999, 1_000_000] {
        check(rel(n) < 1e-9, || format!("relative error {} at n = {n}", rel(n)))?;
    }
    let cases = 100_000;
    let mut runner = TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner
        .run(&(1usize..=1_000_000), |n| {
            if rel(n) < 1e-9 {
                Ok(())
            } else {
                Err(TestCaseError::fail(format!("relative error {} at n = {n}", rel(n))))
            }
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("classifier(3, 1.2) = Excluded, T(3) = {printed}, {cases} property cases"))
}

/// Every valid assignment, walked as an odometer with running loads.
/// Returns whether any exists with the target in `pin` (if set) and the set
/// of bins the target occupies across all of them.
fn brute_force(inst: &AllocationInstance, pin: Option<usize>) -> (bool, BTreeSet<usize>) {
    let (n, m, k) = (inst.n(), inst.m(), inst.k());
    let rho = inst.target().unwrap();
    let attr = |p: usize, i: usize| inst.packages()[p].attrs[i].units();
    let lower: Vec<Vec<u64>> = inst.bins().iter().map(|b| (0..k).map(|i| b.lower(i).units()).collect()).collect();
    let upper: Vec<Vec<u64>> = inst.bins().iter().map(|b| (0..k).map(|i| b.upper(i).units()).collect()).collect();
    let mut digits = vec![0usize; n];
    let mut loads = vec![vec![0u64; k]; m];
    for p in 0..n {
        for i in 0..k {
            loads[0][i] += attr(p, i);
        }
    }
    let mut pinned_ok = false;
    let mut bins = BTreeSet::new();
    loop {
        let valid = (0..m).all(|b| (0..k).all(|i| lower[b][i] <= loads[b][i] && loads[b][i] <= upper[b][i]));
        if valid {
            bins.insert(digits[rho]);
            pinned_ok |= pin.is_none_or(|b| digits[rho] == b);
        }
        let mut p = 0;
        loop {
            if p == n {
                return (pinned_ok, bins);
            }
            let from = digits[p];
            let to = (from + 1) % m;
            for i in 0..k {
                loads[from][i] -= attr(p, i);
                loads[to][i] += attr(p, i);
            }
            digits[p] = to;
            if to != 0 {
                break;
            }
            p += 1;
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = SolverConfig::default();
    let (mut feasible, mut infeasible, mut multi) = (0, 0, 0);
    for case in 0..1000 {
        let n = rng.gen_range(1..=12);
        let m = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=2);
        let planted = PlantedConfig {
            tolerance: rng.gen_range(0..=1),
            noise: [0, 0, 1, 2][rng.gen_range(0..4)],
            ..PlantedConfig::new(n, m, k)
        };
        let (mut inst, _) = planted_instance(&planted, &mut rng);
        inst.set_target(rng.gen_range(0..n));
        let pin = rng.gen_bool(0.5).then(|| rng.gen_range(0..m));

        let (_, expected_bins) = brute_force(&inst, None);
        let found = enumerate_feasible_bins(&inst, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let got: BTreeSet<usize> = found.bins.iter().copied().collect();
        check(found.complete && got == expected_bins, || {
            format!("case {case} (n={n}, m={m}, k={k}): R = {got:?}, brute force {expected_bins:?}")
        })?;

        let mut pinned = inst.clone();
        pinned.set_target_bin(pin).map_err(|e| e.to_string())?;
        let (expected, _) = brute_force(&pinned, pin);
        let verdict = solve(&pinned, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let ok = match &verdict {
            SolveOutcome::Feasible(a) => expected && validate_assignment(&pinned, a) == Ok(true),
            SolveOutcome::Infeasible { .. } => !expected,
            SolveOutcome::TimedOut => false,
        };
        check(ok, || format!("case {case} (n={n}, m={m}, k={k}, pin={pin:?}): {verdict:?}, brute force {expected}"))?;
        if expected {
            feasible += 1;
        } else {
            infeasible += 1;
        }
        multi += usize::from(expected_bins.len() > 1);
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "1000/1000 match ({feasible} feasible, {infeasible} infeasible, {multi} with |R| > 1), {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn subset_sum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cfg = SolverConfig::default();
    let (mut yes, mut no) = (0, 0);
    for case in 0..200 {
        let len = rng.gen_range(1..=14);
        let numbers: Vec<u64> = (0..len).map(|_| rng.gen_range(1..=60)).collect();
        let total: u64 = numbers.iter().sum();
        let target = rng.gen_range(1..=total);
        let expected = (1u32..(1 << len)).any(|mask| {
            numbers.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x).sum::<u64>() == target
        });
        let got = subset_sum_via_reduction(&numbers, target, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        check(got == Some(expected), || format!("case {case}: {numbers:?} -> {target}: {got:?}, brute force {expected}"))?;
        if expected {
            yes += 1;
        } else {
            no += 1;
        }
    }
    Ok(format!("200/200 match ({yes} yes, {no} no)"))
}

struct WorldRun {
    targets: usize,
    certain: usize,
    certain_correct: usize,
    city: usize,
    city_correct: usize,
    elapsed: Duration,
}

fn attack_world(cfg: &WorldConfig, seed: u64) -> Result<WorldRun, String> {
    let start = Instant::now();
    let world = generate_world(cfg, seed).map_err(|e| e.to_string())?;
    let release = publish(&world);
    let attacker = Attacker::new(&release, AttackConfig::default()).map_err(|e| e.to_string())?;
    let orders: Vec<String> = release.deidentified.iter().map(|t| t.order.clone()).collect();
    let traces = attacker.attack_all(&orders, workers()).map_err(|e| e.to_string())?;
    let mut summary = AttackSummary::new(&traces);
    summary.evaluate(&traces, &world.transactions, &release.importers);
    let p = summary.precision.unwrap();
    Ok(WorldRun {
        targets: traces.len(),
        certain: p.certain,
        certain_correct: p.certain_correct,
        city: p.city,
        city_correct: p.city_correct,
        elapsed: start.elapsed(),
    })
}

fn end_to_end() -> Outcome {
    let cfg = WorldConfig {
        transactions: 10_000,
        importers: 500,
        single_importer_city_fraction: 0.1,
        outlier_rate: 0.0,
        administrative_rate: 0.0,
        ..WorldConfig::default()
    };
    let r = attack_world(&cfg, 1)?;
    check(r.certain >= 1, || "no certain re-identification".into())?;
    check(r.certain_correct == r.certain, || {
        format!("{} false certainties out of {}", r.certain - r.certain_correct, r.certain)
    })?;
    check(r.elapsed < Duration::from_secs(1800), || format!("took {:?}", r.elapsed))?;
    Ok(format!(
        "{} targets, {}/{} certain correct, cities {}/{}, {:.1} s",
        r.targets,
        r.certain_correct,
        r.certain,
        r.city_correct,
        r.city,
        r.elapsed.as_secs_f64()
    ))
}

fn exclusions() -> Outcome {
    let mut parts = Vec::new();
    for (kind, outlier, administrative) in [("outlier", 0.01, 0.0), ("administrative", 0.0, 0.01)] {
        let cfg = WorldConfig {
            single_importer_city_fraction: 0.1,
            outlier_rate: outlier,
            administrative_rate: administrative,
            ..WorldConfig::default()
        };
        let (mut certain, mut wrong) = (0, 0);
        for seed in 1..=3 {
            let r = attack_world(&cfg, seed)?;
            certain += r.certain;
            wrong += r.certain - r.certain_correct;
        }
        check(wrong == 0, || format!("{kind}: {wrong} false certainties out of {certain}"))?;
        parts.push(format!("{kind} 1%: 0/{certain} false"));
    }
    Ok(format!("{} over seeds 1-3", parts.join(", ")))
}

fn performance() -> Outcome {
    let rows = run_ladder(&LadderConfig::default()).map_err(|e| e.to_string())?;
    let easy: Vec<_> = rows.iter().filter(|r| r.complexity <= 5.0).collect();
    check(!easy.is_empty(), || "no instances at complexity 5 or below".into())?;
    let slow = easy
        .iter()
        .filter(|r| r.outcome != LadderOutcome::Solved || r.elapsed >= Duration::from_secs(60))
        .count();
    check(slow == 0, || format!("{slow} of {} easy instances unsolved", easy.len()))?;
    let bands = ladder_bands(&rows);
    let medians: Vec<Duration> = bands.iter().filter_map(|b| b.median).collect();
    let table: Vec<String> = bands
        .iter()
        .map(|b| format!("{}:{:.1}us", b.band, b.median.unwrap_or_default().as_secs_f64() * 1e6))
        .collect();
    check(medians.windows(2).all(|w| w[0] <= w[1]), || format!("medians not monotone: {}", table.join(" ")))?;
    Ok(format!("{} easy instances solved; medians {}", easy.len(), table.join(" ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("worked example", worked_example),
        ("leakage table", leakage_table),
        ("CLT threshold", clt),
        ("oracle equivalence", oracle_equivalence),
        ("SUBSET SUM reduction", subset_sum),
        ("end-to-end soundness", end_to_end),
        ("robustness under exclusion", exclusions),
        ("performance envelope", performance),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
