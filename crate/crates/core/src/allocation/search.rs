//! Depth-first backtracking over package placements.

use std::cmp::Ordering;
use std::time::Instant;

use super::AllocationInstance;
use crate::quantity::Quantity;

pub(crate) enum SearchResult {
    Found(Vec<usize>),
    Exhausted,
    TimedOut,
}

pub(crate) struct Budget {
    pub deadline: Instant,
    pub check_interval: u64,
}

impl Budget {
    pub fn expired(&self) -> bool {
        Instant::now() >= self.deadline
    }
}

/// A flattened, reordered view of an instance ready for search.
pub(crate) struct SearchProblem {
    n: usize,
    m: usize,
    k: usize,
    /// Search depth -> package index in the instance.
    order: Vec<usize>,
    /// `weights[d * k + i]`
    weights: Vec<i64>,
    /// `lower[b * k + i]`, `upper[b * k + i]`
    lower: Vec<i64>,
    upper: Vec<i64>,
    /// `allowed[d * m + b]`
    allowed: Vec<bool>,
    /// Depth `d` may not use a bin below the one chosen at `d - 1`.
    follows_twin: Vec<bool>,
    active: Vec<bool>,
}

fn units(q: Quantity) -> i64 {
    i64::try_from(q.units()).expect("quantity exceeds search range")
}

impl SearchProblem {
    /// `tolerance` overrides every bin tolerance when given; attributes with
    /// `active[i] == false` are ignored entirely.
    pub fn new(
        inst: &AllocationInstance,
        tolerance: Option<&[Quantity]>,
        active: &[bool],
    ) -> SearchProblem {
        let (n, m, k) = (inst.n(), inst.m(), inst.k());
        let order = package_order(inst);

        let mut weights = Vec::with_capacity(n * k);
        for &p in &order {
            weights.extend(inst.packages()[p].attrs.iter().map(|&q| units(q)));
        }
        let mut lower = Vec::with_capacity(m * k);
        let mut upper = Vec::with_capacity(m * k);
        for bin in inst.bins() {
            for i in 0..k {
                let cap = units(bin.capacity[i]);
                let tol = units(tolerance.map_or(bin.tolerance[i], |t| t[i]));
                lower.push(cap - tol);
                upper.push(cap + tol);
            }
        }
        let mut allowed = Vec::with_capacity(n * m);
        for &p in &order {
            allowed.extend((0..m).map(|b| inst.is_allowed(p, b)));
        }
        let follows_twin = (0..n)
            .map(|d| {
                d > 0
                    && weights[d * k..(d + 1) * k] == weights[(d - 1) * k..d * k]
                    && allowed[d * m..(d + 1) * m] == allowed[(d - 1) * m..d * m]
            })
            .collect();

        SearchProblem {
            n,
            m,
            k,
            order,
            weights,
            lower,
            upper,
            allowed,
            follows_twin,
            active: active.to_vec(),
        }
    }

    pub fn run(&self, budget: &Budget, nodes: &mut u64) -> SearchResult {
        let (n, m, k) = (self.n, self.m, self.k);
        let mut loads = vec![0i64; m * k];
        let mut remaining: Vec<i64> = (0..k)
            .map(|i| (0..n).map(|d| self.weights[d * k + i]).sum())
            .collect();
        let mut cursor = vec![0usize; n];
        let mut chosen = vec![usize::MAX; n];
        let mut depth = 0usize;

        loop {
            if depth == n {
                let mut bins = vec![0; n];
                for (d, &p) in self.order.iter().enumerate() {
                    bins[p] = chosen[d];
                }
                return SearchResult::Found(bins);
            }

            let mut placed = false;
            let first = if self.follows_twin[depth] {
                cursor[depth].max(chosen[depth - 1])
            } else {
                cursor[depth]
            };
            for b in first..m {
                if !self.allowed[depth * m + b] || !self.fits(&loads, depth, b) {
                    continue;
                }
                *nodes += 1;
                if nodes.is_multiple_of(budget.check_interval) && budget.expired() {
                    return SearchResult::TimedOut;
                }
                self.place(&mut loads, &mut remaining, depth, b, 1);
                if self.bound_holds(&loads, &remaining) {
                    cursor[depth] = b + 1;
                    chosen[depth] = b;
                    depth += 1;
                    if depth < n {
                        cursor[depth] = 0;
                    }
                    placed = true;
                    break;
                }
                self.place(&mut loads, &mut remaining, depth, b, -1);
            }

            if !placed {
                if depth == 0 {
                    return SearchResult::Exhausted;
                }
                depth -= 1;
                let b = chosen[depth];
                self.place(&mut loads, &mut remaining, depth, b, -1);
            }
        }
    }

    fn fits(&self, loads: &[i64], depth: usize, b: usize) -> bool {
        let k = self.k;
        (0..k).all(|i| {
            !self.active[i] || loads[b * k + i] + self.weights[depth * k + i] <= self.upper[b * k + i]
        })
    }

    fn place(&self, loads: &mut [i64], remaining: &mut [i64], depth: usize, b: usize, sign: i64) {
        let k = self.k;
        for i in 0..k {
            let w = sign * self.weights[depth * k + i];
            loads[b * k + i] += w;
            remaining[i] -= w;
        }
    }

    /// Every bin must still be able to reach its lower bound from the
    /// unassigned mass, and the bins together must be able to absorb it.
    fn bound_holds(&self, loads: &[i64], remaining: &[i64]) -> bool {
        let k = self.k;
        for i in 0..k {
            if !self.active[i] {
                continue;
            }
            let mut deficit = 0i64;
            let mut room = 0i64;
            for b in 0..self.m {
                let load = loads[b * k + i];
                let short = self.lower[b * k + i] - load;
                if short > remaining[i] {
                    return false;
                }
                deficit += short.max(0);
                room += self.upper[b * k + i] - load;
            }
            if deficit > remaining[i] || room < remaining[i] {
                return false;
            }
        }
        true
    }
}

/// Target package first, then decreasing largest attribute (each attribute
/// measured relative to its instance-wide total), ties by id.
fn package_order(inst: &AllocationInstance) -> Vec<usize> {
    let k = inst.k();
    let totals: Vec<u128> = (0..k)
        .map(|i| {
            inst.packages()
                .iter()
                .map(|p| p.attrs[i].units() as u128)
                .sum::<u128>()
                .max(1)
        })
        .collect();
    // (numerator, denominator) of the largest relative attribute
    let key = |p: usize| -> (u128, u128) {
        let attrs = &inst.packages()[p].attrs;
        (0..k)
            .map(|i| (attrs[i].units() as u128, totals[i]))
            .max_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)))
            .unwrap_or((0, 1))
    };
    let keys: Vec<(u128, u128)> = (0..inst.n()).map(key).collect();
    let target = inst.target();
    let mut order: Vec<usize> = (0..inst.n()).collect();
    order.sort_by(|&a, &b| {
        let pinned = (Some(b) == target).cmp(&(Some(a) == target));
        pinned.then_with(|| {
            let (na, da) = keys[a];
            let (nb, db) = keys[b];
            match (nb * da).cmp(&(na * db)) {
                Ordering::Equal => inst.packages()[a].id.cmp(&inst.packages()[b].id),
                o => o,
            }
        })
    });
    order
}
