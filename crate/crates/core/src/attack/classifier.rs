use crate::quantity::{ceil_units, Quantity, Scale};

/// One-sided 99% quantile of the standard normal.
pub const Z_99: f64 = 2.33;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    /// Explained by rounding `n` totals.
    Rounding,
    /// Too large for rounding alone at the 1% level.
    Excluded,
}

/// Largest total rounding error of `n` independently rounded figures that is
/// exceeded with probability below 1%, in attribute units.
///
/// Each error is uniform on `[-0.5, 0.5]` with variance `1/12`, so the sum
/// has standard deviation `sqrt(n/12)` and the bound is `n * 2.33 / sqrt(12 n)`.
pub fn clt_threshold(n: usize) -> f64 {
    let n = n as f64;
    n * Z_99 / (12.0 * n).sqrt()
}

/// Classifies the absolute gap between a published total built from `n`
/// rounded figures and the microdata it should match.
pub fn divergence_classifier(n: usize, diff: Quantity, scale: Scale) -> Divergence {
    assert!(n >= 1, "a group has at least one published figure");
    if diff.to_f64(scale) > clt_threshold(n) {
        Divergence::Excluded
    } else {
        Divergence::Rounding
    }
}

/// CLT-scaled bin tolerance for a bin that can receive `candidates`
/// packages: `max(0.5, 2.33 * sqrt(candidates / 12))` units, rounded up to
/// the scale.
pub fn clt_tolerance(candidates: usize, scale: Scale) -> Quantity {
    let eps = (Z_99 * (candidates as f64 / 12.0).sqrt()).max(0.5);
    ceil_units(eps, scale)
}
