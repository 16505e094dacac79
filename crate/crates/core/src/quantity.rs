//! Fixed-point attribute quantities.
//!
//! Every monetary and mass figure in the toolkit is an integer count of the
//! smallest published unit: hundredths of a dollar for values, hundred
//! thousandths of a kilogram for weights. Sums never touch floating point.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use thiserror::Error;

/// Number of fractional decimal digits carried by an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scale {
    decimals: u32,
}

impl Scale {
    /// USD with cent precision.
    pub const VALUE: Scale = Scale { decimals: 2 };
    /// Kilograms with five decimal places.
    pub const WEIGHT: Scale = Scale { decimals: 5 };
    /// Plain integers.
    pub const INTEGER: Scale = Scale { decimals: 0 };

    pub const fn new(decimals: u32) -> Self {
        Scale { decimals }
    }

    pub const fn decimals(self) -> u32 {
        self.decimals
    }

    /// Units per whole attribute unit (100 for cents).
    pub const fn unit(self) -> u64 {
        10u64.pow(self.decimals)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseQuantityError {
    #[error("empty quantity")]
    Empty,
    #[error("invalid quantity {0:?}")]
    Invalid(String),
    #[error("negative quantity {0:?}")]
    Negative(String),
    #[error("{input:?} has more than {decimals} fractional digits")]
    TooPrecise { input: String, decimals: u32 },
    #[error("quantity {0:?} overflows")]
    Overflow(String),
}

/// A non-negative fixed-point amount, stored as a count of units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quantity(u64);

impl Quantity {
    pub const ZERO: Quantity = Quantity(0);

    pub const fn from_units(units: u64) -> Self {
        Quantity(units)
    }

    /// Whole attribute units, e.g. `from_whole(27_224, Scale::VALUE)` is 27,224.00 USD.
    pub fn from_whole(whole: u64, scale: Scale) -> Self {
        Quantity(whole * scale.unit())
    }

    pub const fn units(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, rhs: Quantity) -> Option<Quantity> {
        self.0.checked_add(rhs.0).map(Quantity)
    }

    pub fn saturating_sub(self, rhs: Quantity) -> Quantity {
        Quantity(self.0.saturating_sub(rhs.0))
    }

    /// Signed difference `self - rhs` in units.
    pub fn signed_diff(self, rhs: Quantity) -> i64 {
        self.0 as i64 - rhs.0 as i64
    }

    pub fn abs_diff(self, rhs: Quantity) -> Quantity {
        Quantity(self.0.abs_diff(rhs.0))
    }

    /// Rounds to a whole number of attribute units, ties to even.
    pub fn round_half_even(self, scale: Scale) -> Quantity {
        let unit = scale.unit();
        let whole = self.0 / unit;
        let rem = self.0 % unit;
        let twice = rem * 2;
        let up = twice > unit || (twice == unit && whole % 2 == 1);
        Quantity((whole + u64::from(up)) * unit)
    }

    /// Value as a float in whole attribute units. Reporting only.
    pub fn to_f64(self, scale: Scale) -> f64 {
        self.0 as f64 / scale.unit() as f64
    }

    /// Parses a plain decimal string (`"3388.41"`, `"23.1"`, `"112"`).
    pub fn parse(input: &str, scale: Scale) -> Result<Quantity, ParseQuantityError> {
        let s = input.trim();
        if s.is_empty() {
            return Err(ParseQuantityError::Empty);
        }
        if s.starts_with('-') {
            return Err(ParseQuantityError::Negative(input.to_string()));
        }
        let s = s.strip_prefix('+').unwrap_or(s);
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        let digits_only = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty())
            || !digits_only(int_part)
            || !digits_only(frac_part)
        {
            return Err(ParseQuantityError::Invalid(input.to_string()));
        }
        // Trailing zeros beyond the scale carry no precision.
        let frac_part = frac_part.trim_end_matches('0');
        if frac_part.len() > scale.decimals() as usize {
            return Err(ParseQuantityError::TooPrecise {
                input: input.to_string(),
                decimals: scale.decimals(),
            });
        }
        let overflow = || ParseQuantityError::Overflow(input.to_string());
        let whole: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| overflow())?
        };
        let mut frac: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| overflow())?
        };
        frac *= 10u64.pow(scale.decimals() - frac_part.len() as u32);
        whole
            .checked_mul(scale.unit())
            .and_then(|w| w.checked_add(frac))
            .map(Quantity)
            .ok_or_else(overflow)
    }

    /// Renders with the minimal number of fractional digits (`"23.1"`, `"112"`).
    pub fn display(self, scale: Scale) -> ScaledDisplay {
        ScaledDisplay { q: self, scale }
    }
}

impl Add for Quantity {
    type Output = Quantity;

    fn add(self, rhs: Quantity) -> Quantity {
        Quantity(self.0.checked_add(rhs.0).expect("quantity overflow"))
    }
}

impl AddAssign for Quantity {
    fn add_assign(&mut self, rhs: Quantity) {
        *self = *self + rhs;
    }
}

impl Sum for Quantity {
    fn sum<I: Iterator<Item = Quantity>>(iter: I) -> Quantity {
        iter.fold(Quantity::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Quantity> for Quantity {
    fn sum<I: Iterator<Item = &'a Quantity>>(iter: I) -> Quantity {
        iter.copied().sum()
    }
}

pub struct ScaledDisplay {
    q: Quantity,
    scale: Scale,
}

impl fmt::Display for ScaledDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = self.scale.unit();
        let whole = self.q.0 / unit;
        let frac = self.q.0 % unit;
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let digits = format!("{:0width$}", frac, width = self.scale.decimals() as usize);
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

/// Converts a non-negative amount in whole attribute units to fixed-point
/// units, rounding up so that derived tolerances never shrink.
pub fn ceil_units(amount: f64, scale: Scale) -> Quantity {
    debug_assert!(amount >= 0.0);
    Quantity((amount * scale.unit() as f64).ceil() as u64)
}
