//! Integer money and exact share arithmetic.
//!
//! Ledgers never touch floating point: amounts are minor units (cents) and
//! shares are basis points, so every allocation can be checked for exact
//! conservation.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// An amount of money in minor units (cents).
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn cents(value: i64) -> Self {
        Money(value)
    }

    pub const fn as_cents(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}¢", self.0)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

/// A fraction of a price, in basis points (1/10,000).
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Share(pub u32);

impl Share {
    pub const ZERO: Share = Share(0);
    pub const WHOLE: Share = Share(10_000);

    pub const fn basis_points(bp: u32) -> Self {
        Share(bp)
    }

    pub const fn percent(pct: u32) -> Self {
        Share(pct * 100)
    }

    pub const fn as_basis_points(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10_000.0
    }

    /// `self · price`, rounded half up to whole minor units.
    ///
    /// Only defined for non-negative prices; callers validate that first.
    pub fn of(self, price: Money) -> Money {
        debug_assert!(price.0 >= 0);
        let scaled = i128::from(self.0) * i128::from(price.0);
        Money(((scaled + 5_000) / 10_000) as i64)
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}%", self.0 / 100, self.0 % 100)
    }
}

impl Add for Share {
    type Output = Share;
    fn add(self, rhs: Share) -> Share {
        Share(self.0 + rhs.0)
    }
}

impl Sum for Share {
    fn sum<I: Iterator<Item = Share>>(iter: I) -> Share {
        iter.fold(Share::ZERO, Add::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn share_rounds_half_up() {
        assert_eq!(Share::percent(10).of(Money(100)), Money(10));
        // 2.5% of 100¢ = 2.5¢ -> 3¢
        assert_eq!(Share::basis_points(250).of(Money(100)), Money(3));
        // 2.49% of 100¢ = 2.49¢ -> 2¢
        assert_eq!(Share::basis_points(249).of(Money(100)), Money(2));
        assert_eq!(Share::percent(14).of(Money(0)), Money(0));
    }

    #[test]
    fn display() {
        assert_eq!(Share::basis_points(1_050).to_string(), "10.50%");
        assert_eq!(Money(42).to_string(), "42¢");
    }
}
