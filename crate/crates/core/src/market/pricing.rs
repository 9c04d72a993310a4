//! Price schedules: the operator's price as a function of market saturation.

use serde::{Deserialize, Serialize};

use super::MarketError;
use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakpoint {
    pub saturation: f64,
    pub price: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriceSchedule {
    Constant {
        price: Money,
    },
    /// Linear interpolation between breakpoints covering `[0, 1]`.
    PiecewiseLinear {
        breakpoints: Vec<Breakpoint>,
    },
    /// `prices[floor(s · market_size)]`, clamped to the last entry.
    Table {
        market_size: u64,
        prices: Vec<Money>,
    },
}

impl PriceSchedule {
    pub fn constant(cents: i64) -> Self {
        PriceSchedule::Constant { price: Money(cents) }
    }

    /// Price falling linearly from `start` at s = 0 to `end` at s = 1.
    pub fn linear(start: i64, end: i64) -> Self {
        PriceSchedule::PiecewiseLinear {
            breakpoints: vec![
                Breakpoint { saturation: 0.0, price: Money(start) },
                Breakpoint { saturation: 1.0, price: Money(end) },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |m: &str| Err(MarketError::InvalidSchedule(m.to_owned()));
        match self {
            PriceSchedule::Constant { price } => {
                if price.is_negative() {
                    return bad("negative price");
                }
            }
            PriceSchedule::PiecewiseLinear { breakpoints } => {
                if breakpoints.len() < 2 {
                    return bad("need at least two breakpoints");
                }
                if breakpoints[0].saturation != 0.0 || breakpoints[breakpoints.len() - 1].saturation != 1.0 {
                    return bad("breakpoints must start at 0 and end at 1");
                }
                if breakpoints.windows(2).any(|w| w[0].saturation >= w[1].saturation) {
                    return bad("breakpoint saturations must be strictly increasing");
                }
                if breakpoints.iter().any(|b| b.price.is_negative()) {
                    return bad("negative price");
                }
            }
            PriceSchedule::Table { market_size, prices } => {
                if prices.is_empty() || *market_size == 0 {
                    return bad("empty price table");
                }
                if prices.iter().any(|p| p.is_negative()) {
                    return bad("negative price");
                }
            }
        }
        Ok(())
    }

    pub fn price_at(&self, s: f64) -> Result<Money, MarketError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(MarketError::InvalidSaturation(s));
        }
        self.validate()?;
        Ok(match self {
            PriceSchedule::Constant { price } => *price,
            PriceSchedule::PiecewiseLinear { breakpoints } => {
                let i = breakpoints
                    .windows(2)
                    .position(|w| s <= w[1].saturation)
                    .expect("breakpoints cover [0, 1]");
                let (lo, hi) = (breakpoints[i], breakpoints[i + 1]);
                let t = (s - lo.saturation) / (hi.saturation - lo.saturation);
                let p = lo.price.as_f64() + t * (hi.price.as_f64() - lo.price.as_f64());
                // round half up
                Money((p + 0.5).floor() as i64)
            }
            PriceSchedule::Table { market_size, prices } => {
                // n/N · N can land a hair under n
                let idx = (s * *market_size as f64 + 1e-9).floor() as usize;
                prices[idx.min(prices.len() - 1)]
            }
        })
    }
}
