//! Market mechanism: remuneration schemes, price schedules and the
//! analytics of random superdistribution.

mod analytics;
mod pricing;
mod scheme;

use thiserror::Error;

use crate::money::Money;

pub use analytics::{ancestor_prob, curve, effective_price, expected_revenue, write_curve_csv, CurveRow};
pub use pricing::{Breakpoint, PriceSchedule};
pub use scheme::{allocate, Allocation, Payee, RemunerationScheme};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("negative price {0}")]
    InvalidPrice(Money),
    #[error("saturation {0} outside [0, 1]")]
    InvalidSaturation(f64),
    #[error("invalid indices: {0}")]
    InvalidIndices(String),
    #[error("invalid remuneration scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid price schedule: {0}")]
    InvalidSchedule(String),
    #[error("rounded payouts on {price} exceed the outlay by {}¢", -.residual.as_cents())]
    RoundingOverflow { price: Money, residual: Money },
}
