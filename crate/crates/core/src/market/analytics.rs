//! Expected resale revenue under uniform random attachment.
//!
//! Agents enter one at a time; entrant `m` buys from one of the `m` nodes
//! already present (originator included) with equal probability, so the CDO
//! is a random recursive tree. Write `a_k(n, m)` for the probability that
//! node `n` is the level-k ancestor of node `m`:
//!
//! ```text
//! a_1(n, m) = 1/m
//! a_k(n, m) = (1/m) · Σ_{j=n+1}^{m-1} a_{k-1}(n, j)
//! ```
//!
//! and the expected level-reward income of entrant `n` in a market of size N
//! is `R(n) = Σ_{m>n} Σ_k a_k(n, m) · α_k · price(m/N)`.

use std::io;

use super::{MarketError, PriceSchedule, RemunerationScheme};
use crate::money::Money;

/// `P(node n is the level-k ancestor of node m)`.
pub fn ancestor_prob(n: u64, m: u64, k: u32) -> Result<f64, MarketError> {
    if n < 1 || m <= n || k < 1 {
        return Err(MarketError::InvalidIndices(format!("a_{k}({n}, {m})")));
    }
    let sweep = AncestorSweep::new(n, k as usize);
    Ok(sweep.take((m - n) as usize).last().expect("m > n")[k as usize - 1])
}

/// Iterates `[a_1(n, m), .., a_K(n, m)]` for `m = n+1, n+2, ..`.
struct AncestorSweep {
    m: u64,
    /// `prefix[k] = Σ_{j=n+1}^{m-1} a_{k+1}(n, j)`
    prefix: Vec<f64>,
    current: Vec<f64>,
}

impl AncestorSweep {
    fn new(n: u64, levels: usize) -> Self {
        Self {
            m: n,
            prefix: vec![0.0; levels],
            current: vec![0.0; levels],
        }
    }
}

impl Iterator for AncestorSweep {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let levels = self.current.len();
        // fold the previous row into the prefix sums before moving on
        for k in 0..levels {
            self.prefix[k] += self.current[k];
        }
        self.m += 1;
        let inv = 1.0 / self.m as f64;
        for k in 0..levels {
            self.current[k] = if k == 0 { inv } else { self.prefix[k - 1] * inv };
        }
        Some(self.current.clone())
    }
}

fn check_market(n: u64, market_size: u64, scheme: &RemunerationScheme, schedule: &PriceSchedule) -> Result<(), MarketError> {
    if n > market_size {
        return Err(MarketError::InvalidIndices(format!("entry {n} beyond market size {market_size}")));
    }
    scheme.validate()?;
    schedule.validate()
}

fn saturation(m: u64, market_size: u64) -> f64 {
    m as f64 / market_size as f64
}

/// Prices for entry indices `0..=N`.
fn price_path(market_size: u64, schedule: &PriceSchedule) -> Result<Vec<f64>, MarketError> {
    (0..=market_size)
        .map(|m| {
            let s = if market_size == 0 { 0.0 } else { saturation(m, market_size) };
            schedule.price_at(s).map(Money::as_f64)
        })
        .collect()
}

fn revenue_from(n: u64, market_size: u64, scheme: &RemunerationScheme, prices: &[f64]) -> f64 {
    // the originator is paid its residual share, never level rewards
    if n == 0 || n >= market_size {
        return 0.0;
    }
    let alphas: Vec<f64> = scheme.level_shares.iter().map(|s| s.as_f64()).collect();
    AncestorSweep::new(n, alphas.len())
        .zip(n + 1..=market_size)
        .map(|(probs, m)| {
            let weighted = probs.iter().zip(&alphas).fold(0.0, |acc, (a, alpha)| acc + a * alpha);
            weighted * prices[m as usize]
        })
        .sum()
}

/// Expected level-reward income (in cents) of the node entering at index `n`.
pub fn expected_revenue(
    n: u64,
    market_size: u64,
    scheme: &RemunerationScheme,
    schedule: &PriceSchedule,
) -> Result<f64, MarketError> {
    check_market(n, market_size, scheme, schedule)?;
    let prices = price_path(market_size, schedule)?;
    Ok(revenue_from(n, market_size, scheme, &prices))
}

/// Price paid at entry minus expected resale revenue. Negative when early
/// entrants expect to earn more than they pay.
pub fn effective_price(
    n: u64,
    market_size: u64,
    scheme: &RemunerationScheme,
    schedule: &PriceSchedule,
) -> Result<f64, MarketError> {
    check_market(n, market_size, scheme, schedule)?;
    let prices = price_path(market_size, schedule)?;
    Ok(prices[n as usize] - revenue_from(n, market_size, scheme, &prices))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub entry_index: u64,
    pub saturation: f64,
    pub price: Money,
    pub expected_revenue: f64,
    pub effective_price: f64,
}

/// One row per entrant `n = 1..=N`.
pub fn curve(
    market_size: u64,
    scheme: &RemunerationScheme,
    schedule: &PriceSchedule,
) -> Result<Vec<CurveRow>, MarketError> {
    if market_size < 1 {
        return Err(MarketError::InvalidIndices("market size must be at least 1".into()));
    }
    check_market(0, market_size, scheme, schedule)?;
    let prices = price_path(market_size, schedule)?;
    Ok((1..=market_size)
        .map(|n| {
            let revenue = revenue_from(n, market_size, scheme, &prices);
            let price = prices[n as usize];
            CurveRow {
                entry_index: n,
                saturation: saturation(n, market_size),
                price: Money(price as i64),
                expected_revenue: revenue,
                effective_price: price - revenue,
            }
        })
        .collect())
}

/// `saturation,price_cents,expected_revenue,effective_price`, reals to 6 places.
pub fn write_curve_csv<W: io::Write>(rows: &[CurveRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["saturation", "price_cents", "expected_revenue", "effective_price"])?;
    for r in rows {
        w.write_record([
            format!("{:.6}", r.saturation),
            r.price.as_cents().to_string(),
            format!("{:.6}", r.expected_revenue),
            format!("{:.6}", r.effective_price),
        ])?;
    }
    w.flush()?;
    Ok(())
}
