//! Agent-entry market simulator.
//!
//! Agents `n = 1..=N` enter one after another. Each buys the good from a
//! seller drawn uniformly among current legitimate owners (originator
//! included) at `price(n/N)`; the sale grows the CDO by one edge and appends
//! the allocation of its price to the RON ledger.
//!
//! With a free-rider configuration, each entrant first compares a legitimate
//! purchase against an unremunerated copy. That choice model is this crate's
//! own construction and is not normative:
//!
//! ```text
//! u_legit = v - e(n) / unit
//! u_free  = v · q_free - risk / unit
//! ```
//!
//! where `v ~ U[low, high]` is the entrant's valuation, `e(n)` the analytic
//! effective price (which optimistically assumes every later entrant buys
//! legitimately) and `unit` the number of cents per valuation unit. Ties go
//! to the legitimate good. Free riders never enter the CDO and move no money.

use std::collections::BTreeMap;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{self, allocate, MarketError, PriceSchedule, RemunerationScheme};
use crate::money::Money;
use crate::overlay::{CdoGraph, NodeId, OverlayError, Party, RewardReason, RonLedger};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("unsupported config: {0}")]
    UnsupportedConfig(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeRiderConfig {
    /// Quality of the free copy relative to the original, in [0, 1].
    pub free_quality: f64,
    /// Expected cost of using the free copy, in cents.
    pub risk_cost: f64,
    pub valuation_low: f64,
    pub valuation_high: f64,
    /// Cents per valuation unit.
    #[serde(default = "default_price_unit")]
    pub price_unit: f64,
}

fn default_price_unit() -> f64 {
    100.0
}

impl FreeRiderConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.free_quality) {
            return bad(format!("free_quality {}", self.free_quality));
        }
        if !(self.risk_cost.is_finite() && self.risk_cost >= 0.0) {
            return bad(format!("risk_cost {}", self.risk_cost));
        }
        if !(self.valuation_low.is_finite() && self.valuation_high.is_finite())
            || self.valuation_low > self.valuation_high
        {
            return bad(format!("valuation range [{}, {}]", self.valuation_low, self.valuation_high));
        }
        if !(self.price_unit.is_finite() && self.price_unit > 0.0) {
            return bad(format!("price_unit {}", self.price_unit));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub market_size: u64,
    pub scheme: RemunerationScheme,
    pub schedule: PriceSchedule,
    pub seed: u64,
    pub free_rider: Option<FreeRiderConfig>,
    pub runs: u32,
    pub adoption_buckets: usize,
}

impl SimConfig {
    pub fn new(market_size: u64, scheme: RemunerationScheme, schedule: PriceSchedule, seed: u64) -> Self {
        Self {
            market_size,
            scheme,
            schedule,
            seed,
            free_rider: None,
            runs: 1,
            adoption_buckets: 10,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.scheme.validate()?;
        self.schedule.validate()?;
        if self.runs < 1 {
            return Err(SimError::InvalidConfig("runs must be at least 1".into()));
        }
        if self.adoption_buckets < 1 {
            return Err(SimError::InvalidConfig("need at least one adoption bucket".into()));
        }
        if let Some(fr) = &self.free_rider {
            fr.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Legit,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdoptionBucket {
    pub start_saturation: f64,
    pub entrants: u64,
    pub legit_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub cdo: CdoGraph,
    pub ledger: RonLedger,
    /// Received minus paid, for every CDO node and every external party.
    pub net_cash: BTreeMap<Party, Money>,
    pub legit_adoption: Vec<AdoptionBucket>,
    /// Level-reward income by CDO entry index.
    pub per_index_revenue: Vec<Money>,
}

impl SimResult {
    /// Fraction of all entrants that bought the legitimate good.
    pub fn overall_adoption(&self) -> f64 {
        let total: u64 = self.legit_adoption.iter().map(|b| b.entrants).sum();
        if total == 0 {
            return 1.0;
        }
        let legit: f64 = self
            .legit_adoption
            .iter()
            .map(|b| b.legit_fraction * b.entrants as f64)
            .sum();
        legit / total as f64
    }

    /// `bucket_start_saturation,legit_fraction`
    pub fn write_adoption_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bucket_start_saturation", "legit_fraction"])?;
        for b in &self.legit_adoption {
            w.write_record([format!("{:.6}", b.start_saturation), format!("{:.6}", b.legit_fraction)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Picks the seller for the next legitimate purchase.
pub trait SellerPolicy {
    fn pick(&mut self, cdo: &CdoGraph, rng: &mut ChaCha8Rng) -> Result<NodeId, OverlayError>;
}

/// Uniform among current owners.
#[derive(Debug, Default, Clone, Copy)]
pub struct UniformSeller;

impl SellerPolicy for UniformSeller {
    fn pick(&mut self, cdo: &CdoGraph, rng: &mut ChaCha8Rng) -> Result<NodeId, OverlayError> {
        cdo.uniform_random_seller(rng)
    }
}

/// Always the most recent owner; grows the CDO as a single chain.
#[derive(Debug, Default, Clone, Copy)]
pub struct NewestSeller;

impl SellerPolicy for NewestSeller {
    fn pick(&mut self, cdo: &CdoGraph, _rng: &mut ChaCha8Rng) -> Result<NodeId, OverlayError> {
        cdo.nodes().last().map(|n| n.id).ok_or(OverlayError::EmptyGraph)
    }
}

/// Seed for Monte Carlo run `run`: SplitMix64 finaliser applied to
/// `seed + (run + 1) · 0x9E3779B97F4A7C15` (wrapping).
pub fn mix_seed(seed: u64, run: u64) -> u64 {
    let mut z = seed.wrapping_add(run.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn decide(valuation: f64, effective_price: f64, fr: &FreeRiderConfig) -> Choice {
    let legit = valuation - effective_price / fr.price_unit;
    let free = valuation * fr.free_quality - fr.risk_cost / fr.price_unit;
    if legit >= free {
        Choice::Legit
    } else {
        Choice::Free
    }
}

/// The free-rider choice of an entrant at index `n` with the given valuation.
pub fn choose(
    valuation: f64,
    n: u64,
    market_size: u64,
    scheme: &RemunerationScheme,
    schedule: &PriceSchedule,
    fr: &FreeRiderConfig,
) -> Result<Choice, SimError> {
    fr.validate()?;
    let e = market::effective_price(n, market_size, scheme, schedule)?;
    Ok(decide(valuation, e, fr))
}

pub fn run(config: &SimConfig) -> Result<SimResult, SimError> {
    run_with(config, &mut UniformSeller)
}

pub fn run_with<P: SellerPolicy>(config: &SimConfig, policy: &mut P) -> Result<SimResult, SimError> {
    config.validate()?;
    let effective = effective_prices(config)?;
    run_seeded(config, config.seed, policy, effective.as_deref())
}

/// Effective prices by entry index, when the choice model needs them.
fn effective_prices(config: &SimConfig) -> Result<Option<Vec<f64>>, SimError> {
    if config.free_rider.is_none() || config.market_size == 0 {
        return Ok(None);
    }
    let rows = market::curve(config.market_size, &config.scheme, &config.schedule)?;
    let mut out = vec![0.0; rows.len() + 1];
    for r in rows {
        out[r.entry_index as usize] = r.effective_price;
    }
    Ok(Some(out))
}

fn run_seeded<P: SellerPolicy>(
    config: &SimConfig,
    seed: u64,
    policy: &mut P,
    effective: Option<&[f64]>,
) -> Result<SimResult, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big_n = config.market_size;
    let levels = config.scheme.levels();
    let buckets = config.adoption_buckets;
    let mut cdo = CdoGraph::new();
    let mut ledger = RonLedger::new();
    let mut entrants = vec![0u64; buckets];
    let mut legit = vec![0u64; buckets];

    for n in 1..=big_n {
        let bucket = ((n - 1) as u128 * buckets as u128 / big_n as u128) as usize;
        entrants[bucket] += 1;
        if let (Some(fr), Some(eff)) = (&config.free_rider, effective) {
            let v = if fr.valuation_low < fr.valuation_high {
                rng.random_range(fr.valuation_low..fr.valuation_high)
            } else {
                fr.valuation_low
            };
            if decide(v, eff[n as usize], fr) == Choice::Free {
                continue;
            }
        }
        legit[bucket] += 1;

        let price = config.schedule.price_at(n as f64 / big_n as f64)?;
        let seller = policy.pick(&cdo, &mut rng)?;
        let buyer = cdo.attach(seller, price, 1.0)?;
        let ancestors = cdo.trader_ancestors(buyer, levels)?;
        let alloc = allocate(price, &config.scheme, ancestors.len(), seller != cdo.originator())?;
        for entry in alloc.to_ron_entries(buyer, &ancestors, buyer.0) {
            ledger.push(entry);
        }
    }

    let mut per_index_revenue = vec![Money::ZERO; cdo.len()];
    for e in ledger.entries() {
        if let (RewardReason::LevelReward(_), Party::Node(id)) = (e.reason, e.payee) {
            per_index_revenue[id.0 as usize] += e.amount;
        }
    }

    let mut net_cash: BTreeMap<Party, Money> = cdo.nodes().iter().map(|n| (Party::Node(n.id), Money::ZERO)).collect();
    for (party, amount) in ledger.net_cash() {
        *net_cash.entry(party).or_insert(Money::ZERO) += amount;
    }

    let legit_adoption = (0..buckets)
        .filter(|&b| entrants[b] > 0)
        .map(|b| AdoptionBucket {
            start_saturation: b as f64 / buckets as f64,
            entrants: entrants[b],
            legit_fraction: legit[b] as f64 / entrants[b] as f64,
        })
        .collect();

    Ok(SimResult {
        cdo,
        ledger,
        net_cash,
        legit_adoption,
        per_index_revenue,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueEstimate {
    pub entry_index: u64,
    /// Mean level-reward income in cents.
    pub mean: f64,
    pub std_error: f64,
}

/// Mean and standard error of level-reward income for every entry index
/// `1..=N` over `config.runs` independent runs.
pub fn monte_carlo_revenues(config: &SimConfig) -> Result<Vec<RevenueEstimate>, SimError> {
    config.validate()?;
    if config.free_rider.is_some() {
        return Err(SimError::UnsupportedConfig(
            "Monte Carlo revenue requires free riders to be disabled".into(),
        ));
    }
    if config.runs < 2 {
        return Err(SimError::InvalidConfig("Monte Carlo revenue needs at least 2 runs".into()));
    }
    let size = config.market_size as usize + 1;
    // exact integer moments, so the reduction order cannot change the result
    let (sum, sum_sq) = (0..config.runs)
        .into_par_iter()
        .map(|r| {
            let res = run_seeded(config, mix_seed(config.seed, u64::from(r)), &mut UniformSeller, None)?;
            let sum: Vec<i128> = res.per_index_revenue.iter().map(|m| i128::from(m.as_cents())).collect();
            let sq = sum.iter().map(|x| x * x).collect();
            Ok((sum, sq))
        })
        .try_reduce(
            || (vec![0i128; size], vec![0i128; size]),
            |(mut s1, mut q1), (s2, q2)| {
                s1.iter_mut().zip(s2).for_each(|(a, b)| *a += b);
                q1.iter_mut().zip(q2).for_each(|(a, b)| *a += b);
                Ok::<_, SimError>((s1, q1))
            },
        )?;

    let runs = f64::from(config.runs);
    Ok((1..size)
        .map(|i| {
            let mean = sum[i] as f64 / runs;
            let ss = sum_sq[i] as f64 - (sum[i] as f64) * (sum[i] as f64) / runs;
            let var = (ss / (runs - 1.0)).max(0.0);
            RevenueEstimate {
                entry_index: i as u64,
                mean,
                std_error: (var / runs).sqrt(),
            }
        })
        .collect())
}

/// `(mean, std_error)` of level-reward income of entrant `n`.
pub fn monte_carlo_revenue(config: &SimConfig, n: u64) -> Result<(f64, f64), SimError> {
    if n > config.market_size {
        return Err(MarketError::InvalidIndices(format!("entry {n} beyond market size {}", config.market_size)).into());
    }
    let all = monte_carlo_revenues(config)?;
    Ok(match n {
        0 => (0.0, 0.0),
        _ => {
            let e = all[n as usize - 1];
            (e.mean, e.std_error)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdoptionStudy {
    pub runs: u32,
    /// Mean over runs of each run's overall legitimate-adoption fraction.
    pub mean: f64,
    pub std_error: f64,
    /// Per-bucket legitimate fraction averaged over runs.
    pub buckets: Vec<AdoptionBucket>,
}

/// Legitimate adoption over `config.runs` independent runs.
pub fn adoption_study(config: &SimConfig) -> Result<AdoptionStudy, SimError> {
    config.validate()?;
    let effective = effective_prices(config)?;
    let results: Vec<(f64, Vec<AdoptionBucket>)> = (0..config.runs)
        .into_par_iter()
        .map(|r| {
            let seed = mix_seed(config.seed, u64::from(r));
            let res = run_seeded(config, seed, &mut UniformSeller, effective.as_deref())?;
            Ok((res.overall_adoption(), res.legit_adoption))
        })
        .collect::<Result<_, SimError>>()?;

    let runs = f64::from(config.runs);
    let mean = results.iter().map(|(a, _)| a).sum::<f64>() / runs;
    let var = if config.runs > 1 {
        results.iter().map(|(a, _)| (a - mean).powi(2)).sum::<f64>() / (runs - 1.0)
    } else {
        0.0
    };
    let buckets = match results.first() {
        None => Vec::new(),
        Some((_, first)) => first
            .iter()
            .enumerate()
            .map(|(i, b)| AdoptionBucket {
                start_saturation: b.start_saturation,
                entrants: b.entrants,
                legit_fraction: results.iter().map(|(_, bs)| bs[i].legit_fraction).sum::<f64>() / runs,
            })
            .collect(),
    };
    Ok(AdoptionStudy {
        runs: config.runs,
        mean,
        std_error: (var / runs).sqrt(),
        buckets,
    })
}

/// `entry_index,mean_cents,std_error`
pub fn write_revenue_csv<W: io::Write>(estimates: &[RevenueEstimate], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entry_index", "mean_cents", "std_error"])?;
    for e in estimates {
        w.write_record([e.entry_index.to_string(), format!("{:.6}", e.mean), format!("{:.6}", e.std_error)])?;
    }
    w.flush()?;
    Ok(())
}
