//! Remuneration schemes and the exact split of a single sale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MarketError;
use crate::money::{Money, Share};
use crate::overlay::{NodeId, Party, RewardReason, RonEntry};

/// How the price of each sale is shared out.
///
/// Level `k` (1-based) of `level_shares` goes to the buyer's k-th trader
/// ancestor. The originator receives whatever is left.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemunerationScheme {
    pub level_shares: Vec<Share>,
    pub platform_share: Share,
    pub collector_share: Share,
    /// Discount for buying from a peer, taken out of the platform's share.
    pub peer_rebate: Share,
}

impl RemunerationScheme {
    /// Three reward levels of 10, 3 and 1 %, 14 % platform, 14 % collector,
    /// 2 % peer rebate; 58 % residual to the originator.
    pub fn potato() -> Self {
        Self {
            level_shares: vec![Share::percent(10), Share::percent(3), Share::percent(1)],
            platform_share: Share::percent(14),
            collector_share: Share::percent(14),
            peer_rebate: Share::percent(2),
        }
    }

    /// Same fees as `self` with every level reward set to zero.
    pub fn without_level_rewards(&self) -> Self {
        Self {
            level_shares: vec![Share::ZERO; self.level_shares.len()],
            ..self.clone()
        }
    }

    pub fn levels(&self) -> usize {
        self.level_shares.len()
    }

    pub fn total_level_share(&self) -> Share {
        self.level_shares.iter().copied().sum()
    }

    /// The originator's nominal share when every level is assigned.
    pub fn originator_share(&self) -> Share {
        Share(Share::WHOLE.0.saturating_sub(self.committed().0))
    }

    fn committed(&self) -> Share {
        self.total_level_share() + self.platform_share + self.collector_share
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if self.committed() > Share::WHOLE {
            return Err(MarketError::InvalidScheme(format!(
                "level, platform and collector shares sum to {}",
                self.committed()
            )));
        }
        if self.peer_rebate > self.platform_share {
            return Err(MarketError::InvalidScheme(format!(
                "peer rebate {} exceeds platform share {}",
                self.peer_rebate, self.platform_share
            )));
        }
        Ok(())
    }
}

impl Default for RemunerationScheme {
    fn default() -> Self {
        Self::potato()
    }
}

/// Recipient role of a payout. Ordered the way ledgers list them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Payee {
    Level(u32),
    Platform,
    Collector,
    Originator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub buyer_outlay: Money,
    /// Rebate granted to the buyer (already deducted from the platform payout).
    pub rebate: Money,
    pub payouts: BTreeMap<Payee, Money>,
}

impl Allocation {
    pub fn payout(&self, payee: Payee) -> Money {
        self.payouts.get(&payee).copied().unwrap_or(Money::ZERO)
    }

    pub fn total_paid_out(&self) -> Money {
        self.payouts.values().sum()
    }

    /// Ledger entries for this sale. `ancestors` lists the buyer's trader
    /// ancestors nearest first; it must cover every level in the payouts.
    pub fn to_ron_entries(&self, buyer: NodeId, ancestors: &[NodeId], transaction_index: u64) -> Vec<RonEntry> {
        self.payouts
            .iter()
            .filter(|(_, amount)| **amount > Money::ZERO)
            .map(|(&payee, &amount)| {
                let (to, reason) = match payee {
                    Payee::Level(k) => (
                        Party::Node(ancestors[k as usize - 1]),
                        RewardReason::LevelReward(k),
                    ),
                    Payee::Platform => (Party::Platform, RewardReason::PlatformFee),
                    Payee::Collector => (Party::Collector, RewardReason::CollectorFee),
                    Payee::Originator => (Party::OriginatorAccount, RewardReason::OriginatorShare),
                };
                RonEntry {
                    payer: Party::Node(buyer),
                    payee: to,
                    amount,
                    reason,
                    transaction_index,
                }
            })
            .collect()
    }
}

/// Splits one sale at `price`.
///
/// Levels beyond `available_ancestors` are unassigned and fold into the
/// originator residual, which also absorbs all rounding slack.
pub fn allocate(
    price: Money,
    scheme: &RemunerationScheme,
    available_ancestors: usize,
    bought_from_peer: bool,
) -> Result<Allocation, MarketError> {
    if price.is_negative() {
        return Err(MarketError::InvalidPrice(price));
    }
    scheme.validate()?;

    let rebate = if bought_from_peer {
        scheme.peer_rebate.of(price)
    } else {
        Money::ZERO
    };
    let buyer_outlay = price - rebate;

    let mut payouts = BTreeMap::new();
    for (k, share) in scheme.level_shares.iter().take(available_ancestors).enumerate() {
        payouts.insert(Payee::Level(k as u32 + 1), share.of(price));
    }
    payouts.insert(Payee::Platform, scheme.platform_share.of(price) - rebate);
    payouts.insert(Payee::Collector, scheme.collector_share.of(price));

    let assigned: Money = payouts.values().sum();
    let residual = buyer_outlay - assigned;
    if residual.is_negative() {
        return Err(MarketError::RoundingOverflow { price, residual });
    }
    payouts.insert(Payee::Originator, residual);

    Ok(Allocation {
        buyer_outlay,
        rebate,
        payouts,
    })
}
