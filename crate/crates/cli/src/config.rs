//! Experiment configuration file (TOML).
//!
//! ```toml
//! version = 1
//!
//! [market]
//! market_size = 200
//! level_shares_bp = [1000, 300, 100]   # basis points
//! platform_share_bp = 1400
//! collector_share_bp = 1400
//! peer_rebate_bp = 200
//!
//! [schedule]
//! kind = "constant"                    # or "piecewise_linear", "table"
//! price = 100                          # cents
//!
//! [simulation]                         # optional
//! seed = 42
//! runs = 1000
//! adoption_buckets = 10
//!
//! [free_rider]                         # optional
//! free_quality = 0.8
//! risk_cost = 30.0                     # cents
//! valuation_low = 0.0
//! valuation_high = 2.0
//! price_unit = 100.0                   # cents per valuation unit
//! ```
//!
//! Unknown keys and unknown versions are rejected.

use std::path::Path;

use serde::Deserialize;
use superdist::market::{PriceSchedule, RemunerationScheme};
use superdist::sim::{FreeRiderConfig, SimConfig};
use superdist::Share;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub market: MarketSection,
    pub schedule: PriceSchedule,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub free_rider: Option<FreeRiderConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub market_size: u64,
    pub level_shares_bp: Vec<u32>,
    pub platform_share_bp: u32,
    pub collector_share_bp: u32,
    pub peer_rebate_bp: u32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub runs: u32,
    #[serde(default = "ten")]
    pub adoption_buckets: usize,
}

fn one() -> u32 {
    1
}

fn ten() -> usize {
    10
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: one(),
            adoption_buckets: ten(),
        }
    }
}

impl MarketSection {
    pub fn scheme(&self) -> RemunerationScheme {
        RemunerationScheme {
            level_shares: self.level_shares_bp.iter().copied().map(Share).collect(),
            platform_share: Share(self.platform_share_bp),
            collector_share: Share(self.collector_share_bp),
            peer_rebate: Share(self.peer_rebate_bp),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                cfg.version
            )));
        }
        cfg.sim_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            market_size: self.market.market_size,
            scheme: self.market.scheme(),
            schedule: self.schedule.clone(),
            seed: self.simulation.seed,
            free_rider: self.free_rider.clone(),
            runs: self.simulation.runs,
            adoption_buckets: self.simulation.adoption_buckets,
        }
    }
}
