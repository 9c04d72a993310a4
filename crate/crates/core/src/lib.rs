//! Superdistribution of digital goods.
//!
//! - [`overlay`]: the content distribution tree and the remuneration ledger
//! - [`licences`]: the digital good, its licences and the rule engine
//! - [`market`]: remuneration schemes, price schedules, expected revenues
//! - [`sim`]: the agent-entry market simulator
//! - [`protocol`]: centralised (TAN) and decentralised (signed container) distribution

pub mod licences;
pub mod market;
pub mod money;
pub mod overlay;
pub mod protocol;
pub mod sim;

pub use money::{Money, Share};
