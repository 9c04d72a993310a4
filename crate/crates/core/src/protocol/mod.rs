//! Distribution protocols.
//!
//! - centralised: an [`AccountingService`] sells every copy and tracks resale
//!   chains through transaction numbers;
//! - decentralised: [`CompliantDevice`]s pass on [`SignedContainer`]s whose
//!   licence chain grows with every resale, and buyers' [`Receipt`]s are
//!   redeemed at a [`RewardingService`].

mod accounting;
mod container;
mod crypto;
mod device;
mod receipt;

use thiserror::Error;

use crate::licences::{LicenceError, Rule};
use crate::market::MarketError;

pub use accounting::{read_tan_csv, write_tan_csv, AccountingService, Listing, Tan, TanRecord};
pub use container::{package, signing_bytes, verify, FormatError, LicenceEntry, Report, SignedContainer, MAGIC};
pub use crypto::{CryptoSuite, Ed25519Suite, HashSuite, KeyPair, PublicKey, SecretKey, Signature};
pub use device::{resell, CompliantDevice, Holding};
pub use receipt::{issue_receipt, write_receipts_csv, Receipt, RewardingService};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("licences do not match the content")]
    AssociationError,
    #[error("redistribution denied by {0}")]
    RedistributionDenied(Rule),
    #[error("no resales left")]
    ResaleLimitExhausted,
    #[error("device does not own this container")]
    NotOwner,
    #[error("container failed verification: {0}")]
    InvalidContainer(Report),
    #[error("transaction {0} already redeemed")]
    AlreadyRedeemed(String),
    #[error("invalid receipt: {0}")]
    InvalidReceipt(String),
    #[error("content {0} is not in the catalog")]
    NotInCatalog(String),
    #[error("unknown TAN {0}")]
    UnknownTan(Tan),
    #[error("invalid listing: {0}")]
    InvalidListing(String),
    #[error("registry does not replay: {0}")]
    RegistryMismatch(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Licence(#[from] LicenceError),
    #[error(transparent)]
    Market(#[from] MarketError),
}
