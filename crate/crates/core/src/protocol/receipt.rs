//! Buyer-signed purchase receipts and the central rewarding service that
//! turns them into remuneration.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io;

use serde_json::json;

use super::container::{verify, SignedContainer};
use super::crypto::{CryptoSuite, PublicKey, Signature};
use super::device::CompliantDevice;
use super::ProtocolError;
use crate::licences::{canonical_bytes, Digest};
use crate::market::{allocate, RemunerationScheme};
use crate::money::Money;
use crate::overlay::{NodeId, RonEntry, RonLedger};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub buyer: PublicKey,
    pub seller: PublicKey,
    pub content_digest: Digest,
    pub transaction_id: String,
    /// List price of the sale.
    pub amount: Money,
    pub signature: Signature,
}

impl Receipt {
    pub fn signing_bytes(&self) -> Vec<u8> {
        canonical_bytes(&json!({
            "amount_cents": self.amount.as_cents(),
            "buyer": self.buyer.to_hex(),
            "content_digest": self.content_digest.to_hex(),
            "seller": self.seller.to_hex(),
            "transaction_id": self.transaction_id,
        }))
    }
}

/// Signed by the buyer's device for a container it holds.
pub fn issue_receipt(
    buyer: &CompliantDevice,
    container: &SignedContainer,
    amount: Money,
    transaction_id: impl Into<String>,
    suite: &dyn CryptoSuite,
) -> Result<Receipt, ProtocolError> {
    if !buyer.owns(container) {
        return Err(ProtocolError::NotOwner);
    }
    if amount.is_negative() {
        return Err(ProtocolError::InvalidReceipt("negative amount".into()));
    }
    let mut receipt = Receipt {
        buyer: buyer.public_key().clone(),
        seller: container.last().seller.clone(),
        content_digest: container.association.digest,
        transaction_id: transaction_id.into(),
        amount,
        signature: Signature(Vec::new()),
    };
    receipt.signature = suite.sign(&buyer.keys.secret, &receipt.signing_bytes());
    Ok(receipt)
}

/// `buyer,seller,content_digest,transaction_id,amount_cents,signature`, keys
/// and signatures in hex.
pub fn write_receipts_csv<W: io::Write>(receipts: &[Receipt], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["buyer", "seller", "content_digest", "transaction_id", "amount_cents", "signature"])?;
    for r in receipts {
        w.write_record([
            r.buyer.to_hex(),
            r.seller.to_hex(),
            r.content_digest.to_hex(),
            r.transaction_id.clone(),
            r.amount.as_cents().to_string(),
            r.signature.to_hex(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Redeems receipts for one content, paying out along the container chain.
///
/// Parties are numbered by first appearance walking each chain from the
/// root, so the originator is node 0. Transaction indices are buyer ids.
#[derive(Debug, Clone)]
pub struct RewardingService {
    scheme: RemunerationScheme,
    trust_roots: BTreeSet<PublicKey>,
    nodes: BTreeMap<PublicKey, NodeId>,
    redeemed: HashSet<String>,
    ledger: RonLedger,
}

impl RewardingService {
    pub fn new(scheme: RemunerationScheme, trust_roots: BTreeSet<PublicKey>) -> Self {
        Self {
            scheme,
            trust_roots,
            nodes: BTreeMap::new(),
            redeemed: HashSet::new(),
            ledger: RonLedger::new(),
        }
    }

    pub fn ledger(&self) -> &RonLedger {
        &self.ledger
    }

    pub fn node_of(&self, key: &PublicKey) -> Option<NodeId> {
        self.nodes.get(key).copied()
    }

    fn node(&mut self, key: &PublicKey) -> NodeId {
        let next = NodeId(self.nodes.len() as u64);
        *self.nodes.entry(key.clone()).or_insert(next)
    }

    pub fn redeem(
        &mut self,
        receipt: &Receipt,
        container: &SignedContainer,
        suite: &dyn CryptoSuite,
    ) -> Result<Vec<RonEntry>, ProtocolError> {
        if !suite.verify(&receipt.buyer, &receipt.signing_bytes(), &receipt.signature) {
            return Err(ProtocolError::InvalidReceipt("signature does not verify".into()));
        }
        if receipt.content_digest != container.association.digest {
            return Err(ProtocolError::InvalidReceipt("receipt is for different content".into()));
        }
        let report = verify(container, &self.trust_roots, suite);
        if !report.is_valid() {
            return Err(ProtocolError::InvalidContainer(report));
        }
        if container.chain.len() < 2 || container.holder() != &receipt.buyer || container.last().seller != receipt.seller
        {
            return Err(ProtocolError::InvalidReceipt("receipt does not match the container's last sale".into()));
        }
        if self.redeemed.contains(&receipt.transaction_id) {
            return Err(ProtocolError::AlreadyRedeemed(receipt.transaction_id.clone()));
        }

        let originator = container.originator().clone();
        // entry 0 is the self-issue; entry i > 0 sells to entry i's buyer
        for e in &container.chain {
            self.node(&e.buyer);
        }
        let buyer = self.node(&receipt.buyer);
        let ancestors: Vec<NodeId> = container.chain[1..]
            .iter()
            .rev()
            .map(|e| &e.seller)
            .filter(|k| **k != originator)
            .take(self.scheme.levels())
            .map(|k| self.nodes[k])
            .collect();
        let alloc = allocate(receipt.amount, &self.scheme, ancestors.len(), receipt.seller != originator)?;
        let entries = alloc.to_ron_entries(buyer, &ancestors, buyer.0);
        self.redeemed.insert(receipt.transaction_id.clone());
        for e in &entries {
            self.ledger.push(e.clone());
        }
        Ok(entries)
    }
}
