//! Centralised accounting service issuing transaction numbers (TANs).
//!
//! Every purchase is paid to the service, which answers with a TAN. A buyer
//! who resells passes its TAN on; the next buyer cites it, which lets the
//! service walk the chain of TANs upward and reward earlier buyers.
//! Buyers of one content are numbered by purchase order (originator = 0),
//! the same numbering the simulator uses, so both produce identical ledgers
//! for the same purchase sequence.

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use sha2::{Digest as _, Sha256};

use super::ProtocolError;
use crate::licences::ContentAssociation;
use crate::market::{allocate, PriceSchedule, RemunerationScheme};
use crate::overlay::{NodeId, RonLedger};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tan(pub String);

impl fmt::Display for Tan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Listing {
    pub association: ContentAssociation,
    pub scheme: RemunerationScheme,
    pub schedule: PriceSchedule,
    /// Market size used to turn purchase order into saturation.
    pub market_size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TanRecord {
    pub tan: Tan,
    pub content_id: String,
    pub buyer: String,
    pub seller_tan: Option<Tan>,
    pub entry_index: u64,
}

#[derive(Debug, Clone)]
pub struct AccountingService {
    key: [u8; 32],
    catalog: BTreeMap<String, Listing>,
    tans: BTreeMap<Tan, TanRecord>,
    purchases: BTreeMap<String, u64>,
    ledgers: BTreeMap<String, RonLedger>,
}

impl AccountingService {
    /// `key` seeds TAN generation; TANs are unpredictable without it.
    pub fn new(key: [u8; 32]) -> Self {
        Self {
            key,
            catalog: BTreeMap::new(),
            tans: BTreeMap::new(),
            purchases: BTreeMap::new(),
            ledgers: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, listing: Listing) -> Result<(), ProtocolError> {
        listing.scheme.validate()?;
        listing.schedule.validate()?;
        if listing.market_size == 0 {
            return Err(ProtocolError::InvalidListing("market size must be positive".into()));
        }
        let id = listing.association.content_id.clone();
        if self.catalog.contains_key(&id) {
            return Err(ProtocolError::InvalidListing(format!("{id} already registered")));
        }
        self.catalog.insert(id.clone(), listing);
        self.ledgers.insert(id, RonLedger::new());
        Ok(())
    }

    pub fn ledger(&self, content_id: &str) -> Option<&RonLedger> {
        self.ledgers.get(content_id)
    }

    pub fn record(&self, tan: &Tan) -> Option<&TanRecord> {
        self.tans.get(tan)
    }

    /// All TAN records of one content, in purchase order.
    pub fn records(&self, content_id: &str) -> Vec<&TanRecord> {
        let mut out: Vec<_> = self.tans.values().filter(|r| r.content_id == content_id).collect();
        out.sort_by_key(|r| r.entry_index);
        out
    }

    fn make_tan(&self, content_id: &str, entry_index: u64) -> Tan {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((content_id.len() as u64).to_be_bytes());
        h.update(content_id.as_bytes());
        h.update(entry_index.to_be_bytes());
        Tan(hex::encode_upper(&h.finalize()[..10]))
    }

    /// Records a purchase of `content_id` by `buyer`, optionally from the
    /// reseller holding `seller_tan`, and returns the buyer's TAN.
    pub fn as_purchase(
        &mut self,
        content_id: &str,
        buyer: &str,
        seller_tan: Option<&Tan>,
    ) -> Result<Tan, ProtocolError> {
        let listing = self
            .catalog
            .get(content_id)
            .ok_or_else(|| ProtocolError::NotInCatalog(content_id.to_owned()))?;
        let mut ancestors = Vec::new();
        if let Some(t) = seller_tan {
            let mut cur = self.tans.get(t).filter(|r| r.content_id == content_id);
            if cur.is_none() {
                return Err(ProtocolError::UnknownTan(t.clone()));
            }
            while let Some(rec) = cur {
                if ancestors.len() == listing.scheme.levels() {
                    break;
                }
                ancestors.push(NodeId(rec.entry_index));
                cur = rec.seller_tan.as_ref().and_then(|t| self.tans.get(t));
            }
        }

        let entry_index = self.purchases.get(content_id).copied().unwrap_or(0) + 1;
        let s = (entry_index as f64 / listing.market_size as f64).min(1.0);
        let price = listing.schedule.price_at(s)?;
        let alloc = allocate(price, &listing.scheme, ancestors.len(), seller_tan.is_some())?;
        let entries = alloc.to_ron_entries(NodeId(entry_index), &ancestors, entry_index);

        let tan = self.make_tan(content_id, entry_index);
        self.tans.insert(
            tan.clone(),
            TanRecord {
                tan: tan.clone(),
                content_id: content_id.to_owned(),
                buyer: buyer.to_owned(),
                seller_tan: seller_tan.cloned(),
                entry_index,
            },
        );
        self.purchases.insert(content_id.to_owned(), entry_index);
        let ledger = self.ledgers.get_mut(content_id).expect("ledger created on register");
        for e in entries {
            ledger.push(e);
        }
        Ok(tan)
    }

    /// Rebuilds a service from an exported registry by replaying every
    /// purchase in order, failing if any replayed TAN differs from the record.
    pub fn replay(key: [u8; 32], listing: Listing, records: &[TanRecord]) -> Result<Self, ProtocolError> {
        let content_id = listing.association.content_id.clone();
        let mut service = Self::new(key);
        service.register(listing)?;
        let mut ordered: Vec<&TanRecord> = records.iter().collect();
        ordered.sort_by_key(|r| r.entry_index);
        for (i, rec) in ordered.iter().enumerate() {
            if rec.content_id != content_id || rec.entry_index != i as u64 + 1 {
                return Err(ProtocolError::RegistryMismatch(format!("record {} out of sequence", rec.tan)));
            }
            let tan = service.as_purchase(&content_id, &rec.buyer, rec.seller_tan.as_ref())?;
            if tan != rec.tan {
                return Err(ProtocolError::RegistryMismatch(format!("expected {}, replay issued {tan}", rec.tan)));
            }
        }
        Ok(service)
    }
}

/// `tan,content_id,buyer,seller_tan,entry_index`; an empty seller_tan marks a
/// purchase from the central service.
pub fn write_tan_csv<W: io::Write>(records: &[&TanRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tan", "content_id", "buyer", "seller_tan", "entry_index"])?;
    for r in records {
        w.write_record([
            r.tan.0.as_str(),
            &r.content_id,
            &r.buyer,
            r.seller_tan.as_ref().map_or("", |t| t.0.as_str()),
            &r.entry_index.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tan_csv<R: io::Read>(input: R) -> Result<Vec<TanRecord>, ProtocolError> {
    let mut r = csv::Reader::from_reader(input);
    let bad = |m: String| ProtocolError::RegistryMismatch(m);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", rec.len())));
        }
        out.push(TanRecord {
            tan: Tan(rec[0].to_owned()),
            content_id: rec[1].to_owned(),
            buyer: rec[2].to_owned(),
            seller_tan: (!rec[3].is_empty()).then(|| Tan(rec[3].to_owned())),
            entry_index: rec[4].parse().map_err(|_| bad(format!("entry index {:?}", &rec[4])))?,
        });
    }
    Ok(out)
}
