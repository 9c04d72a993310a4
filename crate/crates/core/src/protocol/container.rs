//! Chained, signed licence containers.
//!
//! Entry 0 is the originator's self-signed issue; every resale appends an
//! entry signed by the seller. Each signature covers the content digest, the
//! digests of all prior entries and the entry's own fields, so tampering
//! anywhere invalidates everything after it.
//!
//! # Binary framing
//!
//! All integers are big-endian `u32`; `field` is a `u32` length followed by
//! that many bytes.
//!
//! ```text
//! container := "SDC1" field(content) field(association) u32(entry_count) field(entry)*
//! entry     := field(seller_key) field(buyer_key)
//!              field(consumption_licence) field(redistribution_licence)
//!              u32(resales_remaining) field(signature)
//! ```
//!
//! The association and the licences are stored in their canonical text form;
//! non-canonical encodings and trailing bytes are rejected.
//!
//! Verification checks structure only: digests, signatures, buyer/seller
//! linkage, the resale counter and that licences are passed on unchanged.
//! Time and location rules of earlier resales cannot be re-checked from the
//! chain.

use std::collections::BTreeSet;
use std::fmt;

use serde_json::json;
use thiserror::Error;

use super::crypto::{CryptoSuite, KeyPair, PublicKey, Signature};
use super::ProtocolError;
use crate::licences::{
    canonical_bytes, from_canonical_bytes, verify_association, ConsumptionLicence, ContentAssociation, Digest,
    DigitalGood, RedistributionLicence,
};

pub const MAGIC: &[u8; 4] = b"SDC1";

#[derive(Debug, Clone, PartialEq)]
pub struct LicenceEntry {
    pub seller: PublicKey,
    pub buyer: PublicKey,
    pub consumption_licence: ConsumptionLicence,
    pub redistribution_licence: RedistributionLicence,
    pub resales_remaining: u32,
    pub signature: Signature,
}

impl LicenceEntry {
    /// Digest of the framed entry, signature included.
    pub fn digest(&self) -> Digest {
        let mut buf = Vec::new();
        encode_entry(self, &mut buf);
        Digest::of(&buf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedContainer {
    pub content: Vec<u8>,
    pub association: ContentAssociation,
    pub chain: Vec<LicenceEntry>,
}

impl SignedContainer {
    pub fn content_id(&self) -> &str {
        &self.association.content_id
    }

    pub fn last(&self) -> &LicenceEntry {
        self.chain.last().expect("containers are issued with one entry")
    }

    /// Current holder of the container.
    pub fn holder(&self) -> &PublicKey {
        &self.last().buyer
    }

    pub fn originator(&self) -> &PublicKey {
        &self.chain[0].seller
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.content.len() + 512 * self.chain.len());
        out.extend_from_slice(MAGIC);
        put_field(&mut out, &self.content);
        put_field(&mut out, &canonical_bytes(&self.association));
        put_u32(&mut out, self.chain.len() as u32);
        for e in &self.chain {
            let mut buf = Vec::new();
            encode_entry(e, &mut buf);
            put_field(&mut out, &buf);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let content = r.field()?.to_vec();
        let association = from_canonical_bytes(r.field()?).ok_or(FormatError::NonCanonical("association"))?;
        let count = r.u32()? as usize;
        // every entry needs at least its length prefix
        if count > r.remaining() / 4 {
            return Err(FormatError::Truncated);
        }
        let mut chain = Vec::with_capacity(count);
        for _ in 0..count {
            let mut er = Reader { buf: r.field()?, pos: 0 };
            chain.push(decode_entry(&mut er)?);
            er.finish()?;
        }
        r.finish()?;
        Ok(SignedContainer {
            content,
            association,
            chain,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("not a signed container (bad magic)")]
    BadMagic,
    #[error("truncated container")]
    Truncated,
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("{0} is not in canonical form")]
    NonCanonical(&'static str),
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_field(out: &mut Vec<u8>, bytes: &[u8]) {
    put_u32(out, bytes.len() as u32);
    out.extend_from_slice(bytes);
}

fn encode_entry(e: &LicenceEntry, out: &mut Vec<u8>) {
    put_field(out, &e.seller.0);
    put_field(out, &e.buyer.0);
    put_field(out, &canonical_bytes(&e.consumption_licence));
    put_field(out, &canonical_bytes(&e.redistribution_licence));
    put_u32(out, e.resales_remaining);
    put_field(out, &e.signature.0);
}

fn decode_entry(r: &mut Reader<'_>) -> Result<LicenceEntry, FormatError> {
    Ok(LicenceEntry {
        seller: PublicKey(r.field()?.to_vec()),
        buyer: PublicKey(r.field()?.to_vec()),
        consumption_licence: from_canonical_bytes(r.field()?).ok_or(FormatError::NonCanonical("consumption licence"))?,
        redistribution_licence: from_canonical_bytes(r.field()?)
            .ok_or(FormatError::NonCanonical("redistribution licence"))?,
        resales_remaining: r.u32()?,
        signature: Signature(r.field()?.to_vec()),
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if n > self.remaining() {
            return Err(FormatError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn field(&mut self) -> Result<&'a [u8], FormatError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn finish(&self) -> Result<(), FormatError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

/// Bytes the seller signs for an entry.
pub fn signing_bytes(
    content_digest: &Digest,
    prior: &[LicenceEntry],
    seller: &PublicKey,
    buyer: &PublicKey,
    consumption: &ConsumptionLicence,
    redistribution: &RedistributionLicence,
    resales_remaining: u32,
) -> Vec<u8> {
    let prior: Vec<String> = prior.iter().map(|e| e.digest().to_hex()).collect();
    canonical_bytes(&json!({
        "buyer": buyer.to_hex(),
        "consumption_licence": consumption,
        "content_digest": content_digest.to_hex(),
        "prior_entries": prior,
        "redistribution_licence": redistribution,
        "resales_remaining": resales_remaining,
        "seller": seller.to_hex(),
    }))
}

/// Appends an entry signed by `seller` to `chain`.
pub(crate) fn sign_entry(
    suite: &dyn CryptoSuite,
    content_digest: &Digest,
    chain: &[LicenceEntry],
    seller: &KeyPair,
    buyer: &PublicKey,
    (consumption, redistribution): (ConsumptionLicence, RedistributionLicence),
    resales_remaining: u32,
) -> LicenceEntry {
    let msg = signing_bytes(
        content_digest,
        chain,
        &seller.public,
        buyer,
        &consumption,
        &redistribution,
        resales_remaining,
    );
    LicenceEntry {
        seller: seller.public.clone(),
        buyer: buyer.clone(),
        consumption_licence: consumption,
        redistribution_licence: redistribution,
        resales_remaining,
        signature: suite.sign(&seller.secret, &msg),
    }
}

/// Issues a container holding `content` with the originator's self-signed entry.
pub fn package(
    content: &[u8],
    good: &DigitalGood,
    originator: &KeyPair,
    initial_resales: u32,
    suite: &dyn CryptoSuite,
) -> Result<SignedContainer, ProtocolError> {
    if !verify_association(good) || !good.association().matches(content) || good.content != content {
        return Err(ProtocolError::AssociationError);
    }
    let association = good.association().clone();
    let entry = sign_entry(
        suite,
        &association.digest,
        &[],
        originator,
        &originator.public,
        (good.consumption_licence.clone(), good.redistribution_licence.clone()),
        initial_resales,
    );
    Ok(SignedContainer {
        content: content.to_vec(),
        association,
        chain: vec![entry],
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Report {
    Valid,
    ContentMismatch,
    ChainBroken(usize),
    BadSignature(usize),
    UntrustedOrigin,
}

impl Report {
    pub fn is_valid(&self) -> bool {
        matches!(self, Report::Valid)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Report::Valid => f.write_str("Valid"),
            Report::ContentMismatch => f.write_str("ContentMismatch"),
            Report::ChainBroken(i) => write!(f, "ChainBroken({i})"),
            Report::BadSignature(i) => write!(f, "BadSignature({i})"),
            Report::UntrustedOrigin => f.write_str("UntrustedOrigin"),
        }
    }
}

pub fn verify(container: &SignedContainer, trust_roots: &BTreeSet<PublicKey>, suite: &dyn CryptoSuite) -> Report {
    let assoc = &container.association;
    if suite.digest(&container.content) != assoc.digest {
        return Report::ContentMismatch;
    }
    if container
        .chain
        .iter()
        .any(|e| &e.consumption_licence.association != assoc || &e.redistribution_licence.association != assoc)
    {
        return Report::ContentMismatch;
    }
    let Some(first) = container.chain.first() else {
        return Report::ChainBroken(0);
    };
    if !trust_roots.contains(&first.seller) {
        return Report::UntrustedOrigin;
    }
    if first.buyer != first.seller {
        return Report::ChainBroken(0);
    }
    for (i, e) in container.chain.iter().enumerate() {
        if i > 0 {
            let prev = &container.chain[i - 1];
            let linked = e.seller == prev.buyer
                && prev.resales_remaining.checked_sub(1) == Some(e.resales_remaining)
                && e.consumption_licence == first.consumption_licence
                && e.redistribution_licence == first.redistribution_licence;
            if !linked {
                return Report::ChainBroken(i);
            }
        }
        let msg = signing_bytes(
            &assoc.digest,
            &container.chain[..i],
            &e.seller,
            &e.buyer,
            &e.consumption_licence,
            &e.redistribution_licence,
            e.resales_remaining,
        );
        if !suite.verify(&e.seller, &msg, &e.signature) {
            return Report::BadSignature(i);
        }
    }
    Report::Valid
}
