//! Compliant devices: hold containers and enforce licences on resale.

use std::collections::{BTreeMap, BTreeSet};

use super::container::{package, sign_entry, verify, SignedContainer};
use super::crypto::{CryptoSuite, KeyPair, PublicKey};
use super::ProtocolError;
use crate::licences::{evaluate, Decision, DigitalGood, RuleContext};

#[derive(Debug, Clone, PartialEq)]
pub struct Holding {
    pub container: SignedContainer,
    /// Resales this device may still make from its copy.
    pub resales_remaining: u32,
    pub resales_done: u32,
}

/// An honest device: it refuses any operation its licences forbid.
#[derive(Debug, Clone)]
pub struct CompliantDevice {
    pub(crate) keys: KeyPair,
    owned: BTreeMap<String, Holding>,
}

impl CompliantDevice {
    pub fn new(keys: KeyPair) -> Self {
        Self {
            keys,
            owned: BTreeMap::new(),
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keys.public
    }

    pub fn holding(&self, content_id: &str) -> Option<&Holding> {
        self.owned.get(content_id)
    }

    pub fn owns(&self, container: &SignedContainer) -> bool {
        self.owned
            .get(container.content_id())
            .is_some_and(|h| &h.container == container)
    }

    /// Packages `good` as its originator and keeps the issued container.
    pub fn originate(
        &mut self,
        good: &DigitalGood,
        initial_resales: u32,
        suite: &dyn CryptoSuite,
    ) -> Result<SignedContainer, ProtocolError> {
        let container = package(&good.content, good, &self.keys, initial_resales, suite)?;
        self.hold(container.clone());
        Ok(container)
    }

    /// Accepts a container sold to this device after verifying it.
    pub fn acquire(
        &mut self,
        container: SignedContainer,
        trust_roots: &BTreeSet<PublicKey>,
        suite: &dyn CryptoSuite,
    ) -> Result<(), ProtocolError> {
        let report = verify(&container, trust_roots, suite);
        if !report.is_valid() {
            return Err(ProtocolError::InvalidContainer(report));
        }
        if container.holder() != &self.keys.public {
            return Err(ProtocolError::NotOwner);
        }
        self.hold(container);
        Ok(())
    }

    fn hold(&mut self, container: SignedContainer) {
        let resales_remaining = container.last().resales_remaining;
        self.owned.insert(
            container.content_id().to_owned(),
            Holding {
                container,
                resales_remaining,
                resales_done: 0,
            },
        );
    }
}

/// Sells `container` from `seller` to `buyer`, returning the extended
/// container. The input container is left untouched.
pub fn resell(
    container: &SignedContainer,
    seller: &mut CompliantDevice,
    buyer: &PublicKey,
    ctx: &RuleContext,
    suite: &dyn CryptoSuite,
) -> Result<SignedContainer, ProtocolError> {
    if !seller.owns(container) {
        return Err(ProtocolError::NotOwner);
    }
    ctx.validate()?;
    let holding = seller
        .owned
        .get_mut(container.content_id())
        .expect("ownership checked above");
    let last = container.last();
    if holding.resales_remaining == 0 || last.resales_remaining == 0 {
        return Err(ProtocolError::ResaleLimitExhausted);
    }
    if let Decision::Deny(rule) = evaluate(&last.redistribution_licence.redistribution_rules, ctx) {
        return Err(ProtocolError::RedistributionDenied(rule));
    }
    let entry = sign_entry(
        suite,
        &container.association.digest,
        &container.chain,
        &seller.keys,
        buyer,
        (last.consumption_licence.clone(), last.redistribution_licence.clone()),
        last.resales_remaining - 1,
    );
    holding.resales_remaining -= 1;
    holding.resales_done += 1;
    let mut out = container.clone();
    out.chain.push(entry);
    Ok(out)
}
