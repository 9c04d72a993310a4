//! The digital good and its two licences.
//!
//! A good is content plus a consumption licence (usage rules and the
//! remuneration scheme) and a redistribution licence (resale rules). Both
//! licences carry the same content association, a digest binding them to the
//! exact content bytes.
//!
//! Rules form a small closed AST evaluated against a [`RuleContext`]. Licence
//! values have a canonical text form (JSON with sorted keys and no
//! whitespace) so digests and signatures over them are reproducible.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::market::RemunerationScheme;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LicenceError {
    #[error("content is empty")]
    EmptyContent,
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("invalid rule context: {0}")]
    InvalidContext(String),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
}

/// SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const LEN: usize = 32;

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex digits"))
    }
}

/// Canonical text form: JSON, keys sorted, no insignificant whitespace.
pub fn canonical_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    // serde_json::Value keeps object keys in a BTreeMap, so re-serialising
    // through it sorts them
    let v = serde_json::to_value(value).expect("licence values serialise");
    serde_json::to_vec(&v).expect("json values serialise")
}

/// Parses a canonical text form, rejecting anything that would not
/// re-serialise to the same bytes.
pub fn from_canonical_bytes<T: Serialize + for<'de> Deserialize<'de>>(bytes: &[u8]) -> Option<T> {
    let value: T = serde_json::from_slice(bytes).ok()?;
    (canonical_bytes(&value) == bytes).then_some(value)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentAssociation {
    pub content_id: String,
    pub digest: Digest,
}

impl ContentAssociation {
    pub fn new(content_id: impl Into<String>, content: &[u8]) -> Self {
        Self {
            content_id: content_id.into(),
            digest: Digest::of(content),
        }
    }

    pub fn matches(&self, content: &[u8]) -> bool {
        Digest::of(content) == self.digest
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MaxResales(u32),
    NotBefore(u64),
    MinDistanceMoved(f64),
    MaxSaturation(f64),
    AllowAll,
    DenyAll,
    All(Vec<Rule>),
    Any(Vec<Rule>),
}

impl Rule {
    pub fn is_leaf(&self) -> bool {
        !matches!(self, Rule::All(_) | Rule::Any(_))
    }

    /// All leaves of the tree, left to right.
    pub fn leaves(&self) -> Vec<&Rule> {
        match self {
            Rule::All(rs) | Rule::Any(rs) => rs.iter().flat_map(Rule::leaves).collect(),
            leaf => vec![leaf],
        }
    }

    pub fn validate(&self) -> Result<(), LicenceError> {
        let bad = |m: String| Err(LicenceError::InvalidRule(m));
        match self {
            Rule::MinDistanceMoved(d) if !(d.is_finite() && *d >= 0.0) => bad(format!("distance {d}")),
            Rule::MaxSaturation(s) if !(0.0..=1.0).contains(s) => bad(format!("saturation {s}")),
            Rule::All(rs) | Rule::Any(rs) => {
                if rs.is_empty() {
                    return bad("empty combinator".into());
                }
                rs.iter().try_for_each(Rule::validate)
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::MaxResales(n) => write!(f, "MaxResales({n})"),
            Rule::NotBefore(t) => write!(f, "NotBefore({t})"),
            Rule::MinDistanceMoved(d) => write!(f, "MinDistanceMoved({d})"),
            Rule::MaxSaturation(s) => write!(f, "MaxSaturation({s})"),
            Rule::AllowAll => f.write_str("AllowAll"),
            Rule::DenyAll => f.write_str("DenyAll"),
            Rule::All(rs) | Rule::Any(rs) => {
                f.write_str(if matches!(self, Rule::All(_)) { "All(" } else { "Any(" })?;
                for (i, r) in rs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{r}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Inputs to rule evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleContext {
    /// Abstract ticks.
    pub now: u64,
    /// Metres moved since the good was acquired.
    pub distance_moved: f64,
    pub resales_done: u32,
    pub market_saturation: f64,
}

impl RuleContext {
    pub fn validate(&self) -> Result<(), LicenceError> {
        if !(self.distance_moved.is_finite() && self.distance_moved >= 0.0) {
            return Err(LicenceError::InvalidContext(format!("distance {}", self.distance_moved)));
        }
        if !(0.0..=1.0).contains(&self.market_saturation) {
            return Err(LicenceError::InvalidContext(format!("saturation {}", self.market_saturation)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Allow,
    /// Carries the first leaf rule that failed.
    Deny(Rule),
}

impl Decision {
    pub fn is_allow(&self) -> bool {
        matches!(self, Decision::Allow)
    }
}

/// Evaluates `rule` against `ctx`. `All` stops at the first deny, `Any` at
/// the first allow; when every branch of an `Any` denies, the first branch's
/// reason is reported.
pub fn evaluate(rule: &Rule, ctx: &RuleContext) -> Decision {
    let leaf = |ok: bool| if ok { Decision::Allow } else { Decision::Deny(rule.clone()) };
    match rule {
        Rule::MaxResales(limit) => leaf(ctx.resales_done < *limit),
        Rule::NotBefore(t) => leaf(ctx.now >= *t),
        Rule::MinDistanceMoved(d) => leaf(ctx.distance_moved >= *d),
        Rule::MaxSaturation(s) => leaf(ctx.market_saturation <= *s),
        Rule::AllowAll => Decision::Allow,
        Rule::DenyAll => Decision::Deny(Rule::DenyAll),
        Rule::All(rs) => rs
            .iter()
            .map(|r| evaluate(r, ctx))
            .find(|d| !d.is_allow())
            .unwrap_or(Decision::Allow),
        Rule::Any(rs) => {
            let mut first_deny = None;
            for r in rs {
                match evaluate(r, ctx) {
                    Decision::Allow => return Decision::Allow,
                    deny => {
                        first_deny.get_or_insert(deny);
                    }
                }
            }
            first_deny.unwrap_or(Decision::Deny(Rule::DenyAll))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumptionLicence {
    pub consumption_rules: Rule,
    pub remuneration: RemunerationScheme,
    pub association: ContentAssociation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedistributionLicence {
    pub redistribution_rules: Rule,
    pub association: ContentAssociation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalGood {
    pub content: Vec<u8>,
    pub consumption_licence: ConsumptionLicence,
    pub redistribution_licence: RedistributionLicence,
}

impl DigitalGood {
    pub fn content_id(&self) -> &str {
        &self.consumption_licence.association.content_id
    }

    pub fn association(&self) -> &ContentAssociation {
        &self.consumption_licence.association
    }

    pub fn scheme(&self) -> &RemunerationScheme {
        &self.consumption_licence.remuneration
    }
}

pub fn make_good(
    content_id: impl Into<String>,
    content: &[u8],
    consumption_rules: Rule,
    scheme: RemunerationScheme,
    redistribution_rules: Rule,
) -> Result<DigitalGood, LicenceError> {
    if content.is_empty() {
        return Err(LicenceError::EmptyContent);
    }
    consumption_rules.validate()?;
    redistribution_rules.validate()?;
    scheme
        .validate()
        .map_err(|e| LicenceError::InvalidScheme(e.to_string()))?;
    let association = ContentAssociation::new(content_id, content);
    Ok(DigitalGood {
        content: content.to_vec(),
        consumption_licence: ConsumptionLicence {
            consumption_rules,
            remuneration: scheme,
            association: association.clone(),
        },
        redistribution_licence: RedistributionLicence {
            redistribution_rules,
            association,
        },
    })
}

/// True iff both licences carry the same association and it matches the content.
pub fn verify_association(good: &DigitalGood) -> bool {
    let c = &good.consumption_licence.association;
    c == &good.redistribution_licence.association && c.matches(&good.content)
}
