use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use superdist::licences::{make_good, DigitalGood, Rule, RuleContext};
use superdist::market::{allocate, PriceSchedule, RemunerationScheme};
use superdist::overlay::{NodeId, Party, RewardReason};
use superdist::protocol::*;
use superdist::Money;

fn good(rules: Rule) -> DigitalGood {
    make_good("track-7", b"original master recording", Rule::AllowAll, RemunerationScheme::potato(), rules).unwrap()
}

fn ctx() -> RuleContext {
    RuleContext {
        now: 1,
        distance_moved: 500.0,
        resales_done: 0,
        market_saturation: 0.1,
    }
}

struct World {
    suite: HashSuite,
    rng: ChaCha8Rng,
    originator: CompliantDevice,
    roots: BTreeSet<PublicKey>,
}

impl World {
    fn new(seed: u64) -> Self {
        let suite = HashSuite;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let originator = CompliantDevice::new(suite.keygen(&mut rng));
        let roots = BTreeSet::from([originator.public_key().clone()]);
        Self {
            suite,
            rng,
            originator,
            roots,
        }
    }

    fn device(&mut self) -> CompliantDevice {
        CompliantDevice::new(self.suite.keygen(&mut self.rng))
    }

    /// Chain originator -> d1 -> d2 ... of `len` resales.
    fn chain(&mut self, good: &DigitalGood, initial: u32, len: usize) -> (SignedContainer, Vec<CompliantDevice>) {
        let mut c = self.originator.originate(good, initial, &self.suite).unwrap();
        let mut devices: Vec<CompliantDevice> = Vec::new();
        for _ in 0..len {
            let mut buyer = self.device();
            let next = {
                let seller = devices.last_mut().unwrap_or(&mut self.originator);
                resell(&c, seller, buyer.public_key(), &ctx(), &self.suite).unwrap()
            };
            buyer.acquire(next.clone(), &self.roots, &self.suite).unwrap();
            devices.push(buyer);
            c = next;
        }
        (c, devices)
    }
}

#[test]
fn package_round_trip() {
    let mut w = World::new(1);
    let c = w.originator.originate(&good(Rule::AllowAll), 3, &w.suite).unwrap();
    assert_eq!(c.chain.len(), 1);
    assert_eq!(verify(&c, &w.roots, &w.suite), Report::Valid);
    assert_eq!(SignedContainer::from_bytes(&c.to_bytes()).unwrap(), c);
}

#[test]
fn package_rejects_mismatched_licence() {
    let w = World::new(2);
    let mut g = good(Rule::AllowAll);
    g.redistribution_licence.association.digest = superdist::licences::Digest([7; 32]);
    let keys = HashSuite.keygen(&mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(package(&g.content, &g, &keys, 3, &w.suite), Err(ProtocolError::AssociationError));
    let g = good(Rule::AllowAll);
    assert_eq!(package(b"other", &g, &keys, 3, &w.suite), Err(ProtocolError::AssociationError));
}

#[test]
fn same_content_different_originators() {
    let g = good(Rule::AllowAll);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = package(&g.content, &g, &Ed25519Suite.keygen(&mut rng), 3, &Ed25519Suite).unwrap();
    let b = package(&g.content, &g, &Ed25519Suite.keygen(&mut rng), 3, &Ed25519Suite).unwrap();
    assert_eq!(a.association.digest, b.association.digest);
    assert_ne!(a.chain[0].signature, b.chain[0].signature);
}

#[test]
fn resale_limit_down_the_chain() {
    let mut w = World::new(4);
    let (c, mut devices) = w.chain(&good(Rule::AllowAll), 3, 3);
    assert_eq!(verify(&c, &w.roots, &w.suite), Report::Valid);
    let resales: Vec<u32> = c.chain.iter().map(|e| e.resales_remaining).collect();
    assert_eq!(resales, vec![3, 2, 1, 0]);
    let next = w.device();
    let last = devices.last_mut().unwrap();
    assert_eq!(
        resell(&c, last, next.public_key(), &ctx(), &w.suite),
        Err(ProtocolError::ResaleLimitExhausted)
    );
}

#[test]
fn resale_limit_per_device() {
    let mut w = World::new(5);
    let c = w.originator.originate(&good(Rule::AllowAll), 3, &w.suite).unwrap();
    for _ in 0..3 {
        let b = w.device();
        let sold = resell(&c, &mut w.originator, b.public_key(), &ctx(), &w.suite).unwrap();
        assert_eq!(sold.chain[1].resales_remaining, 2);
    }
    let b = w.device();
    assert_eq!(
        resell(&c, &mut w.originator, b.public_key(), &ctx(), &w.suite),
        Err(ProtocolError::ResaleLimitExhausted)
    );
    assert_eq!(w.originator.holding("track-7").unwrap().resales_done, 3);
}

#[test]
fn distance_rule_blocks_resale() {
    let mut w = World::new(6);
    let rule = Rule::MinDistanceMoved(100.0);
    let c = w.originator.originate(&good(rule.clone()), 3, &w.suite).unwrap();
    let b = w.device();
    let near = RuleContext { distance_moved: 50.0, ..ctx() };
    assert_eq!(
        resell(&c, &mut w.originator, b.public_key(), &near, &w.suite),
        Err(ProtocolError::RedistributionDenied(rule))
    );
}

#[test]
fn non_owner_cannot_resell() {
    let mut w = World::new(7);
    let c = w.originator.originate(&good(Rule::AllowAll), 3, &w.suite).unwrap();
    let mut stranger = w.device();
    let b = w.device();
    assert_eq!(
        resell(&c, &mut stranger, b.public_key(), &ctx(), &w.suite),
        Err(ProtocolError::NotOwner)
    );
}

#[test]
fn resell_leaves_input_untouched() {
    let mut w = World::new(8);
    let c = w.originator.originate(&good(Rule::AllowAll), 3, &w.suite).unwrap();
    let before = c.clone();
    let b = w.device();
    let sold = resell(&c, &mut w.originator, b.public_key(), &ctx(), &w.suite).unwrap();
    assert_eq!(c, before);
    assert_eq!(sold.chain.len(), 2);
    assert!(w.originator.owns(&before));
}

#[test]
fn acquire_requires_being_the_buyer() {
    let mut w = World::new(9);
    let c = w.originator.originate(&good(Rule::AllowAll), 3, &w.suite).unwrap();
    let b = w.device();
    let sold = resell(&c, &mut w.originator, b.public_key(), &ctx(), &w.suite).unwrap();
    let mut other = w.device();
    assert_eq!(other.acquire(sold, &w.roots, &w.suite), Err(ProtocolError::NotOwner));
}

#[test]
fn flipped_content_byte_is_masquerading() {
    let mut w = World::new(10);
    let (mut c, _) = w.chain(&good(Rule::AllowAll), 5, 2);
    c.content[3] ^= 0x20;
    assert_eq!(verify(&c, &w.roots, &w.suite), Report::ContentMismatch);
}

#[test]
fn deleted_middle_entry_breaks_chain() {
    let mut w = World::new(11);
    let (c, _) = w.chain(&good(Rule::AllowAll), 5, 3);
    let mut cut = c.clone();
    cut.chain.remove(2);
    assert_eq!(verify(&cut, &w.roots, &w.suite), Report::ChainBroken(2));
    let mut cut = c.clone();
    cut.chain.remove(1);
    assert_eq!(verify(&cut, &w.roots, &w.suite), Report::ChainBroken(1));
}

#[test]
fn altered_licence_breaks_chain() {
    let mut w = World::new(12);
    let (c, _) = w.chain(&good(Rule::MaxResales(5)), 5, 3);
    let mut loosened = c.clone();
    loosened.chain[2].redistribution_licence.redistribution_rules = Rule::AllowAll;
    assert_eq!(verify(&loosened, &w.roots, &w.suite), Report::ChainBroken(2));
    let mut counter = c.clone();
    counter.chain[3].resales_remaining = 9;
    assert_eq!(verify(&counter, &w.roots, &w.suite), Report::ChainBroken(3));
}

#[test]
fn forged_signature_and_untrusted_origin() {
    let mut w = World::new(13);
    let (c, _) = w.chain(&good(Rule::AllowAll), 5, 2);
    let mut forged = c.clone();
    forged.chain[1].signature.0[0] ^= 1;
    assert_eq!(verify(&forged, &w.roots, &w.suite), Report::BadSignature(1));
    assert_eq!(verify(&c, &BTreeSet::new(), &w.suite), Report::UntrustedOrigin);
}

#[test]
fn ed25519_chain_verifies() {
    let suite = Ed25519Suite;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut o = CompliantDevice::new(suite.keygen(&mut rng));
    let roots = BTreeSet::from([o.public_key().clone()]);
    let c = o.originate(&good(Rule::AllowAll), 2, &suite).unwrap();
    let mut b = CompliantDevice::new(suite.keygen(&mut rng));
    let sold = resell(&c, &mut o, b.public_key(), &ctx(), &suite).unwrap();
    b.acquire(sold.clone(), &roots, &suite).unwrap();
    assert_eq!(verify(&sold, &roots, &suite), Report::Valid);
    // a chain signed with the double does not verify under ed25519
    let mut w = World::new(1);
    let (dc, _) = w.chain(&good(Rule::AllowAll), 2, 1);
    assert!(!verify(&dc, &w.roots, &suite).is_valid());
}

#[test]
fn framing_rejects_malformed_input() {
    let mut w = World::new(15);
    let (c, _) = w.chain(&good(Rule::AllowAll), 5, 2);
    let bytes = c.to_bytes();
    assert_eq!(&bytes[..4], b"SDC1");
    assert_eq!(SignedContainer::from_bytes(&bytes[..bytes.len() - 1]), Err(FormatError::Truncated));
    let mut extra = bytes.clone();
    extra.push(0);
    assert_eq!(SignedContainer::from_bytes(&extra), Err(FormatError::TrailingBytes(1)));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert_eq!(SignedContainer::from_bytes(&magic), Err(FormatError::BadMagic));
    assert_eq!(SignedContainer::from_bytes(b""), Err(FormatError::Truncated));
}

#[test]
fn framing_layout_is_stable() {
    let mut w = World::new(16);
    let c = w.originator.originate(&good(Rule::AllowAll), 1, &w.suite).unwrap();
    let bytes = c.to_bytes();
    let content_len = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    assert_eq!(&bytes[8..8 + content_len], b"original master recording");
    let at = 8 + content_len;
    let assoc_len = u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let assoc = std::str::from_utf8(&bytes[at + 4..at + 4 + assoc_len]).unwrap();
    assert_eq!(assoc, format!(r#"{{"content_id":"track-7","digest":"{}"}}"#, c.association.digest));
    let at = at + 4 + assoc_len;
    assert_eq!(u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap()), 1);
}

#[test]
fn receipts_redeem_once_and_match_allocation() {
    let mut w = World::new(17);
    let g = good(Rule::AllowAll);
    let (c, devices) = w.chain(&g, 5, 4);
    let mut service = RewardingService::new(RemunerationScheme::potato(), w.roots.clone());
    let buyer = &devices[3];
    let receipt = issue_receipt(buyer, &c, Money(100), "tx-4", &w.suite).unwrap();
    let entries = service.redeem(&receipt, &c, &w.suite).unwrap();

    let expected = allocate(Money(100), &RemunerationScheme::potato(), 3, true).unwrap();
    assert_eq!(entries.iter().map(|e| e.amount).sum::<Money>(), expected.buyer_outlay);
    let level1 = entries.iter().find(|e| e.reason == RewardReason::LevelReward(1)).unwrap();
    assert_eq!(level1.payee, Party::Node(service.node_of(devices[2].public_key()).unwrap()));
    assert_eq!(level1.amount, Money(10));
    assert_eq!(service.node_of(w.originator.public_key()), Some(NodeId(0)));

    assert_eq!(
        service.redeem(&receipt, &c, &w.suite),
        Err(ProtocolError::AlreadyRedeemed("tx-4".into()))
    );
    assert_eq!(service.ledger().len(), entries.len());
}

#[test]
fn receipt_forgery_and_wrong_content_rejected() {
    let mut w = World::new(18);
    let (c, devices) = w.chain(&good(Rule::AllowAll), 5, 2);
    let mut service = RewardingService::new(RemunerationScheme::potato(), w.roots.clone());
    let receipt = issue_receipt(&devices[1], &c, Money(100), "tx", &w.suite).unwrap();

    // signed by a mismatched key pair
    let impostor = w.device();
    let mut forged = receipt.clone();
    forged.signature = HashSuite.sign(&SecretKey(impostor.public_key().0.clone()), &forged.signing_bytes());
    assert!(matches!(service.redeem(&forged, &c, &w.suite), Err(ProtocolError::InvalidReceipt(_))));

    let mut inflated = receipt.clone();
    inflated.amount = Money(1_000);
    assert!(matches!(service.redeem(&inflated, &c, &w.suite), Err(ProtocolError::InvalidReceipt(_))));

    let other = make_good("other", b"different", Rule::AllowAll, RemunerationScheme::potato(), Rule::AllowAll).unwrap();
    let oc = w.originator.originate(&other, 3, &w.suite).unwrap();
    assert!(matches!(service.redeem(&receipt, &oc, &w.suite), Err(ProtocolError::InvalidReceipt(_))));

    assert!(service.redeem(&receipt, &c, &w.suite).is_ok());
    assert_eq!(
        issue_receipt(&devices[0], &c, Money(100), "x", &w.suite),
        Err(ProtocolError::NotOwner)
    );
}

fn potato_service() -> AccountingService {
    let mut s = AccountingService::new([9; 32]);
    let g = good(Rule::AllowAll);
    s.register(Listing {
        association: g.association().clone(),
        scheme: RemunerationScheme::potato(),
        schedule: PriceSchedule::constant(100),
        market_size: 4,
    })
    .unwrap();
    s
}

#[test]
fn tan_chain_pays_first_buyer_fourteen_cents() {
    let mut s = potato_service();
    let t1 = s.as_purchase("track-7", "alice", None).unwrap();
    let t2 = s.as_purchase("track-7", "bob", Some(&t1)).unwrap();
    let t3 = s.as_purchase("track-7", "carol", Some(&t2)).unwrap();
    s.as_purchase("track-7", "dave", Some(&t3)).unwrap();
    let ledger = s.ledger("track-7").unwrap();
    assert_eq!(ledger.income(Party::Node(NodeId(1))), Money(14));
    assert_eq!(ledger.paid_by(1, Party::Node(NodeId(1))), Money(100));
    assert_eq!(ledger.paid_by(2, Party::Node(NodeId(2))), Money(98));
    assert_eq!(s.record(&t2).unwrap().seller_tan, Some(t1));
}

#[test]
fn tan_errors() {
    let mut s = potato_service();
    assert_eq!(
        s.as_purchase("nope", "alice", None),
        Err(ProtocolError::NotInCatalog("nope".into()))
    );
    let fake = Tan("DEADBEEF".into());
    assert_eq!(
        s.as_purchase("track-7", "alice", Some(&fake)),
        Err(ProtocolError::UnknownTan(fake))
    );
    // nothing recorded on failure
    assert!(s.ledger("track-7").unwrap().is_empty());
}

#[test]
fn tan_registry_replays() {
    let mut s = potato_service();
    let t1 = s.as_purchase("track-7", "alice", None).unwrap();
    let t2 = s.as_purchase("track-7", "bob", Some(&t1)).unwrap();
    s.as_purchase("track-7", "carol", Some(&t2)).unwrap();
    let mut csv = Vec::new();
    write_tan_csv(&s.records("track-7"), &mut csv).unwrap();
    let records = read_tan_csv(csv.as_slice()).unwrap();
    let listing = Listing {
        association: good(Rule::AllowAll).association().clone(),
        scheme: RemunerationScheme::potato(),
        schedule: PriceSchedule::constant(100),
        market_size: 4,
    };
    let replayed = AccountingService::replay([9; 32], listing.clone(), &records).unwrap();
    assert_eq!(replayed.ledger("track-7"), s.ledger("track-7"));

    let mut corrupted = records.clone();
    corrupted[2].seller_tan = Some(corrupted[0].tan.clone());
    corrupted[2].tan = Tan("0000".into());
    assert!(matches!(
        AccountingService::replay([9; 32], listing, &corrupted),
        Err(ProtocolError::RegistryMismatch(_))
    ));
}
