//! Subcommands of the `superdist` experiment runner.
//!
//! Exit codes: 0 success, 1 verification or check failure, 2 usage, config
//! or input error.

pub mod config;

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use superdist::licences::{make_good, Rule, RuleContext};
use superdist::market::{self, PriceSchedule, RemunerationScheme};
use superdist::overlay::{NodeId, Party, RewardReason, RonEntry, RonLedger};
use superdist::protocol::{
    issue_receipt, read_tan_csv, resell, verify, write_receipts_csv, write_tan_csv, AccountingService,
    CompliantDevice, CryptoSuite, Ed25519Suite, Listing, ProtocolError, PublicKey, Report, RewardingService,
    SignedContainer,
};
use superdist::sim::{self, SimConfig};
use superdist::Money;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            _ => 2,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

/// Writes `curve.csv` for the configured market.
pub fn cmd_analyze(cfg: &ExperimentConfig, out: &Path, log: &mut dyn Write) -> Result<PathBuf, CliError> {
    let sc = cfg.sim_config();
    let rows = market::curve(sc.market_size, &sc.scheme, &sc.schedule).map_err(|e| CliError::Config(e.to_string()))?;
    let mut w = create(out, "curve.csv")?;
    market::write_curve_csv(&rows, &mut w)?;
    w.flush()?;
    writeln!(log, "wrote {} rows to {}", rows.len(), out.join("curve.csv").display())?;
    Ok(out.join("curve.csv"))
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub seed: Option<u64>,
    pub runs: Option<u32>,
    pub check_analytic: bool,
}

/// Runs the simulator and writes `edges.csv`, `ledger.csv`, `adoption.csv`
/// and `revenue_by_index.csv`.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    out: &Path,
    opts: &SimulateOptions,
    log: &mut dyn Write,
) -> Result<(), CliError> {
    let mut sc: SimConfig = cfg.sim_config();
    if let Some(seed) = opts.seed {
        sc.seed = seed;
    }
    if let Some(runs) = opts.runs {
        sc.runs = runs;
    }
    sc.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let monte_carlo = sc.runs >= 2 && sc.free_rider.is_none();
    if opts.check_analytic && !monte_carlo {
        return Err(CliError::Usage(
            "--check-analytic needs at least 2 runs and no free_rider section".into(),
        ));
    }

    let result = sim::run(&sc).map_err(|e| CliError::Config(e.to_string()))?;
    let mut w = create(out, "edges.csv")?;
    result.cdo.write_edges_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "ledger.csv")?;
    result.ledger.write_csv(&mut w)?;
    w.flush()?;

    let mut w = create(out, "adoption.csv")?;
    if sc.runs >= 2 {
        let study = sim::adoption_study(&sc).map_err(|e| CliError::Config(e.to_string()))?;
        let averaged = sim::SimResult {
            legit_adoption: study.buckets.clone(),
            ..result.clone()
        };
        averaged.write_adoption_csv(&mut w)?;
        writeln!(
            log,
            "legitimate adoption over {} runs: {:.4} ± {:.4}",
            study.runs, study.mean, study.std_error
        )?;
    } else {
        result.write_adoption_csv(&mut w)?;
    }
    w.flush()?;

    let mut w = create(out, "revenue_by_index.csv")?;
    let mut failures = Vec::new();
    if monte_carlo {
        let estimates = sim::monte_carlo_revenues(&sc).map_err(|e| CliError::Config(e.to_string()))?;
        sim::write_revenue_csv(&estimates, &mut w)?;
        if opts.check_analytic {
            let rows = market::curve(sc.market_size.max(1), &sc.scheme, &sc.schedule)
                .map_err(|e| CliError::Config(e.to_string()))?;
            for (est, row) in estimates.iter().zip(&rows) {
                let diff = (est.mean - row.expected_revenue).abs();
                if diff > 4.0 * est.std_error && diff > 1e-9 {
                    failures.push(format!(
                        "entry {}: mean {:.6} vs analytic {:.6} (se {:.6})",
                        est.entry_index, est.mean, row.expected_revenue, est.std_error
                    ));
                }
            }
            writeln!(
                log,
                "analytic check: {}/{} entry indices within 4 standard errors",
                estimates.len() - failures.len(),
                estimates.len()
            )?;
        }
    } else {
        // a single run (or a free-rider market) has no standard error
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(["entry_index", "mean_cents", "std_error"])?;
        for (i, m) in result.per_index_revenue.iter().enumerate().skip(1) {
            csv.write_record([i.to_string(), format!("{:.6}", m.as_f64()), String::new()])?;
        }
        csv.flush()?;
    }
    w.flush()?;
    writeln!(
        log,
        "simulated {} entrants (seed {}, {} runs); {} ledger entries written to {}",
        sc.market_size,
        sc.seed,
        sc.runs,
        result.ledger.len(),
        out.display()
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}

pub const POTATO_CONTENT_ID: &str = "potato-demo";
pub const POTATO_SERVICE_KEY: [u8; 32] = [0x50; 32];

pub fn potato_listing() -> Listing {
    Listing {
        association: superdist::licences::ContentAssociation::new(POTATO_CONTENT_ID, b"potato demo track"),
        scheme: RemunerationScheme::potato(),
        schedule: PriceSchedule::constant(100),
        market_size: 4,
    }
}

/// The four-generation chain booked by hand: `(transaction, payee, cents, reason)`.
fn expected_potato_ledger() -> RonLedger {
    use RewardReason::*;
    let n = |i| Party::Node(NodeId(i));
    let rows: &[(u64, Party, i64, RewardReason)] = &[
        (1, Party::Platform, 14, PlatformFee),
        (1, Party::Collector, 14, CollectorFee),
        (1, Party::OriginatorAccount, 72, OriginatorShare),
        (2, n(1), 10, LevelReward(1)),
        (2, Party::Platform, 12, PlatformFee),
        (2, Party::Collector, 14, CollectorFee),
        (2, Party::OriginatorAccount, 62, OriginatorShare),
        (3, n(2), 10, LevelReward(1)),
        (3, n(1), 3, LevelReward(2)),
        (3, Party::Platform, 12, PlatformFee),
        (3, Party::Collector, 14, CollectorFee),
        (3, Party::OriginatorAccount, 59, OriginatorShare),
        (4, n(3), 10, LevelReward(1)),
        (4, n(2), 3, LevelReward(2)),
        (4, n(1), 1, LevelReward(3)),
        (4, Party::Platform, 12, PlatformFee),
        (4, Party::Collector, 14, CollectorFee),
        (4, Party::OriginatorAccount, 58, OriginatorShare),
    ];
    let mut ledger = RonLedger::new();
    for &(t, payee, cents, reason) in rows {
        ledger.push(RonEntry {
            payer: n(t),
            payee,
            amount: Money(cents),
            reason,
            transaction_index: t,
        });
    }
    ledger
}

/// Replays the four-buyer TAN chain (or the registry in `registry`) and
/// checks the ledger against the expected allocation table.
pub fn cmd_potato_demo(registry: Option<&Path>, out: Option<&Path>, log: &mut dyn Write) -> Result<(), CliError> {
    let service = match registry {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
            let records = read_tan_csv(file).map_err(|e| CliError::Input(e.to_string()))?;
            match AccountingService::replay(POTATO_SERVICE_KEY, potato_listing(), &records) {
                Ok(s) => s,
                Err(e) => return Err(CliError::Check(format!("registry replay failed: {e}"))),
            }
        }
        None => {
            let mut s = AccountingService::new(POTATO_SERVICE_KEY);
            s.register(potato_listing()).map_err(|e| CliError::Config(e.to_string()))?;
            let mut prev = None;
            for buyer in ["buyer-1", "buyer-2", "buyer-3", "buyer-4"] {
                let tan = s
                    .as_purchase(POTATO_CONTENT_ID, buyer, prev.as_ref())
                    .map_err(|e| CliError::Check(e.to_string()))?;
                writeln!(log, "{buyer} bought with TAN {tan}")?;
                prev = Some(tan);
            }
            s
        }
    };

    let ledger = service.ledger(POTATO_CONTENT_ID).expect("listing registered");
    writeln!(log, "{:>3}  {:<20} {:>6}  reason", "tx", "payee", "cents")?;
    for e in ledger.entries() {
        writeln!(log, "{:>3}  {:<20} {:>6}  {}", e.transaction_index, e.payee.to_string(), e.amount.as_cents(), e.reason)?;
    }
    let first = ledger.income(Party::Node(NodeId(1)));
    writeln!(log, "first buyer's level rewards: {}", first)?;

    if let Some(dir) = out {
        let mut w = create(dir, "ledger.csv")?;
        ledger.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(dir, "tans.csv")?;
        write_tan_csv(&service.records(POTATO_CONTENT_ID), &mut w)?;
        w.flush()?;
    }

    if *ledger != expected_potato_ledger() {
        return Err(CliError::Check("ledger does not match the expected allocation table".into()));
    }
    writeln!(log, "ledger matches the expected allocation table")?;
    Ok(())
}

pub const PARADISO_SEED: u64 = 2008;

fn demo_check(ok: bool, what: &str, log: &mut dyn Write) -> Result<bool, CliError> {
    writeln!(log, "[{}] {what}", if ok { "ok" } else { "FAIL" })?;
    Ok(ok)
}

/// Runs the decentralised flow end to end and writes `container.sdc`,
/// `tampered.sdc`, `trust_roots.txt`, `receipts.csv` and `rewards.csv`.
pub fn cmd_paradiso_demo(out: &Path, log: &mut dyn Write) -> Result<(), CliError> {
    let suite = Ed25519Suite;
    let mut rng = ChaCha8Rng::seed_from_u64(PARADISO_SEED);
    let mut originator = CompliantDevice::new(suite.keygen(&mut rng));
    let roots = BTreeSet::from([originator.public_key().clone()]);
    let good = make_good(
        "paradiso-demo",
        b"paradiso demo content: full-quality master",
        Rule::AllowAll,
        RemunerationScheme::potato(),
        Rule::MinDistanceMoved(100.0),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let moved = RuleContext {
        now: 1,
        distance_moved: 150.0,
        resales_done: 0,
        market_saturation: 0.0,
    };
    let fail = |e: ProtocolError| CliError::Check(e.to_string());

    let mut ok = true;
    let mut container = originator.originate(&good, 3, &suite).map_err(fail)?;
    let mut devices: Vec<CompliantDevice> = Vec::new();
    for name in ["A", "B", "C"] {
        let mut buyer = CompliantDevice::new(suite.keygen(&mut rng));
        let seller = devices.last_mut().unwrap_or(&mut originator);
        container = resell(&container, seller, buyer.public_key(), &moved, &suite).map_err(fail)?;
        buyer.acquire(container.clone(), &roots, &suite).map_err(fail)?;
        writeln!(
            log,
            "resold to {name}: chain length {}, resales remaining {}",
            container.chain.len(),
            container.last().resales_remaining
        )?;
        devices.push(buyer);
    }

    let outsider = CompliantDevice::new(suite.keygen(&mut rng));
    let exhausted = resell(&container, &mut devices[2], outsider.public_key(), &moved, &suite);
    ok &= demo_check(exhausted == Err(ProtocolError::ResaleLimitExhausted), "fourth resale refused: limit exhausted", log)?;
    let near = RuleContext { distance_moved: 50.0, ..moved };
    let a_copy = devices[0].holding("paradiso-demo").expect("A holds").container.clone();
    let denied = resell(&a_copy, &mut devices[0], outsider.public_key(), &near, &suite);
    ok &= demo_check(
        matches!(denied, Err(ProtocolError::RedistributionDenied(Rule::MinDistanceMoved(_)))),
        "resale after moving 50 m refused",
        log,
    )?;

    let report = verify(&container, &roots, &suite);
    ok &= demo_check(report.is_valid(), &format!("final container verifies: {report}"), log)?;
    let mut tampered = container.clone();
    tampered.content[0] ^= 0x01;
    let report = verify(&tampered, &roots, &suite);
    ok &= demo_check(report == Report::ContentMismatch, &format!("masqueraded content detected: {report}"), log)?;

    let mut rewards = RewardingService::new(RemunerationScheme::potato(), roots.clone());
    let receipt = issue_receipt(&devices[2], &container, Money(100), "paradiso-tx-3", &suite).map_err(fail)?;
    let paid = rewards.redeem(&receipt, &container, &suite).map_err(fail)?;
    ok &= demo_check(
        paid.iter().map(|e| e.amount).sum::<Money>() == Money(98),
        "receipt redeemed for a 98¢ peer purchase",
        log,
    )?;
    let again = rewards.redeem(&receipt, &container, &suite);
    ok &= demo_check(matches!(again, Err(ProtocolError::AlreadyRedeemed(_))), "second redemption refused", log)?;

    fs::create_dir_all(out)?;
    fs::write(out.join("container.sdc"), container.to_bytes())?;
    fs::write(out.join("tampered.sdc"), tampered.to_bytes())?;
    fs::write(out.join("trust_roots.txt"), format!("{}\n", originator.public_key().to_hex()))?;
    let mut w = create(out, "receipts.csv")?;
    write_receipts_csv(&[receipt], &mut w)?;
    w.flush()?;
    let mut w = create(out, "rewards.csv")?;
    rewards.ledger().write_csv(&mut w)?;
    w.flush()?;
    writeln!(log, "wrote container.sdc, tampered.sdc, trust_roots.txt, receipts.csv, rewards.csv to {}", out.display())?;

    if ok {
        Ok(())
    } else {
        Err(CliError::Check("paradiso demonstration deviated from expectations".into()))
    }
}

/// One hex-encoded public key per line; blank lines and `#` comments ignored.
pub fn read_trust_roots(path: &Path) -> Result<BTreeSet<PublicKey>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            hex::decode(l)
                .map(PublicKey)
                .map_err(|_| CliError::Input(format!("bad trust root {l:?}")))
        })
        .collect()
}

/// Verifies a container file under Ed25519. Without `trust`, the container's
/// own origin key is trusted, so `UntrustedOrigin` cannot be reported.
pub fn cmd_verify(file: &Path, trust: Option<&Path>, log: &mut dyn Write) -> Result<Report, CliError> {
    let bytes = fs::read(file).map_err(|e| CliError::Input(format!("cannot read {}: {e}", file.display())))?;
    let container = SignedContainer::from_bytes(&bytes).map_err(|e| CliError::Input(e.to_string()))?;
    let roots = match trust {
        Some(p) => read_trust_roots(p)?,
        None => {
            writeln!(log, "note: no trust roots given; trusting the container's own origin key")?;
            container.chain.first().map(|e| e.seller.clone()).into_iter().collect()
        }
    };
    let report = verify(&container, &roots, &Ed25519Suite);
    writeln!(
        log,
        "{}: {} ({} entries, content {})",
        file.display(),
        report,
        container.chain.len(),
        container.content_id()
    )?;
    if report.is_valid() {
        Ok(report)
    } else {
        Err(CliError::Check(report.to_string()))
    }
}
