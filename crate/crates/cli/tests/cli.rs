use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_superdist");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn superdist(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, market_size: u64, levels: &str, extra: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    let (platform, collector, rebate) = if levels == "[]" { (0, 0, 0) } else { (1400, 1400, 200) };
    fs::write(
        &path,
        format!(
            "version = 1\n[market]\nmarket_size = {market_size}\nlevel_shares_bp = {levels}\n\
             platform_share_bp = {platform}\ncollector_share_bp = {collector}\npeer_rebate_bp = {rebate}\n\
             [schedule]\nkind = \"constant\"\nprice = 100\n{extra}"
        ),
    )
    .unwrap();
    path
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(str::to_owned).collect()).collect()
}

const OUTPUTS: [&str; 4] = ["edges.csv", "ledger.csv", "adoption.csv", "revenue_by_index.csv"];

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 60, "[1000, 300, 100]", "[simulation]\nseed = 11\nruns = 50\n");
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = superdist(&["simulate", "--config", cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in OUTPUTS {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    superdist(&["simulate", "--config", cfg, "--out", c.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(fs::read(a.join("edges.csv")).unwrap(), fs::read(c.join("edges.csv")).unwrap());
}

#[test]
fn empty_market_writes_header_only_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0, "[1000, 300, 100]", "");
    let out = dir.path().join("out");
    let o = superdist(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("ledger.csv")).unwrap(),
        "payer,payee,amount_cents,reason,transaction_index\n"
    );
}

#[test]
fn check_analytic_gate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 20, "[1000, 300, 100]", "");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let o = superdist(&["simulate", "--config", cfg, "--out", out, "--runs", "4000", "--check-analytic"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    // a single run has no standard error to test against
    let o = superdist(&["simulate", "--config", cfg, "--out", out, "--check-analytic"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&superdist(&["analyze", "--config", missing.to_str().unwrap()])), 2);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "version = 1\n[market]\nmarket_size = 3\n").unwrap();
    assert_eq!(code(&superdist(&["analyze", "--config", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&superdist(&["frobnicate"])), 2);
}

#[test]
fn zero_share_effective_price_equals_price() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 30, "[]", "");
    let out = dir.path().join("out");
    let o = superdist(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = read_csv(&out.join("curve.csv"));
    assert_eq!(rows.len(), 30);
    for r in rows {
        assert_eq!(r[2], "0.000000");
        assert_eq!(r[3].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap());
    }
}

#[test]
fn potato_expected_revenue_strictly_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 100, "[1000, 300, 100]", "");
    let out = dir.path().join("out");
    superdist(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let revenue: Vec<f64> = read_csv(&out.join("curve.csv")).iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(revenue.windows(2).all(|w| w[0] > w[1]));
    assert_eq!(*revenue.last().unwrap(), 0.0);
}

#[test]
fn potato_demo_and_registries() {
    let o = superdist(&["potato-demo"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("first buyer's level rewards: 14¢"));
    let good = fixture("potato_registry.csv");
    assert_eq!(code(&superdist(&["potato-demo", "--registry", good.to_str().unwrap()])), 0);
    let bad = fixture("potato_registry_corrupted.csv");
    assert_eq!(code(&superdist(&["potato-demo", "--registry", bad.to_str().unwrap()])), 1);
}

#[test]
fn verify_fixtures() {
    let trust = fixture("trust_roots.txt");
    let trust = trust.to_str().unwrap();
    let valid = fixture("valid.sdc");
    let o = superdist(&["verify", valid.to_str().unwrap(), "--trust", trust]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("Valid"));

    let tampered = fixture("tampered.sdc");
    let o = superdist(&["verify", tampered.to_str().unwrap(), "--trust", trust]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("ContentMismatch"));

    let dir = tempfile::tempdir().unwrap();
    let bytes = fs::read(&valid).unwrap();
    let truncated = dir.path().join("truncated.sdc");
    fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(code(&superdist(&["verify", truncated.to_str().unwrap()])), 2);

    // an unrelated trust root rejects an otherwise valid chain
    let other = dir.path().join("other.txt");
    fs::write(&other, format!("# not the originator\n{}\n", "11".repeat(32))).unwrap();
    let o = superdist(&["verify", valid.to_str().unwrap(), "--trust", other.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("UntrustedOrigin"));
}

#[test]
fn paradiso_demo_reproduces_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let o = superdist(&["paradiso-demo", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["valid.sdc", "tampered.sdc", "trust_roots.txt"] {
        let written = dir.path().join(if f == "valid.sdc" { "container.sdc" } else { f });
        assert_eq!(fs::read(written).unwrap(), fs::read(fixture(f)).unwrap(), "{f}");
    }
    let receipts = read_csv(&dir.path().join("receipts.csv"));
    assert_eq!(receipts.len(), 1);
}
