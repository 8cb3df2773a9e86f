mod common;

use std::path::Path;
use std::process::{Command, Output};

use proxy_auction::format::{InstanceFile, Number};
use proxy_auction::ItemSet;
use serde_json::Value;

use common::{corpus_dir, proxy_brute, r};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxy-auction")).args(args).output().expect("spawn")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_deterministic_and_reproducible() {
    let args = ["generate", "--kind", "coverage", "--bidders", "3", "--items", "4", "--seed", "11"];
    let a = cli(&args);
    let b = cli(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let file = InstanceFile::from_json(&String::from_utf8(a.stdout).unwrap()).unwrap();
    assert_eq!(file, common::regenerate(&file));
    let other = cli(&["generate", "--kind", "coverage", "--bidders", "3", "--items", "4", "--seed", "12"]);
    assert_ne!(other.stdout, b.stdout);
}

#[test]
fn explicit_tables_beyond_cap_exit_with_error() {
    let out = cli(&["generate", "--kind", "explicit-subadditive", "--bidders", "1", "--items", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
}

#[test]
fn single_bidder_takes_the_grand_bundle() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, seed) in [("xos", 5), ("unit-demand", 6), ("coverage", 7)] {
        let file = dir.path().join(format!("{kind}.json"));
        let out = cli(&["generate", "--kind", kind, "--bidders", "1", "--items", "4", "--seed", &seed.to_string(), "--out", path(&file)]);
        assert!(out.status.success());
        let report = json(&cli(&["solve", path(&file), "--c", "1/2", "--json"]));
        let instance = InstanceFile::read(&file).unwrap().to_instance().unwrap();
        let want = proxy_brute(instance.valuation(0), &r(1, 2), ItemSet::full(4));
        assert_eq!(report["objective"]["exact"], Number::of(&want).as_str());
    }
}

#[test]
fn run_reports_repeat_under_a_fixed_seed() {
    let file = corpus_dir("standard").join("01-xos.json");
    let args = ["run", path(&file), "--seed", "9", "--trials", "20", "--json"];
    let a = cli(&args);
    assert_eq!(a.stdout, cli(&args).stdout);
    let report = json(&a);
    assert_eq!(report["outcomes"].as_array().map(Vec::len), Some(20));
}

#[test]
fn verify_passes_on_bundled_corpora() {
    for name in ["standard", "explicit"] {
        let out = cli(&["verify", path(&corpus_dir(name)), "--json"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(json(&out)["passed"], Value::Bool(true));
    }
}

#[test]
fn flag_overrides_instance_metadata() {
    let file = corpus_dir("standard").join("01-xos.json");
    let report = json(&cli(&["solve", path(&file), "--c", "1/3", "--json"]));
    assert_eq!(report["c"], "1/3");
}

#[test]
fn bad_input_is_rejected() {
    assert!(!cli(&["run", "--no-such-flag", "x.json"]).status.success());
    assert_eq!(cli(&["solve", "/nonexistent.json"]).status.code(), Some(2));
    let file = corpus_dir("standard").join("01-xos.json");
    assert_eq!(cli(&["solve", path(&file), "--c", "2/3"]).status.code(), Some(2));
    assert_eq!(cli(&["run", path(&file), "--p", "3/2"]).status.code(), Some(2));
}
