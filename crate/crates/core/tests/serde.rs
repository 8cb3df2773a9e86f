mod common;

use proptest::prelude::*;
use proxy_auction::commands::{run, solve, verify, Objective, Overrides, RunOptions, RunReport, SolveReport, VerifyOptions, VerifyReport};
use proxy_auction::format::{InstanceFile, OutcomeRecord, SolutionRecord};
use proxy_auction::generate::{generate, random_feasible_solution, GeneratorKind, GeneratorParams};
use proxy_auction::mechanism::Prepared;
use proxy_auction::Caps;

use common::corpus_dir;

fn roundtrip<T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug>(value: &T) {
    let text = serde_json::to_string(value).unwrap();
    assert_eq!(&serde_json::from_str::<T>(&text).unwrap(), value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instances_survive_json(kind in 0usize..5, n in 1usize..=3, m in 1usize..=5, seed in any::<u64>()) {
        let kind = GeneratorKind::ALL[kind];
        let file = generate(kind, n, m, seed, &GeneratorParams::default(), &Caps::default()).unwrap();
        let back = InstanceFile::from_json(&file.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_instance().unwrap(), file.to_instance().unwrap());
        let rebuilt = InstanceFile::from_instance(&file.to_instance().unwrap(), file.metadata.clone());
        prop_assert_eq!(rebuilt, file);
    }

    #[test]
    fn solutions_survive_json(n in 1usize..=6, m in 1usize..=8, seed in any::<u64>()) {
        let sol = random_feasible_solution(n, m, 3, 4, seed).unwrap();
        let record = SolutionRecord::of(&sol);
        roundtrip(&record);
        prop_assert_eq!(record.to_exact().unwrap(), sol);
    }
}

#[test]
fn outcomes_survive_json() {
    let (_, file) = &common::load_corpus("standard")[1];
    let instance = file.to_instance().unwrap();
    let prepared = Prepared::new(&instance, &file.config(None, None).unwrap()).unwrap();
    for seed in 0..20 {
        let outcome = prepared.sample(seed).unwrap();
        roundtrip(&OutcomeRecord::of(seed, &outcome, &outcome.welfare(&instance).unwrap()));
    }
}

#[test]
fn reports_survive_json() {
    let file = corpus_dir("standard").join("03-coverage.json");
    let overrides = Overrides::default();
    let solved: SolveReport = solve(&file, &overrides, Objective::Proxy, false).unwrap();
    roundtrip(&solved);
    let options = RunOptions { trials: 5, payments: true, ..RunOptions::default() };
    let ran: RunReport = run(&file, &overrides, &options).unwrap();
    roundtrip(&ran);
    let verified: VerifyReport = verify(&corpus_dir("explicit").join("00-explicit-subadditive.json"), &overrides, &VerifyOptions::default()).unwrap();
    assert!(verified.passed);
    roundtrip(&verified);
}
