//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.
//!
//! Runs with `harness = false` so the lines print in order and uncaptured.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use num_traits::Zero;
use proxy_auction::format::InstanceFile;
use proxy_auction::generate::{generate, random_feasible_solution, GeneratorKind, GeneratorParams};
use proxy_auction::lp::{solve_column_generation, FractionalSolution, Assignment};
use proxy_auction::mechanism::{default_params, LpMethod, Prepared};
use proxy_auction::valuations::QueryCounter;
use proxy_auction::verify::{
    check_halt_frequency, check_monte_carlo, check_truthfulness, exact_distribution, keep_marginals,
    MisreportFamily, OutcomeDistribution,
};
use proxy_auction::{Caps, Instance, ItemSet, KeepRate, MechanismConfig, QVariant, Rational, Valuation};

use common::{integral_optimum, load_corpus, lp_oracle, proxy_brute, r, regenerate};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn standard() -> Vec<(String, InstanceFile)> {
    load_corpus("standard")
}

fn explicit() -> Vec<(String, InstanceFile)> {
    load_corpus("explicit")
}

fn setup(file: &InstanceFile) -> (Instance<Rational>, MechanismConfig) {
    (file.to_instance().unwrap(), file.config(None, None).unwrap())
}

/// Corpus shape, and every file reproduces from its recorded generator inputs.
fn corpus_sanity() -> Outcome {
    let corpus = standard();
    ensure(corpus.len() >= 20, || format!("only {} instances", corpus.len()))?;
    let mut kinds = BTreeSet::new();
    for (name, file) in corpus.iter().chain(explicit().iter()) {
        ensure(file.bidders.len() <= 3 && file.m <= 5, || format!("{name} exceeds n <= 3, m <= 5"))?;
        ensure(regenerate(file) == *file, || format!("{name} does not regenerate from its metadata"))?;
        kinds.insert(file.metadata.as_ref().unwrap().generator.clone());
    }
    ensure(kinds.len() == 5, || format!("only {} valuation kinds", kinds.len()))?;
    Ok(format!("{} + {} instances regenerate exactly, 5 kinds", corpus.len(), explicit().len()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let corpus = standard();
    let mut fractional = 0;
    for (name, file) in &corpus {
        let (instance, config) = setup(file);
        let (prepared, law) = exact_distribution(&instance, &config).map_err(|e| format!("{name}: {e}"))?;
        ensure(law.total_probability() == r(1, 1), || format!("{name}: atoms do not sum to 1"))?;
        let expected = prepared.p().clone() * prepared.primal().objective().clone();
        ensure(law.expected_welfare == expected, || {
            format!("{name}: welfare {} != p LPopt {expected}", law.expected_welfare)
        })?;
        if prepared.primal().entries().iter().any(|e| e.x != r(1, 1)) {
            fractional += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} instances ({fractional} with fractional optima), exact equality, {elapsed:.1?}",
        corpus.len()
    ))
}

fn criterion_2() -> Outcome {
    let mut entries = 0;
    for (name, file) in &standard() {
        let (instance, config) = setup(file);
        let (prepared, law) = exact_distribution(&instance, &config).map_err(|e| format!("{name}: {e}"))?;
        for e in &law.entries {
            entries += 1;
            let expected = prepared.p().clone() * e.x.clone();
            ensure(e.keep_marginal == expected, || {
                format!("{name}: bidder {} {} marginal {} != {expected}", e.bidder, e.bundle, e.keep_marginal)
            })?;
        }
    }
    Ok(format!("{entries} support entries, exact equality"))
}

fn criterion_3() -> Outcome {
    let rates = [r(1, 1), r(1, 2), r(1, 3), r(1, 4)];
    let mut checked = 0;
    let mut valuations = 0;
    for (name, file) in standard().iter().chain(explicit().iter()) {
        let instance = file.to_instance().unwrap();
        ensure(instance.items() <= 8, || format!("{name}: m > 8"))?;
        for v in instance.valuations() {
            valuations += 1;
            for c in &rates {
                for s in ItemSet::all(instance.items()) {
                    checked += 1;
                    let proxy = proxy_brute(v, c, s);
                    let bound = c.clone() * v.eval(s).unwrap();
                    ensure(proxy >= bound, || format!("{name}: v'({s}) = {proxy} < {bound} at c = {c}"))?;
                }
            }
        }
    }
    Ok(format!("{valuations} valuations x 4 rates, {checked} bundles, 0 violations"))
}

fn criterion_4() -> Outcome {
    let mut tight = 0;
    let corpus = standard();
    for (name, file) in &corpus {
        let (instance, config) = setup(file);
        let size = (instance.bidders() as u64).pow(instance.items() as u32);
        ensure(size <= 10_000_000, || format!("{name}: n^m = {size}"))?;
        let (prepared, law) = exact_distribution(&instance, &config).map_err(|e| format!("{name}: {e}"))?;
        let opt = integral_optimum(&instance);
        let bound = config.rate.to_rational() * prepared.p().clone() * opt;
        ensure(law.expected_welfare >= bound, || {
            format!("{name}: welfare {} < c p OPT {bound}", law.expected_welfare)
        })?;
        if law.expected_welfare == bound {
            tight += 1;
        }
    }
    Ok(format!("{} instances, {tight} with equality", corpus.len()))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let corpus = explicit();
    ensure(corpus.len() >= 10, || format!("only {} explicit instances", corpus.len()))?;
    let family = MisreportFamily::default();
    let (mut deviations, mut rejected) = (0, 0);
    for (name, file) in &corpus {
        let (instance, config) = setup(file);
        ensure(
            instance.valuations().iter().all(|v| v.kind_name() == "explicit"),
            || format!("{name}: not explicit"),
        )?;
        let report = check_truthfulness(&instance, &config, &family).map_err(|e| format!("{name}: {e}"))?;
        ensure(report.truthful_nonnegative, || format!("{name}: negative truthful utility"))?;
        if let Some(v) = report.entries.iter().find(|e| !e.holds) {
            return Err(format!(
                "{name}: bidder {} gains by {}: {:?} > {}",
                v.bidder, v.misreport, v.deviation_utility, v.truthful_utility
            ));
        }
        deviations += report.entries.len();
        rejected += report.rejected;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} instances, {deviations} deviations ({rejected} rejected by the mechanism), 0 profitable, {elapsed:.1?}",
        corpus.len()
    ))
}

fn criterion_6() -> Outcome {
    let m = 64;
    let (rate, _) = default_params(m).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut threshold = 0.0;
    for seed in 0..5 {
        let sol = random_feasible_solution(48, m, 3, 8, 1000 + seed).map_err(|e| e.to_string())?;
        let report = check_halt_frequency(&sol, 48, m, rate, 10_000, seed).map_err(|e| e.to_string())?;
        ensure(report.holds, || {
            format!("solution {seed}: halt frequency {} > {}", report.frequency, report.threshold)
        })?;
        worst = worst.max(report.frequency);
        threshold = report.threshold;
    }
    Ok(format!("c = {rate}, 5 solutions x 10^4 trials, max halt frequency {worst} <= {threshold:.6}"))
}

/// Every `n <= 2`, `m <= 3` instance in the corpora plus a seeded sweep.
fn small_instances() -> Vec<(String, Instance<Rational>, Rational)> {
    let mut out = Vec::new();
    for (name, file) in standard().iter().chain(explicit().iter()) {
        if file.bidders.len() <= 2 && file.m <= 3 {
            let (instance, config) = setup(file);
            out.push((name.clone(), instance, config.rate.to_rational()));
        }
    }
    let caps = Caps::default();
    for (idx, kind) in GeneratorKind::ALL.into_iter().enumerate() {
        for n in 1..=2 {
            for m in 2..=3 {
                for (k, c) in [r(1, 1), r(1, 2), r(1, 3)].into_iter().enumerate() {
                    let seed = (idx * 100 + n * 10 + m + 1000 * k) as u64;
                    let file = generate(kind, n, m, seed, &GeneratorParams::default(), &caps).unwrap();
                    out.push((format!("{kind} n={n} m={m} seed={seed}"), file.to_instance().unwrap(), c));
                }
            }
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let small = small_instances();
    for (name, instance, c) in &small {
        let rate = KeepRate::from_rational(c).unwrap();
        let config = MechanismConfig::new(rate, r(1, 20)).unwrap();
        let prepared = Prepared::new(instance, &config).map_err(|e| format!("{name}: {e}"))?;
        let oracle = lp_oracle(instance, c);
        ensure(*prepared.primal().objective() == oracle, || {
            format!("{name}: simplex {} != oracle {oracle}", prepared.primal().objective())
        })?;
    }
    let caps = Caps::default();
    let mut corpus = 0;
    for (name, file) in standard().iter().chain(explicit().iter()) {
        let (instance, config) = setup(file);
        let full = Prepared::new(&instance, &config).map_err(|e| format!("{name}: {e}"))?;
        let proxies = instance.proxies(config.rate, &caps);
        let cg = solve_column_generation(&proxies, instance.items(), &[], None, &caps, &QueryCounter::new())
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(cg.solution.primal.objective() == full.primal().objective(), || {
            format!("{name}: colgen {} != full {}", cg.solution.primal.objective(), full.primal().objective())
        })?;
        let via_config = Prepared::new(&instance, &config.clone().with_method(LpMethod::ColumnGeneration))
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(via_config.primal().objective() == full.primal().objective(), || {
            format!("{name}: colgen-configured mechanism disagrees")
        })?;
        corpus += 1;
    }
    Ok(format!(
        "{} small instances match the basis-enumeration oracle; colgen = full on {corpus} corpus instances",
        small.len()
    ))
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    let corpus = standard();
    for (idx, (name, file)) in corpus.iter().enumerate() {
        let (instance, config) = setup(file);
        let (prepared, law) = exact_distribution(&instance, &config).map_err(|e| format!("{name}: {e}"))?;
        let report = check_monte_carlo(&prepared, &law, &instance, 10_000, 9000 + idx as u64, 4.0)
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(report.holds, || {
            format!("{name}: mean {} vs exact {} (z = {:.2})", report.mean, report.exact, report.z)
        })?;
        worst = worst.max(report.z);
    }
    Ok(format!("{} instances x 10^4 trials, max |z| = {worst:.2} <= 4", corpus.len()))
}

fn criterion_9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_proxy-auction");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let instance = common::corpus_dir("standard").join("07-xos.json");
    let instance = instance.to_str().unwrap();
    let invoke = |out: &str, seed: &str, extra: &[&str]| {
        let path = dir.path().join(out);
        let mut args = vec!["run", instance, "--seed", seed, "--trials", "50", "--payments", "--json", "--out"];
        args.push(path.to_str().unwrap());
        args.extend_from_slice(extra);
        let output = Command::new(bin).args(&args).output().expect("spawn");
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        (output.stdout, std::fs::read(path).unwrap())
    };
    let (stdout_a, file_a) = invoke("a.json", "42", &[]);
    let (stdout_b, file_b) = invoke("b.json", "42", &[]);
    ensure(stdout_a == stdout_b && file_a == file_b, || "exact-mode reports differ".into())?;
    let (float_a, _) = invoke("c.json", "42", &["--mode", "float", "--q-variant", "literal"]);
    let (float_b, _) = invoke("d.json", "42", &["--mode", "float", "--q-variant", "literal"]);
    ensure(float_a == float_b, || "float-mode reports differ".into())?;
    let (other, _) = invoke("e.json", "43", &[]);
    ensure(other != stdout_a, || "changing the seed did not change the report".into())?;
    Ok(format!("{} byte reports identical across invocations (exact and float)", stdout_a.len()))
}

/// Bidder 0 holds item 0 outright; bidders 1 and 2 each take item 1 with
/// probability 1/2, so at `c = 1` the draw halts with probability 1/4 through
/// item 1 alone. The literal event only looks at items of `S_0 = {0}`.
fn overlap_case(variant: QVariant) -> (Prepared<Rational>, OutcomeDistribution<Rational>) {
    let instance = Instance::new(
        2,
        vec![
            Valuation::additive(vec![r(4, 1), r(0, 1)]),
            Valuation::additive(vec![r(0, 1), r(6, 1)]),
            Valuation::additive(vec![r(0, 1), r(6, 1)]),
        ],
    )
    .unwrap();
    let config = MechanismConfig::new(KeepRate::ONE, r(1, 20)).unwrap().with_q_variant(variant);
    let entry = |bidder, item, x| Assignment {
        bidder,
        bundle: ItemSet::singleton(item),
        x,
    };
    let sol = FractionalSolution::new(
        vec![entry(0, 0, r(1, 1)), entry(1, 1, r(1, 2)), entry(2, 1, r(1, 2))],
        r(10, 1),
    );
    let prepared = Prepared::from_solution(&instance, &config, sol).unwrap();
    let law = OutcomeDistribution::new(&prepared, &instance).unwrap();
    (prepared, law)
}

fn criterion_10() -> Outcome {
    let (prepared, law) = overlap_case(QVariant::Literal);
    let report = keep_marginals(&prepared, &law);
    let deficit = report
        .deficits()
        .find(|e| e.bidder == 0)
        .ok_or_else(|| "no deficit under the literal variant".to_string())?;
    // P(no halt | S_0 = {0}) = 1 - 1/4, so the literal marginal is 3/4 p.
    let expected_gap = r(1, 20) * r(1, 4);
    ensure(deficit.gap.as_str() == proxy_auction::scalar::format_rational(&expected_gap), || {
        format!("gap {} != {expected_gap}", deficit.gap)
    })?;
    ensure(!report.asserted, || "literal variant must not be asserted".into())?;
    let (halt_prepared, halt_law) = overlap_case(QVariant::HaltConditional);
    ensure(keep_marginals(&halt_prepared, &halt_law).holds, || {
        "halt-conditional variant is not exact on the overlap case".into()
    })?;
    ensure(law.expected_welfare < halt_law.expected_welfare || law.expected_welfare.is_zero(), || {
        "literal welfare unexpectedly not below".into()
    })?;
    Ok(format!(
        "literal q_0 = {}, marginal {} < p x = {}, gap {} ({})",
        deficit.q,
        deficit.actual,
        deficit.expected,
        deficit.gap,
        serde_json::to_string(deficit).unwrap()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("0", "bundled corpus reproducible", corpus_sanity),
        ("1", "exact welfare identity", criterion_1),
        ("2", "keep-marginal identity", criterion_2),
        ("3", "proxy bound v'(S) >= c v(S)", criterion_3),
        ("4", "approximation bound", criterion_4),
        ("5", "truthfulness in expectation", criterion_5),
        ("6", "halt frequency at m = 64", criterion_6),
        ("7", "LP cross-validation", criterion_7),
        ("8", "Monte Carlo consistency", criterion_8),
        ("9", "report determinism", criterion_9),
        ("10", "literal q deficit", criterion_10),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
