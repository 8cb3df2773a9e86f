//! The `solve`, `run`, `verify` and `bench` commands as library functions
//! returning serializable reports. The binary only parses flags and prints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::format::{InstanceFile, Number, OutcomeRecord};
use crate::instance::Instance;
use crate::items::ItemSet;
use crate::lp::{build_full_lp, certify, solve_column_generation, solve_exact, ConfigLp, LpSolution};
use crate::mechanism::{LpMethod, MechanismConfig, Prepared, QVariant, Streams};
use crate::scalar::{format_rational, Arithmetic, Rational, Scalar};
use crate::valuations::{KeepRate, QueryCounter, QueryCounts, Valuation};
use crate::verify::{self, MisreportFamily, OutcomeDistribution};

/// Where a parameter value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Flag,
    Instance,
    Default,
}

/// Parameter overrides shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub c: Option<Rational>,
    pub p: Option<Rational>,
    pub q_variant: Option<QVariant>,
    pub arithmetic: Option<Arithmetic>,
    pub method: Option<LpMethod>,
    pub caps: Option<Caps>,
    pub seed: Option<u64>,
}

impl Overrides {
    /// Flags, then the instance metadata, then the built-in defaults.
    pub fn resolve(&self, file: &InstanceFile) -> Result<(MechanismConfig, ConfigEcho)> {
        let source = |flag: bool, key: &str| {
            if flag {
                Source::Flag
            } else if file.param(key).is_some() {
                Source::Instance
            } else {
                Source::Default
            }
        };
        let config = file
            .config(self.c.as_ref(), self.p.as_ref())?
            .with_q_variant(self.q_variant.unwrap_or_default())
            .with_arithmetic(self.arithmetic.unwrap_or(Arithmetic::Exact))
            .with_method(self.method.unwrap_or_default())
            .with_caps(self.caps.unwrap_or_default())
            .with_seed(self.seed.unwrap_or(0));
        let echo = ConfigEcho {
            c: config.rate.to_string(),
            c_source: source(self.c.is_some(), "c"),
            p: format_rational(&config.p),
            p_source: source(self.p.is_some(), "p"),
            q_variant: config.q_variant,
            arithmetic: config.arithmetic,
            method: config.method,
            seed: config.seed,
            caps: config.caps.to_string(),
        };
        Ok((config, echo))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub c: String,
    pub c_source: Source,
    pub p: String,
    pub p_source: Source,
    pub q_variant: QVariant,
    pub arithmetic: Arithmetic,
    pub method: LpMethod,
    pub seed: u64,
    pub caps: String,
}

/// Which readings of the construction were active for a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interpretation {
    pub p: String,
    pub cancellation: String,
    pub q_event: String,
    pub c_rounding: String,
}

impl Interpretation {
    pub fn of(variant: QVariant) -> Self {
        Interpretation {
            p: "survival probability: the allocation is kept with overall probability p".into(),
            cancellation: "bidder i keeps its lottery winnings with probability p/(1-q_i); \
                           requires q_i <= 1-p for every support bundle, otherwise an error"
                .into(),
            q_event: match variant {
                QVariant::HaltConditional => {
                    "halt-conditional: q_i = P(the halt rule fires on any item | i's tentative bundle)"
                }
                QVariant::Literal => {
                    "literal: q_i = P(some item of S_i is held by more than 1/c - 1 other bidders)"
                }
            }
            .into(),
            c_rounding: "default c = 1/ceil(100 log2 m / log2 log2 m), rounded down to a unit fraction".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub entries: Vec<(String, f64)>,
}

impl Timings {
    fn record<R>(&mut self, label: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.entries.push((label.to_string(), start.elapsed().as_secs_f64()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportRow {
    pub bidder: usize,
    pub bundle: ItemSet,
    pub x: Number,
    pub value: Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Raw,
    #[default]
    Proxy,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Raw => "raw",
            Objective::Proxy => "proxy",
        })
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Objective::Raw),
            "proxy" => Ok(Objective::Proxy),
            _ => Err(Error::Parse(format!("objective must be raw or proxy, got {s:?}"))),
        }
    }
}

struct Solved<T> {
    solution: LpSolution<T>,
    lp: Option<ConfigLp<T>>,
    rounds: Option<usize>,
    columns: usize,
    queries: QueryCounts,
}

fn solve_lp<T: Scalar>(instance: &Instance<T>, rate: KeepRate, method: LpMethod, caps: &Caps) -> Result<Solved<T>> {
    let proxies = instance.proxies(rate, caps);
    let counter = QueryCounter::new();
    let m = instance.items();
    match method {
        LpMethod::Full => {
            let lp = build_full_lp(&proxies, m, caps, &counter)?;
            let solution = solve_exact(&lp)?;
            let columns = lp.columns().len();
            Ok(Solved {
                solution,
                lp: Some(lp),
                rounds: None,
                columns,
                queries: counter.snapshot(),
            })
        }
        LpMethod::ColumnGeneration => {
            let cg = solve_column_generation(&proxies, m, &[], None, caps, &counter)?;
            Ok(Solved {
                solution: cg.solution,
                lp: None,
                rounds: Some(cg.rounds),
                columns: cg.columns,
                queries: counter.snapshot(),
            })
        }
    }
}

fn support_rows<T: Scalar>(solution: &LpSolution<T>, instance: &Instance<T>, rate: KeepRate, caps: &Caps) -> Result<Vec<SupportRow>> {
    let proxies = instance.proxies(rate, caps);
    solution
        .primal
        .entries()
        .iter()
        .map(|e| {
            Ok(SupportRow {
                bidder: e.bidder,
                bundle: e.bundle,
                x: Number::of(&e.x),
                value: Number::of(&proxies[e.bidder].eval(e.bundle)?),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub command: String,
    pub instance: String,
    pub objective_kind: Objective,
    /// Keep rate of the objective; `1/1` for the raw valuations.
    pub c: String,
    pub method: LpMethod,
    pub arithmetic: Arithmetic,
    pub objective: Number,
    pub support: Vec<SupportRow>,
    pub item_duals: Vec<Number>,
    pub bidder_duals: Vec<Number>,
    pub pivots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colgen_rounds: Option<usize>,
    pub columns: usize,
    /// Duality certificate against the full LP; `None` when it exceeds the caps.
    pub certified: Option<bool>,
    pub queries: QueryCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub fn solve(path: &Path, overrides: &Overrides, objective: Objective, timings: bool) -> Result<SolveReport> {
    let file = InstanceFile::read(path)?;
    let (config, _) = overrides.resolve(&file)?;
    let rate = match objective {
        Objective::Raw => KeepRate::ONE,
        Objective::Proxy => config.rate,
    };
    let exact = file.to_instance()?;
    match config.arithmetic {
        Arithmetic::Exact => solve_typed(path, &exact, rate, objective, &config, timings),
        Arithmetic::Float => solve_typed(path, &exact.to_float(), rate, objective, &config, timings),
    }
}

fn solve_typed<T: Scalar>(
    path: &Path,
    instance: &Instance<T>,
    rate: KeepRate,
    objective: Objective,
    config: &MechanismConfig,
    with_timings: bool,
) -> Result<SolveReport> {
    let mut timings = Timings::default();
    let solved = timings.record("solve", || solve_lp(instance, rate, config.method, &config.caps))?;
    let certified = match &solved.lp {
        Some(lp) => Some(certify(lp, &solved.solution).is_ok()),
        None => {
            let counter = QueryCounter::new();
            match build_full_lp(&instance.proxies(rate, &config.caps), instance.items(), &config.caps, &counter) {
                Ok(lp) => Some(certify(&lp, &solved.solution).is_ok()),
                Err(Error::Capacity { .. }) => None,
                Err(e) => return Err(e),
            }
        }
    };
    Ok(SolveReport {
        command: "solve".into(),
        instance: path.display().to_string(),
        objective_kind: objective,
        c: rate.to_string(),
        method: config.method,
        arithmetic: T::MODE,
        objective: Number::of(solved.solution.primal.objective()),
        support: support_rows(&solved.solution, instance, rate, &config.caps)?,
        item_duals: solved.solution.item_duals.iter().map(Number::of).collect(),
        bidder_duals: solved.solution.bidder_duals.iter().map(Number::of).collect(),
        pivots: solved.solution.pivots,
        colgen_rounds: solved.rounds,
        columns: solved.columns,
        certified,
        queries: solved.queries,
        timings: with_timings.then_some(timings),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QRow {
    pub bidder: usize,
    pub bundle: ItemSet,
    pub q: Number,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials: u64,
    pub halts: u64,
    pub mean_welfare: Number,
    /// `p` times the proxy LP optimum.
    pub expected_welfare: Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub instance: String,
    pub config: ConfigEcho,
    pub interpretation: Interpretation,
    pub raw_lp_objective: Number,
    pub proxy_lp_objective: Number,
    pub support: Vec<SupportRow>,
    pub q_table: Vec<QRow>,
    /// One record per trial; omitted with `summary_only`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<OutcomeRecord>,
    pub summary: RunSummary,
    /// Expected VCG charges over the range, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payments: Option<Vec<Number>>,
    pub queries: QueryCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub trials: u64,
    pub payments: bool,
    pub summary_only: bool,
    pub timings: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            trials: 1,
            payments: false,
            summary_only: false,
            timings: false,
        }
    }
}

/// Seeds for `trials` replications: the seed itself for a single trial,
/// derived seeds otherwise.
pub fn trial_seeds(seed: u64, trials: u64) -> Vec<u64> {
    if trials == 1 {
        vec![seed]
    } else {
        let streams = Streams::new(seed);
        (0..trials).map(|t| streams.derive_seed(t)).collect()
    }
}

pub fn run(path: &Path, overrides: &Overrides, options: &RunOptions) -> Result<RunReport> {
    if options.trials == 0 {
        return Err(Error::Parameter("--trials must be at least 1".into()));
    }
    let file = InstanceFile::read(path)?;
    let (config, echo) = overrides.resolve(&file)?;
    let exact = file.to_instance()?;
    match config.arithmetic {
        Arithmetic::Exact => run_typed(path, &exact, &config, echo, options),
        Arithmetic::Float => run_typed(path, &exact.to_float(), &config, echo, options),
    }
}

fn run_typed<T: Scalar>(
    path: &Path,
    instance: &Instance<T>,
    config: &MechanismConfig,
    echo: ConfigEcho,
    options: &RunOptions,
) -> Result<RunReport> {
    let mut timings = Timings::default();
    let raw = timings.record("raw lp", || solve_lp(instance, KeepRate::ONE, config.method, &config.caps))?;
    let prepared = timings.record("prepare", || Prepared::new(instance, config))?;
    let seeds = trial_seeds(config.seed, options.trials);
    let outcomes = timings.record("sample", || {
        seeds
            .par_iter()
            .map(|&seed| {
                let outcome = prepared.sample(seed)?;
                let welfare = outcome.welfare(instance)?;
                Ok((OutcomeRecord::of(seed, &outcome, &welfare), welfare))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let payments = if options.payments {
        Some(timings.record("payments", || prepared.payments())?)
    } else {
        None
    };
    let total = outcomes.iter().fold(T::zero(), |acc, (_, w)| acc + w.clone());
    let halts = outcomes.iter().filter(|(r, _)| r.halted).count() as u64;
    let mean = total / T::from_int(options.trials as i64);
    let expected = prepared.p().clone() * prepared.primal().objective().clone();
    let q_table = (0..prepared.bidders())
        .flat_map(|i| {
            prepared
                .primal()
                .bidder_support(i)
                .map(move |e| (i, e.bundle))
                .collect::<Vec<_>>()
        })
        .map(|(i, b)| {
            Ok(QRow {
                bidder: i,
                bundle: b,
                q: Number::of(prepared.q(i, b)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let queries = raw.queries + prepared.queries();
    Ok(RunReport {
        command: "run".into(),
        instance: path.display().to_string(),
        interpretation: Interpretation::of(config.q_variant),
        config: echo,
        raw_lp_objective: Number::of(raw.solution.primal.objective()),
        proxy_lp_objective: Number::of(prepared.primal().objective()),
        support: support_rows(prepared.solution(), instance, config.rate, &config.caps)?,
        q_table,
        outcomes: if options.summary_only {
            Vec::new()
        } else {
            outcomes.into_iter().map(|(r, _)| r).collect()
        },
        summary: RunSummary {
            trials: options.trials,
            halts,
            mean_welfare: Number::of(&mean),
            expected_welfare: Number::of(&expected),
        },
        payments: payments.map(|p| p.charges.iter().map(Number::of).collect()),
        queries,
        timings: options.timings.then_some(timings),
    })
}

/// Checks `verify` can run on each instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Valuations,
    ProxyBound,
    Lp,
    Welfare,
    Marginals,
    Thinning,
    Approximation,
    Truthfulness,
    MonteCarlo,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::Valuations,
        Check::ProxyBound,
        Check::Lp,
        Check::Welfare,
        Check::Marginals,
        Check::Thinning,
        Check::Approximation,
        Check::Truthfulness,
        Check::MonteCarlo,
    ];

    pub const DEFAULT: [Check; 7] = [
        Check::Valuations,
        Check::ProxyBound,
        Check::Lp,
        Check::Welfare,
        Check::Marginals,
        Check::Thinning,
        Check::Approximation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Valuations => "valuations",
            Check::ProxyBound => "proxy-bound",
            Check::Lp => "lp",
            Check::Welfare => "welfare",
            Check::Marginals => "marginals",
            Check::Thinning => "thinning",
            Check::Approximation => "approximation",
            Check::Truthfulness => "truthfulness",
            Check::MonteCarlo => "monte-carlo",
        }
    }

    /// Parses a comma-separated list; `all` and `default` expand.
    pub fn parse_list(s: &str) -> Result<Vec<Check>> {
        let mut out = Vec::new();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "all" => out.extend(Check::ALL),
                "default" => out.extend(Check::DEFAULT),
                _ => out.push(
                    Check::ALL
                        .into_iter()
                        .find(|c| c.name() == name)
                        .ok_or_else(|| Error::Parse(format!("unknown check {name:?}")))?,
                ),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Failed, but the check is informational under the active settings.
    Reported,
    /// Beyond the enumeration caps.
    Skipped,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub status: Status,
    pub asserted: bool,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub detail: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl CheckResult {
    fn from_outcome<R: Serialize>(check: Check, asserted: bool, outcome: Result<(bool, R)>) -> Self {
        match outcome {
            Ok((holds, detail)) => CheckResult {
                check,
                status: match (holds, asserted) {
                    (true, _) => Status::Pass,
                    (false, true) => Status::Fail,
                    (false, false) => Status::Reported,
                },
                asserted,
                detail: serde_json::to_value(detail).unwrap_or(serde_json::Value::Null),
                message: None,
            },
            Err(e) => CheckResult {
                check,
                status: if matches!(e, Error::Capacity { .. }) {
                    Status::Skipped
                } else {
                    Status::Error
                },
                asserted,
                detail: serde_json::Value::Null,
                message: Some(e.to_string()),
            },
        }
    }

    /// Counts against the exit status.
    pub fn failed(&self) -> bool {
        matches!(self.status, Status::Fail | Status::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceVerification {
    pub instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigEcho>,
    pub checks: Vec<CheckResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InstanceVerification {
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.checks.iter().any(CheckResult::failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub instances: usize,
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub reported: usize,
    pub skipped: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub command: String,
    pub checks: Vec<Check>,
    pub q_variant: QVariant,
    pub arithmetic: Arithmetic,
    pub interpretation: Interpretation,
    pub instances: Vec<InstanceVerification>,
    pub summary: VerifySummary,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub checks: Vec<Check>,
    /// Rates for the proxy-bound check.
    pub bound_rates: Vec<KeepRate>,
    pub trials: u64,
    pub sigmas: f64,
    pub family: MisreportFamily,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            checks: Check::DEFAULT.to_vec(),
            bound_rates: (1..=4).map(|k| KeepRate::new(k).expect("positive")).collect(),
            trials: 10_000,
            sigmas: 4.0,
            family: MisreportFamily::default(),
        }
    }
}

/// Instance files under `path`: the file itself, or every `*.json` in the
/// directory in name order.
pub fn instance_paths(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        Ok(paths)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

pub fn verify(path: &Path, overrides: &Overrides, options: &VerifyOptions) -> Result<VerifyReport> {
    let paths = instance_paths(path)?;
    if paths.is_empty() {
        return Err(Error::Parameter(format!("no instance files under {}", path.display())));
    }
    let instances: Vec<InstanceVerification> = paths
        .par_iter()
        .map(|p| verify_file(p, overrides, options))
        .collect();
    let all: Vec<&CheckResult> = instances.iter().flat_map(|i| &i.checks).collect();
    let count = |s: Status| all.iter().filter(|c| c.status == s).count();
    let summary = VerifySummary {
        instances: instances.len(),
        checks: all.len(),
        passed: count(Status::Pass),
        failed: count(Status::Fail),
        reported: count(Status::Reported),
        skipped: count(Status::Skipped),
        errors: count(Status::Error) + instances.iter().filter(|i| i.error.is_some()).count(),
    };
    let variant = overrides.q_variant.unwrap_or_default();
    Ok(VerifyReport {
        command: "verify".into(),
        checks: options.checks.clone(),
        q_variant: variant,
        arithmetic: overrides.arithmetic.unwrap_or(Arithmetic::Exact),
        interpretation: Interpretation::of(variant),
        passed: !instances.iter().any(InstanceVerification::failed),
        instances,
        summary,
    })
}

fn verify_file(path: &Path, overrides: &Overrides, options: &VerifyOptions) -> InstanceVerification {
    let name = path.display().to_string();
    let loaded = InstanceFile::read(path).and_then(|file| {
        let (config, echo) = overrides.resolve(&file)?;
        Ok((file.to_instance()?, config, echo))
    });
    match loaded {
        Ok((exact, config, echo)) => {
            let checks = match config.arithmetic {
                Arithmetic::Exact => run_checks(&exact, &config, options),
                Arithmetic::Float => run_checks(&exact.to_float(), &config, options),
            };
            InstanceVerification {
                instance: name,
                config: Some(echo),
                checks,
                error: None,
            }
        }
        Err(e) => InstanceVerification {
            instance: name,
            config: None,
            checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Runs the selected checks on one instance. Law-based checks share one
/// enumeration.
pub fn run_checks<T: Scalar>(
    instance: &Instance<T>,
    config: &MechanismConfig,
    options: &VerifyOptions,
) -> Vec<CheckResult> {
    let halt = config.q_variant == QVariant::HaltConditional;
    let needs_law = options.checks.iter().any(|c| {
        matches!(
            c,
            Check::Welfare | Check::Marginals | Check::Thinning | Check::Approximation | Check::MonteCarlo
        )
    });
    let law: Option<Result<(Prepared<T>, OutcomeDistribution<T>)>> =
        needs_law.then(|| verify::exact_distribution(instance, config));
    let with_law = |f: &dyn Fn(&Prepared<T>, &OutcomeDistribution<T>) -> Result<(bool, serde_json::Value)>| {
        match law.as_ref().expect("law computed for law-based checks") {
            Ok((prepared, dist)) => f(prepared, dist),
            Err(e) => Err(clone_error(e)),
        }
    };
    options
        .checks
        .iter()
        .map(|&check| match check {
            Check::Valuations => CheckResult::from_outcome(check, true, valuation_checks(instance, &config.caps)),
            Check::ProxyBound => CheckResult::from_outcome(
                check,
                true,
                instance
                    .valuations()
                    .iter()
                    .map(|v| verify::check_proxy_bound(v, &options.bound_rates, &config.caps))
                    .collect::<Result<Vec<_>>>()
                    .map(|reports| (reports.iter().all(|r| r.holds), reports)),
            ),
            Check::Lp => CheckResult::from_outcome(
                check,
                true,
                verify::check_lp(instance, config.rate, &config.caps).map(|r| (r.holds && r.certified, r)),
            ),
            Check::Welfare => CheckResult::from_outcome(
                check,
                halt,
                with_law(&|p, d| {
                    let r = verify::welfare_identity(p, d);
                    Ok((r.holds, json(&r)))
                }),
            ),
            Check::Marginals => CheckResult::from_outcome(
                check,
                halt,
                with_law(&|p, d| {
                    let r = verify::keep_marginals(p, d);
                    Ok((r.holds, json(&r)))
                }),
            ),
            Check::Thinning => CheckResult::from_outcome(
                check,
                true,
                with_law(&|_, d| {
                    let r = verify::check_conditional_thinning(d);
                    Ok((r.holds, json(&r)))
                }),
            ),
            Check::Approximation => CheckResult::from_outcome(
                check,
                halt,
                with_law(&|p, d| {
                    let r = verify::approximation(p, d, instance)?;
                    Ok((r.holds, json(&r)))
                }),
            ),
            Check::MonteCarlo => CheckResult::from_outcome(
                check,
                true,
                with_law(&|p, d| {
                    let r = verify::check_monte_carlo(p, d, instance, options.trials, config.seed, options.sigmas)?;
                    Ok((r.holds, json(&r)))
                }),
            ),
            Check::Truthfulness => {
                let asserted = halt && T::MODE == Arithmetic::Exact;
                CheckResult::from_outcome(
                    check,
                    asserted,
                    verify::check_truthfulness(instance, config, &options.family).map(|r| (r.holds, r)),
                )
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationCheck {
    pub bidder: usize,
    pub kind: String,
    pub subadditive: bool,
    pub monotone_normalized: bool,
}

fn valuation_checks<T: Scalar>(instance: &Instance<T>, caps: &Caps) -> Result<(bool, Vec<ValuationCheck>)> {
    let rows = instance
        .valuations()
        .iter()
        .enumerate()
        .map(|(bidder, v): (usize, &Valuation<T>)| {
            Ok(ValuationCheck {
                bidder,
                kind: v.kind_name().to_string(),
                subadditive: v.is_subadditive(caps)?,
                monotone_normalized: v.is_monotone_normalized(caps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows.iter().all(|r| r.subadditive && r.monotone_normalized), rows))
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Capacity { what, actual, cap } => Error::Capacity {
            what,
            actual: *actual,
            cap: *cap,
        },
        Error::KeepProbability { bidder, q, p } => Error::KeepProbability {
            bidder: *bidder,
            q: q.clone(),
            p: p.clone(),
        },
        other => Error::Diagnostics(other.to_string()),
    }
}

fn json<R: Serialize>(value: &R) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub bidders: usize,
    pub items: usize,
    pub full_exact: Option<f64>,
    pub colgen_exact: Option<f64>,
    pub full_float: Option<f64>,
    pub prepare: Option<f64>,
    pub sample_per_trial: Option<f64>,
    pub colgen_rounds: Option<usize>,
    pub demand_queries: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub command: String,
    pub trials: u64,
    pub rows: Vec<BenchRow>,
}

/// Wall-clock timings; instances run one after another so they do not
/// compete for cores.
pub fn bench(path: &Path, overrides: &Overrides, trials: u64) -> Result<BenchReport> {
    let mut rows = Vec::new();
    for p in instance_paths(path)? {
        let file = InstanceFile::read(&p)?;
        let (config, _) = overrides.resolve(&file)?;
        let exact = file.to_instance()?;
        let caps = config.caps;
        let time = |f: &dyn Fn() -> Result<()>| -> Option<f64> {
            let start = Instant::now();
            f().ok().map(|_| start.elapsed().as_secs_f64())
        };
        let full_exact = time(&|| solve_lp(&exact, config.rate, LpMethod::Full, &caps).map(drop));
        let colgen = solve_lp(&exact, config.rate, LpMethod::ColumnGeneration, &caps).ok();
        let colgen_exact = time(&|| solve_lp(&exact, config.rate, LpMethod::ColumnGeneration, &caps).map(drop));
        let float = exact.to_float();
        let full_float = time(&|| solve_lp(&float, config.rate, LpMethod::Full, &caps).map(drop));
        let start = Instant::now();
        let prepared = Prepared::new(&exact, &config);
        let prepare = prepared.is_ok().then(|| start.elapsed().as_secs_f64());
        let sample_per_trial = prepared.as_ref().ok().and_then(|prep| {
            let start = Instant::now();
            for seed in trial_seeds(config.seed, trials.max(2)) {
                prep.sample(seed).ok()?;
            }
            Some(start.elapsed().as_secs_f64() / trials.max(2) as f64)
        });
        rows.push(BenchRow {
            instance: p.display().to_string(),
            bidders: exact.bidders(),
            items: exact.items(),
            full_exact,
            colgen_exact,
            full_float,
            prepare,
            sample_per_trial,
            colgen_rounds: colgen.as_ref().and_then(|c| c.rounds),
            demand_queries: colgen.as_ref().map(|c| c.queries.demand_queries),
        });
    }
    Ok(BenchReport {
        command: "bench".into(),
        trials,
        rows,
    })
}

/// Plain-text table for terminals.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for row in rows {
        out.push('\n');
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out.push('\n');
    out
}
