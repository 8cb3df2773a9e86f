use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use proxy_auction::caps::Caps;
use proxy_auction::commands::{
    self, Check, Objective, Overrides, RunOptions, RunReport, SolveReport, VerifyOptions, VerifyReport,
};
use proxy_auction::generate::{self, GeneratorKind, GeneratorParams};
use proxy_auction::mechanism::LpMethod;
use proxy_auction::scalar::parse_rational;
use proxy_auction::{Arithmetic, Error, QVariant, Rational, Result};

#[derive(Parser)]
#[command(name = "proxy-auction", version, about = "Truthful-in-expectation auctions via proxy valuations and LP rounding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance, or a whole corpus, as JSON.
    Generate(GenerateArgs),
    /// Solve the configuration LP and print objective, support and duals.
    Solve(SolveArgs),
    /// Run the mechanism once or over derived-seed replications.
    Run(RunArgs),
    /// Run verification checks on an instance file or a directory of them.
    Verify(VerifyArgs),
    /// Time LP solving, preparation and sampling.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CorpusKind {
    Standard,
    Explicit,
}

#[derive(Args)]
struct GenerateArgs {
    /// additive | unit-demand | xos | coverage | explicit-subadditive
    #[arg(long, value_parser = parse_from_str::<GeneratorKind>, required_unless_present = "corpus")]
    kind: Option<GeneratorKind>,
    #[arg(long, required_unless_present = "corpus")]
    bidders: Option<usize>,
    #[arg(long, required_unless_present = "corpus")]
    items: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// key=value generator parameters: max-weight, clauses, elements, c, p.
    #[arg(long = "param")]
    params: Vec<String>,
    /// Generate a named corpus into the --out directory instead of one instance.
    #[arg(long, value_enum, conflicts_with_all = ["kind", "bidders", "items", "params"])]
    corpus: Option<CorpusKind>,
    #[arg(long, default_value_t = 24)]
    count: usize,
    #[arg(long, value_parser = parse_from_str::<Caps>)]
    caps: Option<Caps>,
    /// Output file (directory with --corpus). Single instances go to stdout without it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// Keep rate c = 1/k as a rational string.
    #[arg(long, value_parser = parse_rational)]
    c: Option<Rational>,
    /// Survival probability p as a rational string.
    #[arg(long, value_parser = parse_rational)]
    p: Option<Rational>,
    /// literal | halt
    #[arg(long, value_parser = parse_from_str::<QVariant>)]
    q_variant: Option<QVariant>,
    /// exact | float
    #[arg(long, value_parser = parse_from_str::<Arithmetic>)]
    mode: Option<Arithmetic>,
    #[arg(long)]
    seed: Option<u64>,
    /// full | colgen
    #[arg(long, value_parser = parse_from_str::<LpMethod>)]
    method: Option<LpMethod>,
    /// e.g. subsets=20,lp=12,table=8,check=12,atoms=10000000
    #[arg(long, value_parser = parse_from_str::<Caps>)]
    caps: Option<Caps>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            c: self.c.clone(),
            p: self.p.clone(),
            q_variant: self.q_variant,
            arithmetic: self.mode,
            method: self.method,
            caps: self.caps,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct Output {
    /// Print the JSON report instead of a table.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// raw | proxy
    #[arg(long, default_value = "proxy", value_parser = parse_from_str::<Objective>)]
    objective: Objective,
    /// Include wall-clock timings (makes reports differ between runs).
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct RunArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Compute expected VCG charges over the range.
    #[arg(long)]
    payments: bool,
    /// Leave per-trial outcomes out of the report.
    #[arg(long)]
    summary_only: bool,
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    path: PathBuf,
    /// Comma-separated checks, or `default` / `all`.
    #[arg(long, default_value = "default")]
    checks: String,
    /// Monte Carlo trials.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Monte Carlo tolerance in standard errors.
    #[arg(long, default_value_t = 4.0)]
    sigmas: f64,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BenchArgs {
    path: PathBuf,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    output: Output,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Returns false when an asserted check failed.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Generate(args) => generate_cmd(args).map(|_| true),
        Command::Solve(args) => {
            let report = commands::solve(&args.instance, &args.common.overrides(), args.objective, args.timings)?;
            emit(&report, &args.output, solve_table)?;
            Ok(true)
        }
        Command::Run(args) => {
            let options = RunOptions {
                trials: args.trials,
                payments: args.payments,
                summary_only: args.summary_only,
                timings: args.timings,
            };
            let report = commands::run(&args.instance, &args.common.overrides(), &options)?;
            emit(&report, &args.output, run_table)?;
            Ok(true)
        }
        Command::Verify(args) => {
            let options = VerifyOptions {
                checks: Check::parse_list(&args.checks)?,
                trials: args.trials,
                sigmas: args.sigmas,
                ..VerifyOptions::default()
            };
            let report = commands::verify(&args.path, &args.common.overrides(), &options)?;
            emit(&report, &args.output, verify_table)?;
            Ok(report.passed)
        }
        Command::Bench(args) => {
            let report = commands::bench(&args.path, &args.common.overrides(), args.trials)?;
            emit(&report, &args.output, |r| {
                let fmt = |t: Option<f64>| t.map_or("-".to_string(), |t| format!("{:.3}ms", t * 1e3));
                let rows: Vec<Vec<String>> = r
                    .rows
                    .iter()
                    .map(|row| {
                        vec![
                            row.instance.clone(),
                            format!("{}x{}", row.bidders, row.items),
                            fmt(row.full_exact),
                            fmt(row.colgen_exact),
                            fmt(row.full_float),
                            fmt(row.prepare),
                            fmt(row.sample_per_trial),
                            row.colgen_rounds.map_or("-".into(), |r| r.to_string()),
                        ]
                    })
                    .collect();
                commands::table(
                    &["instance", "n x m", "full", "colgen", "full f64", "prepare", "sample", "rounds"],
                    &rows,
                )
            })?;
            Ok(true)
        }
    }
}

fn generate_cmd(args: GenerateArgs) -> Result<()> {
    let caps = args.caps.unwrap_or_default();
    if let Some(corpus) = args.corpus {
        let dir = args
            .out
            .ok_or_else(|| Error::Parameter("--corpus needs --out DIR".into()))?;
        std::fs::create_dir_all(&dir)?;
        let files = match corpus {
            CorpusKind::Standard => generate::standard_corpus(args.count, args.seed, &caps)?,
            CorpusKind::Explicit => generate::explicit_corpus(args.count, args.seed, &caps)?,
        };
        for (idx, file) in files.iter().enumerate() {
            let kind = file
                .metadata
                .as_ref()
                .and_then(|m| m.generator.clone())
                .unwrap_or_else(|| "instance".into());
            let path = dir.join(format!("{idx:02}-{kind}.json"));
            file.write(&path)?;
            println!("{}", path.display());
        }
        return Ok(());
    }
    let (Some(kind), Some(n), Some(m)) = (args.kind, args.bidders, args.items) else {
        return Err(Error::Parameter("--kind, --bidders and --items are required".into()));
    };
    let params = GeneratorParams::parse(&args.params)?;
    let file = generate::generate(kind, n, m, args.seed, &params, &caps)?;
    match args.out {
        Some(path) => file.write(&path)?,
        None => print!("{}", file.to_json()?),
    }
    Ok(())
}

fn emit<R: Serialize>(report: &R, output: &Output, table: impl Fn(&R) -> String) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    if let Some(path) = &output.out {
        write_file(path, &json)?;
    }
    if output.json {
        print!("{json}");
    } else {
        print!("{}", table(report));
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(std::fs::write(path, text)?)
}

fn solve_table(r: &SolveReport) -> String {
    let mut out = format!(
        "{}: {} objective at c = {} ({}, {}) = {}\n",
        r.instance, r.objective_kind, r.c, r.method, r.arithmetic, r.objective
    );
    if let Some(certified) = r.certified {
        out.push_str(&format!("duality certificate: {}\n", if certified { "ok" } else { "FAILED" }));
    }
    let rows: Vec<Vec<String>> = r
        .support
        .iter()
        .map(|s| vec![s.bidder.to_string(), s.bundle.to_string(), s.x.to_string(), s.value.to_string()])
        .collect();
    out.push_str(&commands::table(&["bidder", "bundle", "x", "value"], &rows));
    let join = |v: &[proxy_auction::format::Number]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    out.push_str(&format!("item duals:   {}\n", join(&r.item_duals)));
    out.push_str(&format!("bidder duals: {}\n", join(&r.bidder_duals)));
    out
}

fn run_table(r: &RunReport) -> String {
    const SHOWN: usize = 20;
    let c = &r.config;
    let mut out = format!(
        "{}: c = {} ({:?}), p = {} ({:?}), q = {}, {}, seed {}\n",
        r.instance, c.c, c.c_source, c.p, c.p_source, c.q_variant, c.arithmetic, c.seed
    );
    out.push_str(&format!(
        "LP optimum: raw {}, proxy {}\n",
        r.raw_lp_objective, r.proxy_lp_objective
    ));
    let q_rows: Vec<Vec<String>> = r
        .q_table
        .iter()
        .map(|q| vec![q.bidder.to_string(), q.bundle.to_string(), q.q.to_string()])
        .collect();
    out.push_str(&commands::table(&["bidder", "bundle", "q"], &q_rows));
    if !r.outcomes.is_empty() {
        let rows: Vec<Vec<String>> = r
            .outcomes
            .iter()
            .take(SHOWN)
            .map(|o| {
                let bundles = o.bundles.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
                vec![o.seed.to_string(), o.halted.to_string(), bundles, o.welfare.to_string()]
            })
            .collect();
        out.push_str(&commands::table(&["seed", "halted", "bundles", "welfare"], &rows));
        if r.outcomes.len() > SHOWN {
            out.push_str(&format!("... {} more\n", r.outcomes.len() - SHOWN));
        }
    }
    let s = &r.summary;
    out.push_str(&format!(
        "trials {}, halts {}, mean welfare {}, expected welfare {}\n",
        s.trials, s.halts, s.mean_welfare, s.expected_welfare
    ));
    if let Some(payments) = &r.payments {
        let p = payments.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        out.push_str(&format!("payments: {p}\n"));
    }
    out
}

fn verify_table(r: &VerifyReport) -> String {
    let mut rows = Vec::new();
    for inst in &r.instances {
        if let Some(e) = &inst.error {
            rows.push(vec![inst.instance.clone(), "-".into(), "error".into(), e.clone()]);
        }
        for check in &inst.checks {
            rows.push(vec![
                inst.instance.clone(),
                check.check.to_string(),
                format!("{:?}", check.status).to_lowercase(),
                check.message.clone().unwrap_or_default(),
            ]);
        }
    }
    let s = &r.summary;
    let mut out = commands::table(&["instance", "check", "status", "note"], &rows);
    out.push_str(&format!(
        "{} instances, {} checks: {} pass, {} fail, {} reported, {} skipped, {} errors -> {}\n",
        s.instances,
        s.checks,
        s.passed,
        s.failed,
        s.reported,
        s.skipped,
        s.errors,
        if r.passed { "PASS" } else { "FAIL" }
    ));
    out
}
