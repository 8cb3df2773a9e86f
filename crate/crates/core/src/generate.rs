//! Seeded random instances and feasible LP solutions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::format::{InstanceFile, Metadata};
use crate::instance::Instance;
use crate::items::ItemSet;
use crate::lp::{Assignment, FractionalSolution};
use crate::scalar::{rational, Rational};
use crate::valuations::{Valuation, ValuationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Additive,
    UnitDemand,
    Xos,
    Coverage,
    ExplicitSubadditive,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 5] = [
        GeneratorKind::Additive,
        GeneratorKind::UnitDemand,
        GeneratorKind::Xos,
        GeneratorKind::Coverage,
        GeneratorKind::ExplicitSubadditive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Additive => "additive",
            GeneratorKind::UnitDemand => "unit-demand",
            GeneratorKind::Xos => "xos",
            GeneratorKind::Coverage => "coverage",
            GeneratorKind::ExplicitSubadditive => "explicit-subadditive",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown generator kind {s:?}")))
    }
}

/// Shape parameters. Values are small integers so exact arithmetic stays cheap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorParams {
    pub max_weight: u32,
    pub clauses: usize,
    /// Universe size for coverage; `None` means `2m`.
    pub elements: Option<usize>,
    /// Passed through to the instance metadata untouched (`c`, `p`, ...).
    pub extra: BTreeMap<String, String>,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            max_weight: 10,
            clauses: 3,
            elements: None,
            extra: BTreeMap::new(),
        }
    }
}

impl GeneratorParams {
    /// Parses `key=value` pairs. `max-weight`, `clauses` and `elements`
    /// shape the draw; `c` and `p` are recorded as per-instance defaults.
    pub fn parse(pairs: &[String]) -> Result<Self> {
        let mut params = GeneratorParams::default();
        for pair in pairs.iter().flat_map(|p| p.split(',')).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {pair:?}")))?;
            let bad = |_| Error::Parse(format!("bad value for {key}: {value:?}"));
            match key.trim() {
                "max-weight" => params.max_weight = value.trim().parse().map_err(bad)?,
                "clauses" => params.clauses = value.trim().parse().map_err(bad)?,
                "elements" => params.elements = Some(value.trim().parse().map_err(bad)?),
                "c" | "p" => {
                    crate::scalar::parse_rational(value.trim())?;
                    params.extra.insert(key.trim().to_string(), value.trim().to_string());
                }
                other => return Err(Error::Parse(format!("unknown generator parameter {other:?}"))),
            }
        }
        if params.max_weight == 0 || params.clauses == 0 || params.elements == Some(0) {
            return Err(Error::Parameter("generator parameters must be positive".into()));
        }
        Ok(params)
    }

    fn record(&self) -> BTreeMap<String, String> {
        let mut out = self.extra.clone();
        let defaults = GeneratorParams::default();
        if self.max_weight != defaults.max_weight {
            out.insert("max-weight".into(), self.max_weight.to_string());
        }
        if self.clauses != defaults.clauses {
            out.insert("clauses".into(), self.clauses.to_string());
        }
        if let Some(e) = self.elements {
            out.insert("elements".into(), e.to_string());
        }
        out
    }
}

fn weight(rng: &mut ChaCha8Rng, max: u32) -> Rational {
    rational(rng.gen_range(0..=max) as i64, 1)
}

fn weights(rng: &mut ChaCha8Rng, m: usize, max: u32) -> Vec<Rational> {
    (0..m).map(|_| weight(rng, max)).collect()
}

/// One valuation of the requested kind.
pub fn random_valuation(
    kind: GeneratorKind,
    m: usize,
    params: &GeneratorParams,
    caps: &Caps,
    rng: &mut ChaCha8Rng,
) -> Result<Valuation<Rational>> {
    let max = params.max_weight;
    match kind {
        GeneratorKind::Additive => Ok(Valuation::additive(weights(rng, m, max))),
        GeneratorKind::UnitDemand => Ok(Valuation::unit_demand(weights(rng, m, max))),
        GeneratorKind::Xos => {
            let clauses = (0..params.clauses).map(|_| weights(rng, m, max)).collect();
            Valuation::new(m, ValuationKind::Xos(clauses))
        }
        GeneratorKind::Coverage => {
            let universe = params.elements.unwrap_or(2 * m);
            let element_weights = (0..universe)
                .map(|_| rational(rng.gen_range(1..=max) as i64, 1))
                .collect();
            let covers = (0..m)
                .map(|_| (0..universe).filter(|_| rng.gen_bool(0.5)).collect())
                .collect();
            Valuation::new(
                m,
                ValuationKind::Coverage {
                    element_weights,
                    covers,
                },
            )
        }
        GeneratorKind::ExplicitSubadditive => {
            Caps::check("explicit table items", m, caps.table_items)?;
            let raw: Vec<Rational> = (0..1usize << m)
                .map(|s| if s == 0 { Rational::zero() } else { weight(rng, max) })
                .collect();
            Valuation::explicit(m, repair_subadditive(raw))
        }
    }
}

/// Clamps a table, in increasing mask order, into
/// `[max_j v(S - j), min_A v(A) + v(S - A)]`. Every proper subset is already
/// repaired when `S` is visited, and the interval is never empty for a
/// monotone subadditive prefix, so the result is monotone, normalized and
/// subadditive.
pub fn repair_subadditive(mut table: Vec<Rational>) -> Vec<Rational> {
    table[0] = Rational::zero();
    for s in 1..table.len() {
        let set = ItemSet::from_bits(s as u64);
        let lo = set
            .iter()
            .map(|j| table[set.difference(ItemSet::singleton(j)).bits() as usize].clone())
            .max()
            .unwrap_or_else(Rational::zero);
        let hi = set
            .subsets()
            .filter(|a| !a.is_empty() && *a != set)
            .map(|a| table[a.bits() as usize].clone() + table[set.difference(a).bits() as usize].clone())
            .min();
        let mut v = table[s].clone().max(lo);
        if let Some(hi) = hi {
            v = v.min(hi);
        }
        table[s] = v;
    }
    table
}

/// `generate(kind, n, m, seed, params)`: deterministic for fixed inputs.
pub fn generate(
    kind: GeneratorKind,
    n: usize,
    m: usize,
    seed: u64,
    params: &GeneratorParams,
    caps: &Caps,
) -> Result<InstanceFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bidders = (0..n)
        .map(|_| random_valuation(kind, m, params, caps, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let instance = Instance::new(m, bidders)?;
    Ok(InstanceFile::from_instance(
        &instance,
        Some(Metadata {
            generator: Some(kind.name().into()),
            seed: Some(seed),
            params: params.record(),
        }),
    ))
}

/// Seed search budget for contended instances.
const CONTENTION_SEARCH: u64 = 20_000;

/// True when the proxy LP optimum the mechanism would use has a fractional
/// entry and every support bundle satisfies `q <= 1 - p`.
pub fn is_contended(file: &InstanceFile) -> Result<bool> {
    let instance = file.to_instance()?;
    let config = file.config(None, None)?;
    match crate::mechanism::Prepared::new(&instance, &config) {
        Ok(prepared) => Ok(prepared.primal().entries().iter().any(|e| !e.x.is_one())),
        Err(Error::KeepProbability { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Instance from the first seed at or after `seed` that [`is_contended`].
pub fn generate_contended(
    kind: GeneratorKind,
    n: usize,
    m: usize,
    seed: u64,
    params: &GeneratorParams,
    caps: &Caps,
) -> Result<InstanceFile> {
    for offset in 0..CONTENTION_SEARCH {
        let file = generate(kind, n, m, seed.wrapping_add(offset), params, caps)?;
        if is_contended(&file)? {
            return Ok(file);
        }
    }
    Err(Error::Parameter(format!(
        "no contended {kind} instance in {CONTENTION_SEARCH} seeds from {seed}"
    )))
}

fn corpus_params(c: &str, max_weight: u32) -> GeneratorParams {
    let mut params = GeneratorParams {
        max_weight,
        ..GeneratorParams::default()
    };
    params.extra.insert("c".into(), c.into());
    params.extra.insert("p".into(), "1/20".into());
    params
}

/// Mixed-kind corpus with `p = 1/20` and `c` recorded per instance in the
/// metadata. Even slots are plain draws (`n` in 1..=3, `m` in 2..=5, `c`
/// cycling through 1, 1/2, 1/3). Odd slots are contended: three bidders
/// over 3 or 4 items, `c = 1/2`, with the seed advanced until the
/// instance [`is_contended`].
pub fn standard_corpus(count: usize, seed: u64, caps: &Caps) -> Result<Vec<InstanceFile>> {
    const PLAIN_RATES: [&str; 3] = ["1", "1/2", "1/3"];
    const CONTENDED_KINDS: [GeneratorKind; 3] =
        [GeneratorKind::Xos, GeneratorKind::Coverage, GeneratorKind::ExplicitSubadditive];
    (0..count)
        .map(|idx| {
            let slot = idx / 2;
            let base = seed.wrapping_add(1000 * idx as u64);
            if idx % 2 == 0 {
                let kind = GeneratorKind::ALL[slot % GeneratorKind::ALL.len()];
                let n = 1 + slot % 3;
                let m = 2 + (slot / 3) % 4;
                let params = corpus_params(PLAIN_RATES[(slot / 2) % PLAIN_RATES.len()], 10);
                generate(kind, n, m, base, &params, caps)
            } else {
                let kind = CONTENDED_KINDS[slot % CONTENDED_KINDS.len()];
                let m = 3 + (slot / 3) % 2;
                generate_contended(kind, 3, m, base, &corpus_params("1/2", 10), caps)
            }
        })
        .collect()
}

/// Explicit-table corpus for deviation checks. Even slots: `n` in 1..=3,
/// `m` in 2..=3, `c` in {1, 1/2}. Odd slots: contended, three bidders over
/// four items at `c = 1/2`.
pub fn explicit_corpus(count: usize, seed: u64, caps: &Caps) -> Result<Vec<InstanceFile>> {
    const RATES: [&str; 2] = ["1", "1/2"];
    (0..count)
        .map(|idx| {
            let base = seed.wrapping_add(1000 * idx as u64);
            let kind = GeneratorKind::ExplicitSubadditive;
            if idx % 2 == 0 {
                let n = 1 + (idx / 2) % 3;
                let m = 2 + (idx / 6) % 2;
                generate(kind, n, m, base, &corpus_params(RATES[(idx / 2) % 2], 6), caps)
            } else {
                generate_contended(kind, 3, 4, base, &corpus_params("1/2", 6), caps)
            }
        })
        .collect()
}

/// Random feasible configuration-LP solution: each bidder gets up to
/// `max_bundles` random bundles with integer weights, then everything is
/// divided by the largest item load or bidder mass so that the tightest
/// constraint holds with equality.
pub fn random_feasible_solution(
    n: usize,
    m: usize,
    max_bundles: usize,
    max_bundle_size: usize,
    seed: u64,
) -> Result<FractionalSolution<Rational>> {
    if n == 0 || m == 0 || max_bundles == 0 || max_bundle_size == 0 || m > crate::items::MAX_ITEMS {
        return Err(Error::Parameter("solution shape must be positive and m <= 64".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<usize> = (0..m).collect();
    let mut raw: Vec<(usize, ItemSet, u32)> = Vec::new();
    for bidder in 0..n {
        let count = rng.gen_range(1..=max_bundles);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..count {
            let size = rng.gen_range(1..=max_bundle_size.min(m));
            let bundle = ItemSet::from_items(items.choose_multiple(&mut rng, size).copied(), m)?;
            if seen.insert(bundle) {
                raw.push((bidder, bundle, rng.gen_range(1..=10)));
            }
        }
    }
    let mut load = vec![0u64; m];
    let mut mass = vec![0u64; n];
    for (bidder, bundle, w) in &raw {
        mass[*bidder] += u64::from(*w);
        for j in bundle.iter() {
            load[j] += u64::from(*w);
        }
    }
    let scale = load.iter().chain(mass.iter()).copied().max().unwrap_or(1).max(1);
    let entries = raw
        .into_iter()
        .map(|(bidder, bundle, w)| Assignment {
            bidder,
            bundle,
            x: rational(w as i64, scale as i64),
        })
        .collect();
    let sol = FractionalSolution::new(entries, Rational::zero());
    debug_assert!(sol.entries().iter().all(|e| e.x <= Rational::one()));
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::check_feasibility;

    #[test]
    fn deterministic_files() {
        let caps = Caps::default();
        let params = GeneratorParams::default();
        let a = generate(GeneratorKind::Additive, 2, 3, 7, &params, &caps).unwrap();
        let b = generate(GeneratorKind::Additive, 2, 3, 7, &params, &caps).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate(GeneratorKind::Additive, 2, 3, 8, &params, &caps).unwrap();
        assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
    }

    #[test]
    fn explicit_beyond_table_cap() {
        let err = generate(
            GeneratorKind::ExplicitSubadditive,
            1,
            10,
            1,
            &GeneratorParams::default(),
            &Caps::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn every_kind_is_monotone_subadditive() {
        let caps = Caps::default();
        for kind in GeneratorKind::ALL {
            for seed in 0..8 {
                let file = generate(kind, 2, 5, seed, &GeneratorParams::default(), &caps).unwrap();
                for v in file.to_instance().unwrap().valuations() {
                    assert!(v.is_subadditive(&caps).unwrap(), "{kind} seed {seed}");
                    assert!(v.is_monotone_normalized(&caps).unwrap(), "{kind} seed {seed}");
                }
            }
        }
    }

    #[test]
    fn repair_fixes_superadditive_table() {
        // {0}=1, {1}=1, {0,1}=5 -> capped at 2.
        let fixed = repair_subadditive(vec![rational(0, 1), rational(1, 1), rational(1, 1), rational(5, 1)]);
        assert_eq!(fixed[3], rational(2, 1));
        // {0}=3, {1}=0, {0,1}=1 -> raised to 3.
        let fixed = repair_subadditive(vec![rational(0, 1), rational(3, 1), rational(0, 1), rational(1, 1)]);
        assert_eq!(fixed[3], rational(3, 1));
    }

    #[test]
    fn params_parsing() {
        let p = GeneratorParams::parse(&["max-weight=4,clauses=2".into(), "c=1/2".into()]).unwrap();
        assert_eq!(p.max_weight, 4);
        assert_eq!(p.clauses, 2);
        assert_eq!(p.extra["c"], "1/2");
        assert!(GeneratorParams::parse(&["colour=red".into()]).is_err());
        assert!(GeneratorParams::parse(&["c=x".into()]).is_err());
        assert!(GeneratorParams::parse(&["max-weight=0".into()]).is_err());
    }

    #[test]
    fn random_solutions_are_feasible() {
        for seed in 0..5 {
            let sol = random_feasible_solution(40, 64, 3, 6, seed).unwrap();
            assert!(check_feasibility(&sol, 40, 64).is_empty());
            assert!(!sol.is_empty());
        }
    }

    #[test]
    fn corpus_shapes() {
        let caps = Caps::default();
        let corpus = standard_corpus(20, 1, &caps).unwrap();
        let kinds: std::collections::BTreeSet<_> =
            corpus.iter().map(|f| f.metadata.as_ref().unwrap().generator.clone()).collect();
        assert_eq!(kinds.len(), 5);
        assert!(corpus.iter().all(|f| f.m <= 5 && f.bidders.len() <= 3));
    }
}
