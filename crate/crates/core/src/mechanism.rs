//! The proxy-and-round mechanism and its payments.
//!
//! Pipeline: c-proxy valuations, configuration LP over the proxies,
//! tentative per-bidder bundle draw, halt when an item has more than `1/c`
//! holders, per-bidder `q_i`, per-item lottery keeping each holder's item
//! with probability `c`, and a personal cancellation that keeps bidder `i`'s
//! items with probability `p / (1 - q_i)`.
//!
//! Every random choice draws from its own ChaCha stream keyed by
//! `(stage, index)`, so the outcome is a function of the seed alone and
//! extra sampling elsewhere never shifts it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::items::ItemSet;
use crate::lp::{
    build_full_lp, check_feasibility, solve_column_generation, solve_exact, ConfigLp, FractionalSolution,
    LpSolution,
};
use crate::scalar::{rational, Arithmetic, Rational, Scalar};
use crate::valuations::{KeepRate, ProxyValuation, QueryCounter, QueryCounts, SetFunction};

/// Which event defines `q_i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QVariant {
    /// Some item of `S_i` is held by at least `1/c` other bidders.
    #[serde(rename = "literal")]
    Literal,
    /// The halt predicate fires for the joint draw with `i` holding `S_i`.
    #[default]
    #[serde(rename = "halt")]
    HaltConditional,
}

impl fmt::Display for QVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QVariant::Literal => "literal",
            QVariant::HaltConditional => "halt",
        })
    }
}

impl FromStr for QVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(QVariant::Literal),
            "halt" => Ok(QVariant::HaltConditional),
            other => Err(Error::Parse(format!("unknown q variant `{other}` (expected literal|halt)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpMethod {
    #[default]
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "colgen")]
    ColumnGeneration,
}

impl fmt::Display for LpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpMethod::Full => "full",
            LpMethod::ColumnGeneration => "colgen",
        })
    }
}

impl FromStr for LpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(LpMethod::Full),
            "colgen" => Ok(LpMethod::ColumnGeneration),
            other => Err(Error::Parse(format!("unknown LP method `{other}` (expected full|colgen)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismConfig {
    pub rate: KeepRate,
    /// Survival probability of the whole allocation, in `(0, 1)`.
    pub p: Rational,
    pub q_variant: QVariant,
    pub arithmetic: Arithmetic,
    pub seed: u64,
    pub method: LpMethod,
    pub caps: Caps,
}

impl MechanismConfig {
    pub fn new(rate: KeepRate, p: Rational) -> Result<Self> {
        use num_traits::{One, Zero};
        if p <= Rational::zero() || p >= Rational::one() {
            return Err(Error::Parameter(format!("p = {p} must lie strictly between 0 and 1")));
        }
        Ok(MechanismConfig {
            rate,
            p,
            q_variant: QVariant::HaltConditional,
            arithmetic: Arithmetic::Exact,
            seed: 0,
            method: LpMethod::Full,
            caps: Caps::default(),
        })
    }

    /// Configuration with [`default_params`] for `m` items.
    pub fn for_items(m: usize) -> Result<Self> {
        let (rate, p) = default_params(m)?;
        MechanismConfig::new(rate, p)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_q_variant(mut self, variant: QVariant) -> Self {
        self.q_variant = variant;
        self
    }

    pub fn with_method(mut self, method: LpMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_caps(mut self, caps: Caps) -> Self {
        self.caps = caps;
        self
    }

    pub fn with_arithmetic(mut self, arithmetic: Arithmetic) -> Self {
        self.arithmetic = arithmetic;
        self
    }
}

/// `c = 1/ceil(100 log2 m / log2 log2 m)` and `p = 1/20`.
///
/// The ceiling rounds `c` down to the nearest reciprocal of an integer.
pub fn default_params(m: usize) -> Result<(KeepRate, Rational)> {
    if m < 4 {
        return Err(Error::Parameter(format!(
            "default parameters need m >= 4 (log log m must be positive), got m = {m}"
        )));
    }
    let log_m = (m as f64).log2();
    let inverse = 100.0 * log_m / log_m.log2();
    let nearest = inverse.round();
    let reciprocal = if (inverse - nearest).abs() < 1e-9 { nearest } else { inverse.ceil() };
    Ok((KeepRate::new(reciprocal as u64)?, rational(1, 20)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Tentative = 1,
    Lottery = 2,
    Cancel = 3,
    Replication = 4,
}

/// Seeded source of independent per-(stage, index) random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn rng(&self, stage: Stage, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((stage as u64) << 56) | (index & ((1 << 56) - 1)));
        rng
    }

    /// Seed for the `trial`-th Monte Carlo replication.
    pub fn derive_seed(&self, trial: u64) -> u64 {
        self.rng(Stage::Replication, trial).next_u64()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TentativeAssignment {
    bundles: Vec<ItemSet>,
    holders: Vec<u64>,
}

impl TentativeAssignment {
    pub fn new(bundles: Vec<ItemSet>, m: usize) -> Self {
        let mut holders = vec![0u64; m];
        for b in &bundles {
            for j in b.iter() {
                holders[j] += 1;
            }
        }
        TentativeAssignment { bundles, holders }
    }

    pub fn bundles(&self) -> &[ItemSet] {
        &self.bundles
    }

    pub fn holders(&self) -> &[u64] {
        &self.holders
    }
}

/// A bidder's tentative lottery: support bundles, plus `∅` carrying the
/// residual mass when it is positive.
pub fn bidder_atoms<T: Scalar>(sol: &FractionalSolution<T>, bidder: usize) -> Result<Vec<(ItemSet, T)>> {
    let mut atoms: Vec<(ItemSet, T)> = sol
        .bidder_support(bidder)
        .map(|e| (e.bundle, e.x.clone()))
        .collect();
    let residual = T::one() - sol.mass(bidder);
    if residual.is_neg() {
        return Err(Error::InfeasibleSolution(format!(
            "bidder {bidder} has total mass {} > 1",
            sol.mass(bidder).encode()
        )));
    }
    if residual.is_pos() {
        atoms.push((ItemSet::EMPTY, residual));
    }
    Ok(atoms)
}

/// Each bidder independently draws `S` with probability `x_{i,S}`, or `∅`
/// with the residual probability.
pub fn tentative_draw<T: Scalar>(
    sol: &FractionalSolution<T>,
    n: usize,
    m: usize,
    streams: &Streams,
) -> Result<TentativeAssignment> {
    let mut bundles = Vec::with_capacity(n);
    for bidder in 0..n {
        let support: Vec<&crate::lp::Assignment<T>> = sol.bidder_support(bidder).collect();
        if (sol.mass(bidder) - T::one()).is_pos() {
            return Err(Error::InfeasibleSolution(format!(
                "bidder {bidder} has total mass {} > 1",
                sol.mass(bidder).encode()
            )));
        }
        let weights: Vec<T> = support.iter().map(|e| e.x.clone()).collect();
        let mut rng = streams.rng(Stage::Tentative, bidder as u64);
        let drawn = T::sample_index(&weights, &mut rng).map_or(ItemSet::EMPTY, |k| support[k].bundle);
        if !drawn.within(m) {
            return Err(Error::InfeasibleSolution(format!("bundle {drawn} outside {m} items")));
        }
        bundles.push(drawn);
    }
    Ok(TentativeAssignment::new(bundles, m))
}

/// True iff some item has more than `1/c` tentative holders.
pub fn halt_check(t: &TentativeAssignment, rate: KeepRate) -> bool {
    t.holders.iter().any(|&k| k > rate.reciprocal())
}

/// Exact `q_i` for bidder `bidder` holding `bundle`, by enumerating every
/// joint draw of the other bidders.
pub fn compute_q<T: Scalar>(
    sol: &FractionalSolution<T>,
    n: usize,
    bidder: usize,
    bundle: ItemSet,
    rate: KeepRate,
    variant: QVariant,
    caps: &Caps,
) -> Result<T> {
    if bundle.is_empty() && variant == QVariant::Literal {
        return Ok(T::zero());
    }
    let others = (0..n)
        .filter(|&k| k != bidder)
        .map(|k| bidder_atoms(sol, k))
        .collect::<Result<Vec<_>>>()?;
    let atoms = others
        .iter()
        .try_fold(1u128, |acc, o| acc.checked_mul(o.len() as u128))
        .unwrap_or(u128::MAX);
    if atoms > caps.atoms as u128 {
        return Err(Error::capacity("joint atoms for q", atoms, caps.atoms));
    }
    let mut counts = [0u64; crate::items::MAX_ITEMS];
    if variant == QVariant::HaltConditional {
        for j in bundle.iter() {
            counts[j] += 1;
        }
    }
    let walk = QWalk {
        others: &others,
        bundle,
        limit: rate.reciprocal(),
        variant,
    };
    Ok(walk.event_probability(0, T::one(), &mut counts))
}

struct QWalk<'a, T> {
    others: &'a [Vec<(ItemSet, T)>],
    bundle: ItemSet,
    limit: u64,
    variant: QVariant,
}

impl<T: Scalar> QWalk<'_, T> {
    /// Probability of the event below this node, weighted by `prob`. Counts
    /// only grow, so once the event fires the whole subtree contributes `prob`.
    fn event_probability(&self, depth: usize, prob: T, counts: &mut [u64; crate::items::MAX_ITEMS]) -> T {
        let Some(atoms) = self.others.get(depth) else {
            return T::zero();
        };
        let mut total = T::zero();
        for (b, x) in atoms {
            let branch = prob.clone() * x.clone();
            for j in b.iter() {
                counts[j] += 1;
            }
            let fired = match self.variant {
                QVariant::HaltConditional => b.iter().any(|j| counts[j] > self.limit),
                // Other holders only: more than 1/c - 1 of them.
                QVariant::Literal => b
                    .intersection(self.bundle)
                    .iter()
                    .any(|j| counts[j] >= self.limit),
            };
            total = total
                + if fired {
                    branch
                } else {
                    self.event_probability(depth + 1, branch, counts)
                };
            for j in b.iter() {
                counts[j] -= 1;
            }
        }
        total
    }
}

/// Per item, one holder is chosen with probability `c` each and nobody
/// with probability `1 - k_j c`. Returns each bidder's kept items.
pub fn item_lottery(t: &TentativeAssignment, rate: KeepRate, streams: &Streams) -> Result<Vec<ItemSet>> {
    let limit = rate.reciprocal();
    let mut kept = vec![ItemSet::EMPTY; t.bundles.len()];
    for (item, &count) in t.holders.iter().enumerate() {
        if count == 0 {
            continue;
        }
        if count > limit {
            return Err(Error::Contract(format!(
                "item {item} has {count} holders but 1/c = {limit}; run the halt check first"
            )));
        }
        let holders: Vec<usize> = (0..t.bundles.len())
            .filter(|&i| t.bundles[i].contains(item))
            .collect();
        let draw = streams.rng(Stage::Lottery, item as u64).gen_range(0..limit);
        if let Some(&winner) = holders.get(draw as usize) {
            kept[winner].insert(item);
        }
    }
    Ok(kept)
}

/// `p / (1 - q)`, rejected when it exceeds one.
pub fn keep_probability<T: Scalar>(bidder: usize, q: &T, p: &T) -> Result<T> {
    let room = T::one() - q.clone();
    let violation = || Error::KeepProbability {
        bidder,
        q: q.encode(),
        p: p.encode(),
    };
    if !room.is_pos() {
        return Err(violation());
    }
    let keep = p.clone() / room;
    if (keep.clone() - T::one()).is_pos() {
        return Err(violation());
    }
    Ok(keep)
}

/// Each bidder with a tentative bundle keeps its lottery winnings with
/// probability `p / (1 - q_i)` and otherwise receives nothing.
pub fn personal_cancel<T: Scalar>(
    t: &TentativeAssignment,
    kept: &[ItemSet],
    q: &[T],
    p: &T,
    streams: &Streams,
) -> Result<Vec<ItemSet>> {
    let mut out = vec![ItemSet::EMPTY; kept.len()];
    for bidder in 0..kept.len() {
        if t.bundles[bidder].is_empty() {
            continue;
        }
        let keep = keep_probability(bidder, &q[bidder], p)?;
        let mut rng = streams.rng(Stage::Cancel, bidder as u64);
        if T::bernoulli(&keep, &mut rng) {
            out[bidder] = kept[bidder];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Payments<T> {
    pub charges: Vec<T>,
    /// `LPopt` with each bidder's coefficients zeroed.
    pub pivot_optima: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<T> {
    pub halted: bool,
    pub tentative: Vec<ItemSet>,
    pub bundles: Vec<ItemSet>,
    /// `q_i` per bidder; empty when the run halted before computing them.
    pub q: Vec<T>,
    pub payments: Option<Payments<T>>,
}

impl<T: Scalar> Outcome<T> {
    pub fn welfare(&self, instance: &Instance<T>) -> Result<T> {
        self.bundles
            .iter()
            .zip(instance.valuations())
            .try_fold(T::zero(), |acc, (b, v)| Ok(acc + v.eval(*b)?))
    }

    pub fn is_feasible(&self) -> bool {
        let mut used = ItemSet::EMPTY;
        for (b, t) in self.bundles.iter().zip(&self.tentative) {
            if !used.is_disjoint(*b) || !b.is_subset(*t) {
                return false;
            }
            used = used.union(*b);
        }
        !self.halted || self.bundles.iter().all(|b| b.is_empty())
    }
}

/// Everything about a run that does not depend on the random coins: the
/// proxies, the LP solution, and the `q` table over the LP support.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    n: usize,
    m: usize,
    rate: KeepRate,
    p: T,
    variant: QVariant,
    method: LpMethod,
    caps: Caps,
    proxies: Vec<ProxyValuation<T>>,
    lp: Option<ConfigLp<T>>,
    solution: LpSolution<T>,
    /// `q` per bidder per bundle in its support, plus `∅`.
    q_table: Vec<BTreeMap<ItemSet, T>>,
    queries: QueryCounts,
}

impl<T: Scalar> Prepared<T> {
    pub fn new(instance: &Instance<T>, config: &MechanismConfig) -> Result<Self> {
        let counter = QueryCounter::new();
        let caps = config.caps;
        let n = instance.bidders();
        let m = instance.items();
        let proxies = instance.proxies(config.rate, &caps);
        let (lp, solution) = match config.method {
            LpMethod::Full => {
                let lp = build_full_lp(&proxies, m, &caps, &counter)?;
                let solution = solve_exact(&lp)?;
                (Some(lp), solution)
            }
            LpMethod::ColumnGeneration => {
                let cg = solve_column_generation(&proxies, m, &[], None, &caps, &counter)?;
                (None, cg.solution)
            }
        };
        let violations = check_feasibility(&solution.primal, n, m);
        if !violations.is_empty() {
            return Err(Error::InfeasibleSolution(format!("{violations:?}")));
        }
        Self::with_solution(instance, config, proxies, lp, solution, counter.snapshot())
    }

    /// Uses a given solution in place of solving the LP.
    pub fn from_solution(
        instance: &Instance<T>,
        config: &MechanismConfig,
        primal: FractionalSolution<T>,
    ) -> Result<Self> {
        let violations = check_feasibility(&primal, instance.bidders(), instance.items());
        if !violations.is_empty() {
            return Err(Error::InfeasibleSolution(format!("{violations:?}")));
        }
        let solution = LpSolution {
            primal,
            item_duals: Vec::new(),
            bidder_duals: Vec::new(),
            pivots: 0,
        };
        let proxies = instance.proxies(config.rate, &config.caps);
        Self::with_solution(instance, config, proxies, None, solution, QueryCounts::default())
    }

    fn with_solution(
        instance: &Instance<T>,
        config: &MechanismConfig,
        proxies: Vec<ProxyValuation<T>>,
        lp: Option<ConfigLp<T>>,
        solution: LpSolution<T>,
        queries: QueryCounts,
    ) -> Result<Self> {
        let n = instance.bidders();
        let primal = &solution.primal;
        let q_table = (0..n)
            .map(|bidder| {
                bidder_atoms(primal, bidder)?
                    .iter()
                    .map(|(b, _)| *b)
                    .chain(std::iter::once(ItemSet::EMPTY))
                    .map(|b| {
                        let q = compute_q(primal, n, bidder, b, config.rate, config.q_variant, &config.caps)?;
                        Ok((b, q))
                    })
                    .collect::<Result<BTreeMap<_, _>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        // Reject up front rather than only when a draw reaches the cancel step:
        // a bundle with q = 1 always halts and would otherwise never be checked.
        let p = T::from_rational(&config.p);
        for (bidder, table) in q_table.iter().enumerate() {
            for (bundle, q) in table.iter().filter(|(b, _)| !b.is_empty()) {
                keep_probability(bidder, q, &p).map_err(|e| match e {
                    Error::KeepProbability { bidder, q, p } => Error::KeepProbability {
                        bidder,
                        q: format!("{q} (bundle {bundle})"),
                        p,
                    },
                    other => other,
                })?;
            }
        }
        Ok(Prepared {
            n,
            m: instance.items(),
            rate: config.rate,
            p,
            variant: config.q_variant,
            method: config.method,
            caps: config.caps,
            proxies,
            lp,
            solution,
            q_table,
            queries,
        })
    }

    pub fn bidders(&self) -> usize {
        self.n
    }

    pub fn items(&self) -> usize {
        self.m
    }

    pub fn rate(&self) -> KeepRate {
        self.rate
    }

    pub fn p(&self) -> &T {
        &self.p
    }

    pub fn variant(&self) -> QVariant {
        self.variant
    }

    pub fn caps(&self) -> &Caps {
        &self.caps
    }

    pub fn proxies(&self) -> &[ProxyValuation<T>] {
        &self.proxies
    }

    pub fn solution(&self) -> &LpSolution<T> {
        &self.solution
    }

    pub fn primal(&self) -> &FractionalSolution<T> {
        &self.solution.primal
    }

    pub fn lp(&self) -> Option<&ConfigLp<T>> {
        self.lp.as_ref()
    }

    pub fn queries(&self) -> QueryCounts {
        self.queries
    }

    /// Cached `q` for a bundle in the bidder's support (or `∅`).
    pub fn q(&self, bidder: usize, bundle: ItemSet) -> Result<&T> {
        self.q_table[bidder].get(&bundle).ok_or_else(|| {
            Error::Contract(format!("bundle {bundle} is not in bidder {bidder}'s LP support"))
        })
    }

    /// One realization of the random steps.
    pub fn sample(&self, seed: u64) -> Result<Outcome<T>> {
        let streams = Streams::new(seed);
        let t = tentative_draw(self.primal(), self.n, self.m, &streams)?;
        if halt_check(&t, self.rate) {
            return Ok(Outcome {
                halted: true,
                bundles: vec![ItemSet::EMPTY; self.n],
                tentative: t.bundles,
                q: Vec::new(),
                payments: None,
            });
        }
        let q = t
            .bundles
            .iter()
            .enumerate()
            .map(|(i, b)| self.q(i, *b).cloned())
            .collect::<Result<Vec<T>>>()?;
        let kept = item_lottery(&t, self.rate, &streams)?;
        let bundles = personal_cancel(&t, &kept, &q, &self.p, &streams)?;
        Ok(Outcome {
            halted: false,
            tentative: t.bundles,
            bundles,
            q,
            payments: None,
        })
    }

    /// Expected VCG charges over the range:
    /// `p (LPopt(v'_{-i}) - sum_{k != i} sum_S x_{k,S} v'_k(S))`.
    pub fn payments(&self) -> Result<Payments<T>> {
        let primal = self.primal();
        let own: Vec<T> = (0..self.n)
            .map(|i| {
                primal
                    .bidder_support(i)
                    .try_fold(T::zero(), |acc, e| Ok(acc + e.x.clone() * self.proxies[i].eval(e.bundle)?))
            })
            .collect::<Result<_>>()?;
        let pivot_optima: Vec<T> = (0..self.n)
            .into_par_iter()
            .map(|i| self.optimum_without(i))
            .collect::<Result<_>>()?;
        let charges = pivot_optima
            .iter()
            .zip(&own)
            .map(|(opt, mine)| {
                let others = primal.objective().clone() - mine.clone();
                self.p.clone() * (opt.clone() - others)
            })
            .collect::<Vec<T>>();
        if let Some(i) = charges.iter().position(|c| c.is_neg()) {
            return Err(Error::Contract(format!(
                "negative VCG charge {} for bidder {i}",
                charges[i].encode()
            )));
        }
        Ok(Payments { charges, pivot_optima })
    }

    fn optimum_without(&self, bidder: usize) -> Result<T> {
        match (&self.lp, self.method) {
            (Some(lp), _) => Ok(solve_exact(&lp.without_bidder(bidder))?.primal.objective().clone()),
            (None, LpMethod::ColumnGeneration) => {
                let masked: Vec<Masked<'_, T>> = self
                    .proxies
                    .iter()
                    .enumerate()
                    .map(|(k, pv)| Masked {
                        inner: pv,
                        zero: k == bidder,
                    })
                    .collect();
                let cg = solve_column_generation(&masked, self.m, &[], None, &self.caps, &QueryCounter::new())?;
                Ok(cg.solution.primal.objective().clone())
            }
            (None, LpMethod::Full) => {
                let mut proxies: Vec<ProxyValuation<T>> = self.proxies.clone();
                let base = crate::valuations::Valuation::additive(vec![T::zero(); self.m]);
                proxies[bidder] = ProxyValuation::new(base, self.rate);
                let lp = build_full_lp(&proxies, self.m, &self.caps, &QueryCounter::new())?;
                Ok(solve_exact(&lp)?.primal.objective().clone())
            }
        }
    }
}

/// A proxy whose values are forced to zero when `zero` is set.
struct Masked<'a, T> {
    inner: &'a ProxyValuation<T>,
    zero: bool,
}

impl<T: Scalar> SetFunction<T> for Masked<'_, T> {
    const QUERY: crate::valuations::QueryKind = crate::valuations::QueryKind::ProxyValue;

    fn item_count(&self) -> usize {
        self.inner.base().item_count()
    }

    fn eval(&self, s: ItemSet) -> Result<T> {
        if self.zero {
            Ok(T::zero())
        } else {
            self.inner.eval(s)
        }
    }

    fn demand(&self, prices: &[T], caps: &Caps) -> Result<ItemSet> {
        if self.zero {
            Ok(ItemSet::EMPTY)
        } else {
            self.inner.demand(prices, caps)
        }
    }
}

/// Runs the whole mechanism once with `config.seed`.
pub fn run<T: Scalar>(instance: &Instance<T>, config: &MechanismConfig) -> Result<Outcome<T>> {
    Prepared::new(instance, config)?.sample(config.seed)
}

pub fn vcg_payments<T: Scalar>(instance: &Instance<T>, config: &MechanismConfig) -> Result<Payments<T>> {
    Prepared::new(instance, config)?.payments()
}
