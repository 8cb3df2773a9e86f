//! Bidder valuations, their c-proxies, and metered oracle access.
//!
//! A [`Valuation`] is an immutable set function over `m` items. A
//! [`ProxyValuation`] wraps one and evaluates `v'(S) = E[v(T)]`, where `T`
//! keeps each item of `S` independently with probability `c = 1/k`.
//! Oracle access that should be accounted for goes through [`Metered`], which
//! bumps a shared [`QueryCounter`].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::items::{ItemSet, MAX_ITEMS};
use crate::scalar::{pow, Rational, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum ValuationKind<T> {
    /// Value per bundle, indexed by bit mask. `None` marks a missing entry.
    Explicit(Vec<Option<T>>),
    Additive(Vec<T>),
    UnitDemand(Vec<T>),
    /// Maximum over additive clauses; each clause has one weight per item.
    Xos(Vec<Vec<T>>),
    /// Total weight of the universe elements covered by the bundle.
    Coverage {
        element_weights: Vec<T>,
        /// `covers[j]` lists the elements covered by item `j`.
        covers: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Valuation<T> {
    m: usize,
    kind: ValuationKind<T>,
}

impl<T: Scalar> Valuation<T> {
    pub fn new(m: usize, kind: ValuationKind<T>) -> Result<Self> {
        if m > MAX_ITEMS {
            return Err(Error::capacity("item count", m as u128, MAX_ITEMS as u128));
        }
        let malformed = |msg: String| Err(Error::MalformedValuation(msg));
        let negative = |v: &T| v.is_neg();
        match &kind {
            ValuationKind::Explicit(table) => {
                if table.len() != 1usize << m {
                    return malformed(format!(
                        "explicit table has {} slots, expected 2^{m}",
                        table.len()
                    ));
                }
                if table.iter().flatten().any(negative) {
                    return malformed("negative value in explicit table".into());
                }
            }
            ValuationKind::Additive(w) | ValuationKind::UnitDemand(w) => {
                if w.len() != m {
                    return malformed(format!("{} weights for {m} items", w.len()));
                }
                if w.iter().any(negative) {
                    return malformed("negative item weight".into());
                }
            }
            ValuationKind::Xos(clauses) => {
                for (k, clause) in clauses.iter().enumerate() {
                    if clause.len() != m {
                        return malformed(format!("clause {k} has {} weights for {m} items", clause.len()));
                    }
                    if clause.iter().any(negative) {
                        return malformed(format!("negative weight in clause {k}"));
                    }
                }
            }
            ValuationKind::Coverage {
                element_weights,
                covers,
            } => {
                if covers.len() != m {
                    return malformed(format!("{} cover lists for {m} items", covers.len()));
                }
                if element_weights.len() > MAX_ITEMS {
                    return malformed("coverage universe larger than 64 elements".into());
                }
                if element_weights.iter().any(negative) {
                    return malformed("negative element weight".into());
                }
                if covers.iter().flatten().any(|&e| e >= element_weights.len()) {
                    return malformed("cover references an element outside the universe".into());
                }
            }
        }
        Ok(Valuation { m, kind })
    }

    pub fn additive(weights: Vec<T>) -> Self {
        Valuation::new(weights.len(), ValuationKind::Additive(weights)).expect("valid additive weights")
    }

    pub fn unit_demand(weights: Vec<T>) -> Self {
        Valuation::new(weights.len(), ValuationKind::UnitDemand(weights))
            .expect("valid unit-demand weights")
    }

    /// Explicit valuation from a complete table indexed by bit mask.
    pub fn explicit(m: usize, table: Vec<T>) -> Result<Self> {
        Valuation::new(m, ValuationKind::Explicit(table.into_iter().map(Some).collect()))
    }

    /// Tabulates any valuation into an explicit one.
    pub fn tabulate(&self, caps: &Caps) -> Result<Self> {
        Caps::check("explicit table items", self.m, caps.table_items)?;
        let table = ItemSet::all(self.m)
            .map(|s| self.eval(s).map(Some))
            .collect::<Result<Vec<_>>>()?;
        Valuation::new(self.m, ValuationKind::Explicit(table))
    }

    pub fn item_count(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> &ValuationKind<T> {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ValuationKind::Explicit(_) => "explicit",
            ValuationKind::Additive(_) => "additive",
            ValuationKind::UnitDemand(_) => "unit-demand",
            ValuationKind::Xos(_) => "xos",
            ValuationKind::Coverage { .. } => "coverage",
        }
    }

    /// Unmetered evaluation of `v(S)`.
    pub fn eval(&self, s: ItemSet) -> Result<T> {
        if !s.within(self.m) {
            return Err(Error::Contract(format!("bundle {s} outside {} items", self.m)));
        }
        if s.is_empty() {
            return Ok(T::zero());
        }
        Ok(match &self.kind {
            ValuationKind::Explicit(table) => table[s.bits() as usize].clone().ok_or_else(|| {
                Error::MalformedValuation(format!("explicit table has no entry for {s}"))
            })?,
            ValuationKind::Additive(w) => s.iter().fold(T::zero(), |acc, j| acc + w[j].clone()),
            ValuationKind::UnitDemand(w) => s.iter().fold(T::zero(), |acc, j| acc.max(w[j].clone())),
            ValuationKind::Xos(clauses) => clauses.iter().fold(T::zero(), |best, clause| {
                best.max(s.iter().fold(T::zero(), |acc, j| acc + clause[j].clone()))
            }),
            ValuationKind::Coverage {
                element_weights,
                covers,
            } => {
                let covered = s.iter().fold(ItemSet::EMPTY, |acc, j| {
                    covers[j].iter().fold(acc, |a, &e| a.union(ItemSet::singleton(e)))
                });
                covered
                    .iter()
                    .fold(T::zero(), |acc, e| acc + element_weights[e].clone())
            }
        })
    }

    /// Converts the numeric backend of every stored value.
    pub fn convert<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Valuation<U> {
        let map = |w: &Vec<T>| w.iter().map(&f).collect::<Vec<U>>();
        let kind = match &self.kind {
            ValuationKind::Explicit(table) => {
                ValuationKind::Explicit(table.iter().map(|v| v.as_ref().map(&f)).collect())
            }
            ValuationKind::Additive(w) => ValuationKind::Additive(map(w)),
            ValuationKind::UnitDemand(w) => ValuationKind::UnitDemand(map(w)),
            ValuationKind::Xos(clauses) => ValuationKind::Xos(clauses.iter().map(map).collect()),
            ValuationKind::Coverage {
                element_weights,
                covers,
            } => ValuationKind::Coverage {
                element_weights: map(element_weights),
                covers: covers.clone(),
            },
        };
        Valuation { m: self.m, kind }
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: &T) -> Valuation<T> {
        self.convert(|v| v.clone() * factor.clone())
    }

    /// First pair `(S, T)` with `v(S) + v(T) < v(S ∪ T)`, if any.
    pub fn subadditivity_violation(&self, caps: &Caps) -> Result<Option<(ItemSet, ItemSet)>> {
        Caps::check("items for subadditivity check", self.m, caps.check_items)?;
        let table = self.value_table()?;
        for s in ItemSet::all(self.m) {
            for t in ItemSet::all(self.m) {
                let joint = &table[s.union(t).bits() as usize];
                let sum = table[s.bits() as usize].clone() + table[t.bits() as usize].clone();
                if (joint.clone() - sum).is_pos() {
                    return Ok(Some((s, t)));
                }
            }
        }
        Ok(None)
    }

    pub fn is_subadditive(&self, caps: &Caps) -> Result<bool> {
        Ok(self.subadditivity_violation(caps)?.is_none())
    }

    pub fn monotonicity_violation(&self, caps: &Caps) -> Result<Option<MonotonicityViolation>> {
        Caps::check("items for monotonicity check", self.m, caps.check_items)?;
        let table = self.value_table()?;
        let empty = &table[0];
        if !empty.approx_zero() {
            return Ok(Some(MonotonicityViolation::NotNormalized(empty.encode())));
        }
        // Single-item extensions suffice by transitivity.
        for s in ItemSet::all(self.m) {
            for j in ItemSet::full(self.m).difference(s).iter() {
                let larger = s.union(ItemSet::singleton(j));
                if (table[s.bits() as usize].clone() - table[larger.bits() as usize].clone()).is_pos() {
                    return Ok(Some(MonotonicityViolation::Decreasing { smaller: s, larger }));
                }
            }
        }
        Ok(None)
    }

    pub fn is_monotone_normalized(&self, caps: &Caps) -> Result<bool> {
        Ok(self.monotonicity_violation(caps)?.is_none())
    }

    /// Raw table lookup that bypasses the `v(∅) = 0` shortcut, so that
    /// malformed explicit tables are visible to the checks.
    fn value_table(&self) -> Result<Vec<T>> {
        ItemSet::all(self.m)
            .map(|s| match &self.kind {
                ValuationKind::Explicit(table) => table[s.bits() as usize].clone().ok_or_else(|| {
                    Error::MalformedValuation(format!("explicit table has no entry for {s}"))
                }),
                _ => self.eval(s),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonotonicityViolation {
    NotNormalized(String),
    Decreasing { smaller: ItemSet, larger: ItemSet },
}

/// Keep probability `c = 1/k` with `k` a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeepRate(u64);

impl KeepRate {
    pub const ONE: KeepRate = KeepRate(1);

    /// `c = 1/reciprocal`.
    pub fn new(reciprocal: u64) -> Result<Self> {
        if reciprocal == 0 {
            return Err(Error::Parameter("1/c must be a positive integer".into()));
        }
        Ok(KeepRate(reciprocal))
    }

    pub fn from_rational(c: &Rational) -> Result<Self> {
        use num_traits::{One, ToPrimitive};
        let bad = || Error::Parameter(format!("c = {c} must be 1/k for a positive integer k"));
        if !c.numer().is_one() || c.denom() <= &num_bigint::BigInt::from(0) {
            return Err(bad());
        }
        KeepRate::new(c.denom().to_u64().ok_or_else(bad)?)
    }

    pub fn reciprocal(self) -> u64 {
        self.0
    }

    pub fn value<T: Scalar>(self) -> T {
        T::one() / T::from_int(self.0 as i64)
    }

    pub fn to_rational(self) -> Rational {
        crate::scalar::rational(1, self.0 as i64)
    }
}

impl fmt::Display for KeepRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/{}", self.0)
    }
}

/// The c-proxy of a base valuation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyValuation<T> {
    base: Valuation<T>,
    rate: KeepRate,
    /// Largest bundle for which the subset expectation is enumerated.
    enumeration_cap: usize,
}

impl<T: Scalar> ProxyValuation<T> {
    pub fn new(base: Valuation<T>, rate: KeepRate) -> Self {
        ProxyValuation {
            base,
            rate,
            enumeration_cap: Caps::default().subsets,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.enumeration_cap = cap;
        self
    }

    pub fn base(&self) -> &Valuation<T> {
        &self.base
    }

    pub fn rate(&self) -> KeepRate {
        self.rate
    }

    /// `E[v(T)]` where `T ⊆ S` keeps each item independently with probability `c`.
    pub fn eval(&self, s: ItemSet) -> Result<T> {
        if s.is_empty() {
            return Ok(T::zero());
        }
        let c: T = self.rate.value();
        match self.base.kind() {
            ValuationKind::Additive(_) => Ok(c * self.base.eval(s)?),
            ValuationKind::UnitDemand(w) => {
                // P(max kept weight is the r-th largest) = c (1-c)^(r-1).
                let mut weights: Vec<T> = s.iter().map(|j| w[j].clone()).collect();
                weights.sort_by(|a, b| b.partial_cmp(a).expect("comparable weights"));
                let miss = T::one() - c.clone();
                let mut survive = T::one();
                let mut total = T::zero();
                for wj in weights {
                    total = total + survive.clone() * c.clone() * wj;
                    survive = survive * miss.clone();
                }
                Ok(total)
            }
            _ => self.enumerate(s),
        }
    }

    /// Direct subset-enumeration expectation, used for kinds without a closed form.
    pub fn enumerate(&self, s: ItemSet) -> Result<T> {
        Caps::check("bundle size for proxy enumeration", s.len(), self.enumeration_cap)?;
        let c: T = self.rate.value();
        let miss = T::one() - c.clone();
        let size = s.len();
        let c_pows: Vec<T> = (0..=size).map(|k| pow(&c, k)).collect();
        let miss_pows: Vec<T> = (0..=size).map(|k| pow(&miss, k)).collect();
        let mut total = T::zero();
        for t in s.subsets() {
            let kept = t.len();
            let weight = c_pows[kept].clone() * miss_pows[size - kept].clone();
            total = total + weight * self.base.eval(t)?;
        }
        Ok(total)
    }
}

/// Which counter an oracle evaluation increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Value,
    ProxyValue,
}

/// A set function that supports value and demand queries.
pub trait SetFunction<T: Scalar>: Sync {
    const QUERY: QueryKind;

    fn item_count(&self) -> usize;

    fn eval(&self, s: ItemSet) -> Result<T>;

    /// Profit-maximizing bundle at `prices`; ties go to the smallest
    /// cardinality, then the lexicographically smallest bundle.
    fn demand(&self, prices: &[T], caps: &Caps) -> Result<ItemSet> {
        demand_scan(self, prices, caps)
    }
}

impl<T: Scalar> SetFunction<T> for Valuation<T> {
    const QUERY: QueryKind = QueryKind::Value;

    fn item_count(&self) -> usize {
        self.m
    }

    fn eval(&self, s: ItemSet) -> Result<T> {
        Valuation::eval(self, s)
    }

    fn demand(&self, prices: &[T], caps: &Caps) -> Result<ItemSet> {
        check_prices(self.m, prices)?;
        match &self.kind {
            ValuationKind::Additive(w) => Ok(additive_demand(w, prices)),
            ValuationKind::UnitDemand(w) => {
                let mut best: Option<(usize, T)> = None;
                for (j, (wj, pj)) in w.iter().zip(prices).enumerate() {
                    let profit = wj.clone() - pj.clone();
                    if !profit.is_pos() {
                        continue;
                    }
                    match &best {
                        Some((_, b)) if !(profit.clone() - b.clone()).is_pos() => {}
                        _ => best = Some((j, profit)),
                    }
                }
                Ok(best.map_or(ItemSet::EMPTY, |(j, _)| ItemSet::singleton(j)))
            }
            _ => demand_scan(self, prices, caps),
        }
    }
}

impl<T: Scalar> SetFunction<T> for ProxyValuation<T> {
    const QUERY: QueryKind = QueryKind::ProxyValue;

    fn item_count(&self) -> usize {
        self.base.m
    }

    fn eval(&self, s: ItemSet) -> Result<T> {
        ProxyValuation::eval(self, s)
    }

    fn demand(&self, prices: &[T], caps: &Caps) -> Result<ItemSet> {
        check_prices(self.base.m, prices)?;
        match self.base.kind() {
            ValuationKind::Additive(w) => {
                let c: T = self.rate.value();
                let scaled: Vec<T> = w.iter().map(|x| c.clone() * x.clone()).collect();
                Ok(additive_demand(&scaled, prices))
            }
            _ => demand_scan(self, prices, caps),
        }
    }
}

fn check_prices<T>(m: usize, prices: &[T]) -> Result<()> {
    if prices.len() != m {
        return Err(Error::Contract(format!("{} prices for {m} items", prices.len())));
    }
    Ok(())
}

fn additive_demand<T: Scalar>(weights: &[T], prices: &[T]) -> ItemSet {
    let mut s = ItemSet::EMPTY;
    for (j, (w, p)) in weights.iter().zip(prices).enumerate() {
        if (w.clone() - p.clone()).is_pos() {
            s.insert(j);
        }
    }
    s
}

/// Full `2^m` demand scan with the canonical tie-break.
pub fn demand_scan<T: Scalar, F: SetFunction<T> + ?Sized>(
    f: &F,
    prices: &[T],
    caps: &Caps,
) -> Result<ItemSet> {
    let m = f.item_count();
    check_prices(m, prices)?;
    Caps::check("items for demand scan", m, caps.subsets)?;
    let mut best = ItemSet::EMPTY;
    let mut best_profit = T::zero();
    for s in ItemSet::all(m).skip(1) {
        let cost = s.iter().fold(T::zero(), |acc, j| acc + prices[j].clone());
        let profit = f.eval(s)? - cost;
        let gain = profit.clone() - best_profit.clone();
        let better = gain.is_pos()
            || (gain.approx_zero() && (s.len(), s) < (best.len(), best));
        if better {
            best = s;
            best_profit = profit;
        }
    }
    Ok(best)
}

/// Per-session oracle query counts.
#[derive(Debug, Default)]
pub struct QueryCounter {
    value: AtomicU64,
    demand: AtomicU64,
    proxy_value: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub value_queries: u64,
    pub demand_queries: u64,
    pub proxy_value_queries: u64,
}

impl std::ops::Add for QueryCounts {
    type Output = QueryCounts;

    fn add(self, rhs: QueryCounts) -> QueryCounts {
        QueryCounts {
            value_queries: self.value_queries + rhs.value_queries,
            demand_queries: self.demand_queries + rhs.demand_queries,
            proxy_value_queries: self.proxy_value_queries + rhs.proxy_value_queries,
        }
    }
}

impl QueryCounter {
    pub fn new() -> Self {
        Self::default()
    }

    fn bump(&self, kind: QueryKind) {
        let slot = match kind {
            QueryKind::Value => &self.value,
            QueryKind::ProxyValue => &self.proxy_value,
        };
        slot.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> QueryCounts {
        QueryCounts {
            value_queries: self.value.load(Ordering::Relaxed),
            demand_queries: self.demand.load(Ordering::Relaxed),
            proxy_value_queries: self.proxy_value.load(Ordering::Relaxed),
        }
    }

    /// Folds counts from a per-worker counter into this one.
    pub fn absorb(&self, counts: QueryCounts) {
        self.value.fetch_add(counts.value_queries, Ordering::Relaxed);
        self.demand.fetch_add(counts.demand_queries, Ordering::Relaxed);
        self.proxy_value
            .fetch_add(counts.proxy_value_queries, Ordering::Relaxed);
    }
}

/// Oracle access to a set function that is charged to a [`QueryCounter`].
pub struct Metered<'a, F: ?Sized> {
    inner: &'a F,
    counter: &'a QueryCounter,
}

impl<'a, F: ?Sized> Metered<'a, F> {
    pub fn new(inner: &'a F, counter: &'a QueryCounter) -> Self {
        Metered { inner, counter }
    }

    pub fn inner(&self) -> &F {
        self.inner
    }

    pub fn value<T: Scalar>(&self, s: ItemSet) -> Result<T>
    where
        F: SetFunction<T>,
    {
        self.counter.bump(F::QUERY);
        self.inner.eval(s)
    }

    pub fn demand_query<T: Scalar>(&self, prices: &[T], caps: &Caps) -> Result<ItemSet>
    where
        F: SetFunction<T>,
    {
        self.counter.demand.fetch_add(1, Ordering::Relaxed);
        self.inner.demand(prices, caps)
    }
}
