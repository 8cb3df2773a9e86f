//! Exact outcome law of the mechanism by enumeration, and the checks built
//! on it.
//!
//! [`OutcomeDistribution`] enumerates every joint tentative draw of the LP
//! support, applies the halt rule, and for each surviving atom enumerates
//! the per-item lottery outcomes directly (holder `r` with probability `c`,
//! nobody with `1 - k_j c`). Expected values use the raw valuations on the
//! realized kept sets, never the proxy closed forms, so comparing against
//! `p * LPopt(v')` is a genuine two-route check.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::format::Number;
use crate::instance::Instance;
use crate::items::ItemSet;
use crate::lp::FractionalSolution;
use crate::mechanism::{
    bidder_atoms, halt_check, keep_probability, tentative_draw, MechanismConfig, Prepared, QVariant,
    Streams,
};
use crate::scalar::{pow, Arithmetic, Rational, Scalar};
use crate::valuations::{KeepRate, Valuation, ValuationKind};

/// One joint tentative draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<T> {
    pub tentative: Vec<ItemSet>,
    pub probability: T,
    pub halted: bool,
    /// `p / (1 - q_i)` for bidders holding a bundle, zero otherwise or when halted.
    pub survival: Vec<T>,
    /// Law of each bidder's kept set after the item lottery (empty when halted).
    pub kept: Vec<Vec<(ItemSet, T)>>,
}

/// Aggregates for one LP support entry `(i, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryLaw<T> {
    pub bidder: usize,
    pub bundle: ItemSet,
    pub x: T,
    /// `q` as the mechanism computes it.
    pub q: T,
    /// `P(halt | S_i = S)` measured on the joint enumeration.
    pub conditional_halt: T,
    /// `P(S_i = S, no halt, not cancelled)`.
    pub keep_marginal: T,
}

#[derive(Debug, Clone)]
pub struct OutcomeDistribution<T> {
    pub atoms: Vec<Atom<T>>,
    pub entries: Vec<EntryLaw<T>>,
    pub rate: KeepRate,
    pub p: T,
    /// Expected welfare under the reported (= evaluated) valuations.
    pub expected_welfare: T,
    pub bidder_values: Vec<T>,
}

impl<T: Scalar> OutcomeDistribution<T> {
    /// Enumerates the law of the mechanism prepared in `prepared`, valuing
    /// outcomes with `instance`'s valuations.
    pub fn new(prepared: &Prepared<T>, instance: &Instance<T>) -> Result<Self> {
        let n = prepared.bidders();
        let m = prepared.items();
        let caps = prepared.caps();
        let primal = prepared.primal();
        for e in primal.entries() {
            Caps::check("supported bundle size", e.bundle.len(), caps.subsets)?;
        }
        let per_bidder = (0..n)
            .map(|i| bidder_atoms(primal, i))
            .collect::<Result<Vec<_>>>()?;
        let count = per_bidder
            .iter()
            .try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128))
            .unwrap_or(u128::MAX);
        if count > caps.atoms as u128 {
            return Err(Error::capacity("joint tentative atoms", count, caps.atoms));
        }

        let limit = prepared.rate().reciprocal();
        let mut atoms = Vec::with_capacity(count as usize);
        let mut choice = vec![0usize; n];
        loop {
            let tentative: Vec<ItemSet> = choice.iter().enumerate().map(|(i, &k)| per_bidder[i][k].0).collect();
            let probability = choice
                .iter()
                .enumerate()
                .fold(T::one(), |acc, (i, &k)| acc * per_bidder[i][k].1.clone());
            let mut holders = vec![0u64; m];
            for b in &tentative {
                for j in b.iter() {
                    holders[j] += 1;
                }
            }
            let halted = holders.iter().any(|&k| k > limit);
            let (survival, kept) = if halted {
                (vec![T::zero(); n], vec![Vec::new(); n])
            } else {
                let survival = tentative
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        if b.is_empty() {
                            Ok(T::zero())
                        } else {
                            keep_probability(i, prepared.q(i, *b)?, prepared.p())
                        }
                    })
                    .collect::<Result<Vec<T>>>()?;
                let kept = (0..n)
                    .map(|i| lottery_law(&tentative, &holders, i, prepared.rate()))
                    .collect();
                (survival, kept)
            };
            atoms.push(Atom {
                tentative,
                probability,
                halted,
                survival,
                kept,
            });
            if !advance(&mut choice, &per_bidder) {
                break;
            }
        }

        let entries = primal
            .entries()
            .iter()
            .map(|e| {
                let mut halted = T::zero();
                let mut marginal = T::zero();
                for atom in atoms.iter().filter(|a| a.tentative[e.bidder] == e.bundle) {
                    if atom.halted {
                        halted = halted + atom.probability.clone();
                    } else {
                        marginal = marginal + atom.probability.clone() * atom.survival[e.bidder].clone();
                    }
                }
                Ok(EntryLaw {
                    bidder: e.bidder,
                    bundle: e.bundle,
                    x: e.x.clone(),
                    q: prepared.q(e.bidder, e.bundle)?.clone(),
                    conditional_halt: halted / e.x.clone(),
                    keep_marginal: marginal,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut law = OutcomeDistribution {
            atoms,
            entries,
            rate: prepared.rate(),
            p: prepared.p().clone(),
            expected_welfare: T::zero(),
            bidder_values: Vec::new(),
        };
        law.bidder_values = (0..n)
            .map(|i| law.expected_value(i, instance.valuation(i)))
            .collect::<Result<_>>()?;
        law.expected_welfare = law.bidder_values.iter().fold(T::zero(), |acc, v| acc + v.clone());
        Ok(law)
    }

    pub fn total_probability(&self) -> T {
        self.atoms.iter().fold(T::zero(), |acc, a| acc + a.probability.clone())
    }

    pub fn halt_probability(&self) -> T {
        self.atoms
            .iter()
            .filter(|a| a.halted)
            .fold(T::zero(), |acc, a| acc + a.probability.clone())
    }

    /// `E[v(final bundle of bidder)]` for an arbitrary valuation `v`.
    pub fn expected_value(&self, bidder: usize, valuation: &Valuation<T>) -> Result<T> {
        let mut total = T::zero();
        let mut cache: BTreeMap<ItemSet, T> = BTreeMap::new();
        for atom in self.atoms.iter().filter(|a| !a.halted && !a.tentative[bidder].is_empty()) {
            let mut inner = T::zero();
            for (kept, prob) in &atom.kept[bidder] {
                let value = match cache.get(kept) {
                    Some(v) => v.clone(),
                    None => {
                        let v = valuation.eval(*kept)?;
                        cache.insert(*kept, v.clone());
                        v
                    }
                };
                inner = inner + prob.clone() * value;
            }
            total = total + atom.probability.clone() * atom.survival[bidder].clone() * inner;
        }
        Ok(total)
    }
}

/// Odometer over per-bidder atom choices; false once every combination is visited.
fn advance<X>(choice: &mut [usize], per_bidder: &[Vec<X>]) -> bool {
    for i in (0..choice.len()).rev() {
        choice[i] += 1;
        if choice[i] < per_bidder[i].len() {
            return true;
        }
        choice[i] = 0;
    }
    false
}

/// Exact law of `bidder`'s kept set, enumerating every lottery outcome of
/// the items it holds.
fn lottery_law<T: Scalar>(tentative: &[ItemSet], holders: &[u64], bidder: usize, rate: KeepRate) -> Vec<(ItemSet, T)> {
    let c: T = rate.value();
    let mut law: BTreeMap<ItemSet, T> = BTreeMap::new();
    law.insert(ItemSet::EMPTY, T::one());
    for j in tentative[bidder].iter() {
        // Outcomes for item j: each of the k_j holders (probability c), or nobody.
        let owners: Vec<usize> = (0..tentative.len()).filter(|&i| tentative[i].contains(j)).collect();
        let nobody = T::one() - T::from_int(holders[j] as i64) * c.clone();
        let mut next: BTreeMap<ItemSet, T> = BTreeMap::new();
        for (set, prob) in law {
            let mut add = |s: ItemSet, w: T| {
                let slot = next.entry(s).or_insert_with(T::zero);
                *slot = slot.clone() + w;
            };
            for &owner in &owners {
                let s = if owner == bidder { set.union(ItemSet::singleton(j)) } else { set };
                add(s, prob.clone() * c.clone());
            }
            if !nobody.approx_zero() || nobody.is_pos() {
                add(set, prob.clone() * nobody.clone());
            }
        }
        law = next;
    }
    law.into_iter().filter(|(_, p)| !p.is_zero()).collect()
}

/// Prepares the mechanism on `instance` and enumerates its outcome law.
pub fn exact_distribution<T: Scalar>(
    instance: &Instance<T>,
    config: &MechanismConfig,
) -> Result<(Prepared<T>, OutcomeDistribution<T>)> {
    let prepared = Prepared::new(instance, config)?;
    let law = OutcomeDistribution::new(&prepared, instance)?;
    Ok((prepared, law))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WelfareIdentityReport {
    pub q_variant: QVariant,
    /// Equality is asserted only for the halt-conditional variant.
    pub asserted: bool,
    pub lp_optimum: Number,
    pub expected: Number,
    pub actual: Number,
    /// `p * LPopt - expected welfare`.
    pub gap: Number,
    pub holds: bool,
}

impl WelfareIdentityReport {
    pub fn passed(&self) -> bool {
        !self.asserted || self.holds
    }
}

pub fn welfare_identity<T: Scalar>(prepared: &Prepared<T>, law: &OutcomeDistribution<T>) -> WelfareIdentityReport {
    let optimum = prepared.primal().objective().clone();
    let expected = prepared.p().clone() * optimum.clone();
    let gap = expected.clone() - law.expected_welfare.clone();
    WelfareIdentityReport {
        q_variant: prepared.variant(),
        asserted: prepared.variant() == QVariant::HaltConditional,
        lp_optimum: Number::of(&optimum),
        expected: Number::of(&expected),
        actual: Number::of(&law.expected_welfare),
        gap: Number::of(&gap),
        holds: gap.approx_zero(),
    }
}

/// Expected welfare equals `p` times the proxy LP optimum.
pub fn check_welfare_identity<T: Scalar>(
    instance: &Instance<T>,
    config: &MechanismConfig,
) -> Result<WelfareIdentityReport> {
    let (prepared, law) = exact_distribution(instance, config)?;
    Ok(welfare_identity(&prepared, &law))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalEntry {
    pub bidder: usize,
    pub bundle: ItemSet,
    pub x: Number,
    pub q: Number,
    pub conditional_halt: Number,
    pub expected: Number,
    pub actual: Number,
    /// `p x - P(tentative S and kept)`.
    pub gap: Number,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepMarginalReport {
    pub q_variant: QVariant,
    pub asserted: bool,
    pub entries: Vec<MarginalEntry>,
    pub holds: bool,
}

impl KeepMarginalReport {
    pub fn passed(&self) -> bool {
        !self.asserted || self.holds
    }

    /// Entries whose survival probability falls short of `p x`.
    pub fn deficits(&self) -> impl Iterator<Item = &MarginalEntry> {
        self.entries.iter().filter(|e| !e.holds)
    }
}

pub fn keep_marginals<T: Scalar>(prepared: &Prepared<T>, law: &OutcomeDistribution<T>) -> KeepMarginalReport {
    let p = prepared.p().clone();
    let entries: Vec<MarginalEntry> = law
        .entries
        .iter()
        .map(|e| {
            let expected = p.clone() * e.x.clone();
            let gap = expected.clone() - e.keep_marginal.clone();
            MarginalEntry {
                bidder: e.bidder,
                bundle: e.bundle,
                x: Number::of(&e.x),
                q: Number::of(&e.q),
                conditional_halt: Number::of(&e.conditional_halt),
                expected: Number::of(&expected),
                actual: Number::of(&e.keep_marginal),
                gap: Number::of(&gap),
                holds: gap.approx_zero(),
            }
        })
        .collect();
    KeepMarginalReport {
        q_variant: prepared.variant(),
        asserted: prepared.variant() == QVariant::HaltConditional,
        holds: entries.iter().all(|e| e.holds),
        entries,
    }
}

/// `P(tentative S and reaching the keep branch) = p x_{i,S}` per support entry.
pub fn check_keep_marginals<T: Scalar>(
    instance: &Instance<T>,
    config: &MechanismConfig,
) -> Result<KeepMarginalReport> {
    let (prepared, law) = exact_distribution(instance, config)?;
    Ok(keep_marginals(&prepared, &law))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinningReport {
    pub atoms_checked: usize,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<(usize, ItemSet)>,
}

/// Given a surviving atom, each held item is kept with probability exactly
/// `c`, independently across items.
pub fn check_conditional_thinning<T: Scalar>(law: &OutcomeDistribution<T>) -> ThinningReport {
    let c: T = law.rate.value();
    let miss = T::one() - c.clone();
    let mut checked = 0;
    for atom in law.atoms.iter().filter(|a| !a.halted) {
        checked += 1;
        for (bidder, held) in atom.tentative.iter().enumerate() {
            let size = held.len();
            let expected: BTreeMap<ItemSet, T> = held
                .subsets()
                .map(|t| (t, pow(&c, t.len()) * pow(&miss, size - t.len())))
                .filter(|(_, p)| !p.is_zero())
                .collect();
            let actual: BTreeMap<ItemSet, T> = atom.kept[bidder].iter().cloned().collect();
            let same = expected.len() == actual.len()
                && expected
                    .iter()
                    .all(|(s, p)| actual.get(s).is_some_and(|a| a.approx_eq(p)));
            if !same {
                return ThinningReport {
                    atoms_checked: checked,
                    holds: false,
                    witness: Some((bidder, *held)),
                };
            }
        }
    }
    ThinningReport {
        atoms_checked: checked,
        holds: true,
        witness: None,
    }
}

/// Best integral welfare by trying every item-to-bidder-or-nobody map.
pub fn optimal_integral_welfare<T: Scalar>(instance: &Instance<T>, caps: &Caps) -> Result<T> {
    let n = instance.bidders();
    let m = instance.items();
    let choices = (n + 1) as u128;
    let total = (0..m).try_fold(1u128, |acc, _| acc.checked_mul(choices)).unwrap_or(u128::MAX);
    if total > caps.atoms as u128 {
        return Err(Error::capacity("integral assignments", total, caps.atoms));
    }
    // Per-bidder value tables keep the inner loop to lookups.
    let tables = instance
        .valuations()
        .iter()
        .map(|v| ItemSet::all(m).map(|s| v.eval(s)).collect::<Result<Vec<T>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut owner = vec![0usize; m];
    let mut best = T::zero();
    loop {
        let mut bundles = vec![0u64; n + 1];
        for (j, &o) in owner.iter().enumerate() {
            bundles[o] |= 1 << j;
        }
        let welfare = (0..n).fold(T::zero(), |acc, i| acc + tables[i][bundles[i + 1] as usize].clone());
        if welfare > best {
            best = welfare;
        }
        let mut j = 0;
        loop {
            if j == m {
                return Ok(best);
            }
            owner[j] += 1;
            if owner[j] <= n {
                break;
            }
            owner[j] = 0;
            j += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub expected_welfare: Number,
    pub integral_optimum: Number,
    /// `c * p * OPT`.
    pub bound: Number,
    pub holds: bool,
}

pub fn approximation<T: Scalar>(
    prepared: &Prepared<T>,
    law: &OutcomeDistribution<T>,
    instance: &Instance<T>,
) -> Result<ApproximationReport> {
    let opt = optimal_integral_welfare(instance, prepared.caps())?;
    let bound = prepared.rate().value::<T>() * prepared.p().clone() * opt.clone();
    Ok(ApproximationReport {
        expected_welfare: Number::of(&law.expected_welfare),
        integral_optimum: Number::of(&opt),
        bound: Number::of(&bound),
        holds: bound.le_tol(&law.expected_welfare),
    })
}

/// Expected welfare is at least `c p` times the best integral welfare.
pub fn check_approximation<T: Scalar>(
    instance: &Instance<T>,
    config: &MechanismConfig,
) -> Result<ApproximationReport> {
    let (prepared, law) = exact_distribution(instance, config)?;
    approximation(&prepared, &law, instance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaltFrequencyReport {
    pub bidders: usize,
    pub items: usize,
    pub reciprocal_c: u64,
    pub trials: u64,
    pub halts: u64,
    pub frequency: f64,
    /// `1/m + 3 sqrt(1 / (m trials))`.
    pub threshold: f64,
    pub holds: bool,
}

/// Monte Carlo halt frequency of the tentative draw for a feasible solution.
pub fn check_halt_frequency<T: Scalar>(
    sol: &FractionalSolution<T>,
    n: usize,
    m: usize,
    rate: KeepRate,
    trials: u64,
    seed: u64,
) -> Result<HaltFrequencyReport> {
    let streams = Streams::new(seed);
    let halts = (0..trials)
        .into_par_iter()
        .map(|t| {
            let draw = tentative_draw(sol, n, m, &Streams::new(streams.derive_seed(t)))?;
            Ok(u64::from(halt_check(&draw, rate)))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    let frequency = halts as f64 / trials as f64;
    let mf = m as f64;
    let threshold = 1.0 / mf + 3.0 * (1.0 / (mf * trials as f64)).sqrt();
    Ok(HaltFrequencyReport {
        bidders: n,
        items: m,
        reciprocal_c: rate.reciprocal(),
        trials,
        halts,
        frequency,
        threshold,
        holds: frequency <= threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub mean: f64,
    pub standard_error: f64,
    pub exact: Number,
    /// `|mean - exact| / standard_error`.
    pub z: f64,
    pub sigmas: f64,
    pub holds: bool,
}

/// Sample mean of realized welfare over derived-seed runs against the exact expectation.
pub fn check_monte_carlo<T: Scalar>(
    prepared: &Prepared<T>,
    law: &OutcomeDistribution<T>,
    instance: &Instance<T>,
    trials: u64,
    seed: u64,
    sigmas: f64,
) -> Result<MonteCarloReport> {
    let streams = Streams::new(seed);
    let samples = (0..trials)
        .into_par_iter()
        .map(|t| {
            let outcome = prepared.sample(streams.derive_seed(t))?;
            Ok(outcome.welfare(instance)?.to_f64())
        })
        .collect::<Result<Vec<f64>>>()?;
    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let variance = samples.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
    let standard_error = (variance / count).sqrt();
    let exact = law.expected_welfare.to_f64();
    let diff = (mean - exact).abs();
    let scale = exact.abs().max(1.0);
    let (z, holds) = if standard_error > 0.0 {
        (diff / standard_error, diff <= sigmas * standard_error + 1e-12 * scale)
    } else {
        (0.0, diff <= 1e-12 * scale)
    };
    Ok(MonteCarloReport {
        trials,
        mean,
        standard_error,
        exact: Number::of(&law.expected_welfare),
        z,
        sigmas,
        holds,
    })
}

/// A deviation in the built-in misreport families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Misreport {
    Scale { factor: String },
    Perturb { bundle: ItemSet, delta: String },
    AsAdditive,
    AsUnitDemand,
}

impl std::fmt::Display for Misreport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Misreport::Scale { factor } => write!(f, "scale x{factor}"),
            Misreport::Perturb { bundle, delta } => write!(f, "perturb {bundle} by {delta}"),
            Misreport::AsAdditive => f.write_str("additive over singletons"),
            Misreport::AsUnitDemand => f.write_str("unit-demand over singletons"),
        }
    }
}

/// Finite family of misreports tried against each bidder.
#[derive(Debug, Clone, PartialEq)]
pub struct MisreportFamily {
    pub scales: Vec<Rational>,
    /// Per-bundle perturbation size for explicit tables (both signs).
    pub delta: Option<Rational>,
    /// Swap to additive or unit-demand reports built from singleton values.
    pub swaps: bool,
}

impl Default for MisreportFamily {
    fn default() -> Self {
        MisreportFamily {
            scales: vec![crate::scalar::rational(1, 2), crate::scalar::rational(2, 1)],
            delta: Some(crate::scalar::rational(1, 2)),
            swaps: true,
        }
    }
}

impl MisreportFamily {
    pub fn describe(&self) -> String {
        let scales: Vec<String> = self.scales.iter().map(|s| s.to_string()).collect();
        format!(
            "scalings by {{{}}}; {}; {}",
            scales.join(", "),
            self.delta
                .as_ref()
                .map_or("no table perturbations".to_string(), |d| format!(
                    "explicit-table per-bundle perturbations by +/-{d}"
                )),
            if self.swaps {
                "swaps to additive and unit-demand over singleton values"
            } else {
                "no kind swaps"
            }
        )
    }

    pub fn misreports<T: Scalar>(&self, truth: &Valuation<T>) -> Result<Vec<(Misreport, Valuation<T>)>> {
        let m = truth.item_count();
        let mut out = Vec::new();
        for factor in &self.scales {
            out.push((
                Misreport::Scale { factor: factor.to_string() },
                truth.scaled(&T::from_rational(factor)),
            ));
        }
        if let (Some(delta), ValuationKind::Explicit(table)) = (&self.delta, truth.kind()) {
            let step = T::from_rational(delta);
            for bundle in ItemSet::nonempty_sorted(m) {
                let current = table[bundle.bits() as usize]
                    .clone()
                    .ok_or_else(|| Error::MalformedValuation(format!("no entry for {bundle}")))?;
                for (sign, value) in [("+", current.clone() + step.clone()), ("-", current - step.clone())] {
                    if value.is_neg() {
                        continue;
                    }
                    let mut perturbed = table.clone();
                    perturbed[bundle.bits() as usize] = Some(value);
                    out.push((
                        Misreport::Perturb {
                            bundle,
                            delta: format!("{sign}{delta}"),
                        },
                        Valuation::new(m, ValuationKind::Explicit(perturbed))?,
                    ));
                }
            }
        }
        if self.swaps {
            let singles = (0..m)
                .map(|j| truth.eval(ItemSet::singleton(j)))
                .collect::<Result<Vec<T>>>()?;
            out.push((Misreport::AsAdditive, Valuation::additive(singles.clone())));
            out.push((Misreport::AsUnitDemand, Valuation::unit_demand(singles)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub bidder: usize,
    pub misreport: Misreport,
    pub truthful_utility: Number,
    /// `None` when the mechanism rejects the misreported profile.
    pub deviation_utility: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthfulnessReport {
    pub q_variant: QVariant,
    pub asserted: bool,
    pub family: String,
    /// The family is finite: passing certifies no profitable deviation within it only.
    pub scope: String,
    pub truthful_utilities: Vec<Number>,
    pub truthful_nonnegative: bool,
    pub entries: Vec<TruthEntry>,
    pub violations: usize,
    /// Misreports the mechanism refused to run (keep probability above one).
    pub rejected: usize,
    pub holds: bool,
}

impl TruthfulnessReport {
    pub fn passed(&self) -> bool {
        !self.asserted || self.holds
    }
}

/// Expected utility `E[v_i(final)] - charge_i` of `bidder` with true
/// valuation `truth`, when the mechanism runs on `reports`.
pub fn expected_utility<T: Scalar>(
    reports: &Instance<T>,
    truth: &Valuation<T>,
    bidder: usize,
    config: &MechanismConfig,
) -> Result<T> {
    let prepared = Prepared::new(reports, config)?;
    let law = OutcomeDistribution::new(&prepared, reports)?;
    let value = law.expected_value(bidder, truth)?;
    let payments = prepared.payments()?;
    Ok(value - payments.charges[bidder].clone())
}

/// Truth-telling maximizes every bidder's exact expected utility against
/// each misreport in `family`, and that utility is nonnegative.
pub fn check_truthfulness<T: Scalar>(
    instance: &Instance<T>,
    config: &MechanismConfig,
    family: &MisreportFamily,
) -> Result<TruthfulnessReport> {
    let n = instance.bidders();
    let truthful = (0..n)
        .into_par_iter()
        .map(|i| expected_utility(instance, instance.valuation(i), i, config))
        .collect::<Result<Vec<T>>>()?;
    let mut jobs = Vec::new();
    for i in 0..n {
        for (misreport, report) in family.misreports(instance.valuation(i))? {
            jobs.push((i, misreport, report));
        }
    }
    let entries = jobs
        .into_par_iter()
        .map(|(i, misreport, report)| {
            let reports = instance.with_report(i, report)?;
            let base = TruthEntry {
                bidder: i,
                misreport,
                truthful_utility: Number::of(&truthful[i]),
                deviation_utility: None,
                rejected: None,
                holds: true,
            };
            match expected_utility(&reports, instance.valuation(i), i, config) {
                Ok(deviating) => Ok(TruthEntry {
                    deviation_utility: Some(Number::of(&deviating)),
                    holds: deviating.le_tol(&truthful[i]),
                    ..base
                }),
                Err(e @ Error::KeepProbability { .. }) => Ok(TruthEntry {
                    rejected: Some(e.to_string()),
                    ..base
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = entries.iter().filter(|e| !e.holds).count();
    let rejected = entries.iter().filter(|e| e.rejected.is_some()).count();
    let truthful_nonnegative = truthful.iter().all(|u| !u.is_neg());
    Ok(TruthfulnessReport {
        q_variant: config.q_variant,
        asserted: config.q_variant == QVariant::HaltConditional && T::MODE == Arithmetic::Exact,
        family: family.describe(),
        scope: "no profitable deviation within the listed finite family".into(),
        truthful_utilities: truthful.iter().map(Number::of).collect(),
        truthful_nonnegative,
        entries,
        violations,
        rejected,
        holds: violations == 0 && truthful_nonnegative,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyBoundViolation {
    pub rate: String,
    pub bundle: ItemSet,
    pub proxy: Number,
    pub bound: Number,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyBoundReport {
    pub rates: Vec<String>,
    pub bundles_checked: usize,
    pub violations: Vec<ProxyBoundViolation>,
    pub holds: bool,
}

/// `v'(S) >= c v(S)` for every bundle and every rate, with `v'` computed by
/// brute-force enumeration of the retained subsets.
pub fn check_proxy_bound<T: Scalar>(
    valuation: &Valuation<T>,
    rates: &[KeepRate],
    caps: &Caps,
) -> Result<ProxyBoundReport> {
    let m = valuation.item_count();
    Caps::check("items for the proxy bound", m, caps.check_items)?;
    let mut violations = Vec::new();
    let mut checked = 0;
    for &rate in rates {
        let proxy = crate::valuations::ProxyValuation::new(valuation.clone(), rate).with_cap(caps.subsets);
        let c: T = rate.value();
        for bundle in ItemSet::all(m) {
            checked += 1;
            let lhs = proxy.enumerate(bundle)?;
            let bound = c.clone() * valuation.eval(bundle)?;
            if !bound.le_tol(&lhs) {
                violations.push(ProxyBoundViolation {
                    rate: rate.to_string(),
                    bundle,
                    proxy: Number::of(&lhs),
                    bound: Number::of(&bound),
                });
            }
        }
    }
    Ok(ProxyBoundReport {
        rates: rates.iter().map(|r| r.to_string()).collect(),
        bundles_checked: checked,
        holds: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpAgreementReport {
    pub full_objective: Number,
    pub colgen_objective: Number,
    pub colgen_rounds: usize,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate_error: Option<String>,
    pub agree: bool,
    pub holds: bool,
}

/// Full-LP simplex, its duality certificate, and column generation agree.
pub fn check_lp<T: Scalar>(instance: &Instance<T>, rate: KeepRate, caps: &Caps) -> Result<LpAgreementReport> {
    use crate::lp::{build_full_lp, certify, solve_column_generation, solve_exact};
    use crate::valuations::QueryCounter;
    let proxies = instance.proxies(rate, caps);
    let counter = QueryCounter::new();
    let lp = build_full_lp(&proxies, instance.items(), caps, &counter)?;
    let full = solve_exact(&lp)?;
    let certificate = certify(&lp, &full);
    let cg = solve_column_generation(&proxies, instance.items(), &[], None, caps, &counter)?;
    let agree = full.primal.objective().approx_eq(cg.solution.primal.objective());
    Ok(LpAgreementReport {
        full_objective: Number::of(full.primal.objective()),
        colgen_objective: Number::of(cg.solution.primal.objective()),
        colgen_rounds: cg.rounds,
        certified: certificate.is_ok(),
        certificate_error: certificate.err(),
        agree,
        holds: agree,
    })
}
