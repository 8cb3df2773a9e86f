//! The configuration LP over bidder-bundle pairs:
//!
//! ```text
//! maximize    sum_{i,S} x_{i,S} v_i(S)
//! subject to  sum_{(i,S): j in S} x_{i,S} <= 1     for each item j
//!             sum_S x_{i,S} <= 1                   for each bidder i
//!             x >= 0
//! ```
//!
//! Rows are ordered bidders first, then items. On degenerate ratio ties the
//! simplex therefore drops a bidder slack before an item slack.

mod colgen;
mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::items::ItemSet;
use crate::scalar::Scalar;
use crate::valuations::{Metered, QueryCounter, SetFunction};

pub use colgen::{solve_column_generation, ColumnGeneration};
use simplex::Tableau;

#[derive(Debug, Clone, PartialEq)]
pub struct Column<T> {
    pub bidder: usize,
    pub bundle: ItemSet,
    pub coef: T,
}

#[derive(Debug, Clone)]
pub struct ConfigLp<T> {
    n: usize,
    m: usize,
    columns: Vec<Column<T>>,
}

impl<T: Scalar> ConfigLp<T> {
    pub fn new(n: usize, m: usize, columns: Vec<Column<T>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for col in &columns {
            if col.bidder >= n {
                return Err(Error::Contract(format!("column for bidder {} of {n}", col.bidder)));
            }
            if col.bundle.is_empty() || !col.bundle.within(m) {
                return Err(Error::Contract(format!("invalid column bundle {}", col.bundle)));
            }
            if col.coef.is_neg() {
                return Err(Error::Contract(format!(
                    "negative coefficient for bidder {} bundle {}",
                    col.bidder, col.bundle
                )));
            }
            if !seen.insert((col.bidder, col.bundle)) {
                return Err(Error::Contract(format!(
                    "duplicate column for bidder {} bundle {}",
                    col.bidder, col.bundle
                )));
            }
        }
        Ok(ConfigLp { n, m, columns })
    }

    pub fn bidders(&self) -> usize {
        self.n
    }

    pub fn items(&self) -> usize {
        self.m
    }

    pub fn columns(&self) -> &[Column<T>] {
        &self.columns
    }

    pub fn rows(&self) -> usize {
        self.n + self.m
    }

    /// Same feasible region with one bidder's objective coefficients zeroed.
    pub fn without_bidder(&self, bidder: usize) -> ConfigLp<T> {
        let columns = self
            .columns
            .iter()
            .map(|col| Column {
                coef: if col.bidder == bidder { T::zero() } else { col.coef.clone() },
                ..col.clone()
            })
            .collect();
        ConfigLp {
            n: self.n,
            m: self.m,
            columns,
        }
    }

    fn row_support(&self, col: &Column<T>) -> Vec<usize> {
        std::iter::once(col.bidder)
            .chain(col.bundle.iter().map(|j| self.n + j))
            .collect()
    }
}

/// One column per bidder per nonempty bundle, bidder-major, bundles in
/// canonical order. Coefficients are queried through `counter`.
pub fn build_full_lp<T, F>(
    valuations: &[F],
    m: usize,
    caps: &Caps,
    counter: &QueryCounter,
) -> Result<ConfigLp<T>>
where
    T: Scalar,
    F: SetFunction<T>,
{
    Caps::check("items for the full LP", m, caps.lp_items)?;
    let bundles = ItemSet::nonempty_sorted(m);
    let mut columns = Vec::with_capacity(valuations.len() * bundles.len());
    for (bidder, v) in valuations.iter().enumerate() {
        if v.item_count() != m {
            return Err(Error::Contract(format!(
                "bidder {bidder} valuation is over {} items, instance has {m}",
                v.item_count()
            )));
        }
        let oracle = Metered::new(v, counter);
        for &bundle in &bundles {
            columns.push(Column {
                bidder,
                bundle,
                coef: oracle.value(bundle)?,
            });
        }
    }
    ConfigLp::new(valuations.len(), m, columns)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment<T> {
    pub bidder: usize,
    pub bundle: ItemSet,
    pub x: T,
}

/// Sparse LP solution: nonzero `x_{i,S}` entries ordered by (bidder, bundle).
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSolution<T> {
    entries: Vec<Assignment<T>>,
    objective: T,
}

impl<T: Scalar> FractionalSolution<T> {
    pub fn new(mut entries: Vec<Assignment<T>>, objective: T) -> Self {
        entries.sort_by_key(|e| (e.bidder, e.bundle));
        FractionalSolution { entries, objective }
    }

    pub fn empty() -> Self {
        FractionalSolution {
            entries: Vec::new(),
            objective: T::zero(),
        }
    }

    /// Builds a solution and computes its objective from `value(bidder, bundle)`.
    pub fn with_values(
        entries: Vec<Assignment<T>>,
        mut value: impl FnMut(usize, ItemSet) -> Result<T>,
    ) -> Result<Self> {
        let mut objective = T::zero();
        for e in &entries {
            objective = objective + e.x.clone() * value(e.bidder, e.bundle)?;
        }
        Ok(FractionalSolution::new(entries, objective))
    }

    pub fn entries(&self) -> &[Assignment<T>] {
        &self.entries
    }

    pub fn objective(&self) -> &T {
        &self.objective
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Support of one bidder, in canonical bundle order.
    pub fn bidder_support(&self, bidder: usize) -> impl Iterator<Item = &Assignment<T>> {
        self.entries.iter().filter(move |e| e.bidder == bidder)
    }

    pub fn mass(&self, bidder: usize) -> T {
        self.bidder_support(bidder)
            .fold(T::zero(), |acc, e| acc + e.x.clone())
    }

    pub fn x(&self, bidder: usize, bundle: ItemSet) -> T {
        self.entries
            .iter()
            .find(|e| e.bidder == bidder && e.bundle == bundle)
            .map_or_else(T::zero, |e| e.x.clone())
    }

    /// `sum_{i,S} x_{i,S} f(i, S)`.
    pub fn weighted_sum(&self, mut f: impl FnMut(usize, ItemSet) -> Result<T>) -> Result<T> {
        let mut total = T::zero();
        for e in &self.entries {
            total = total + e.x.clone() * f(e.bidder, e.bundle)?;
        }
        Ok(total)
    }

    pub fn convert<U: Scalar>(&self, f: impl Fn(&T) -> U) -> FractionalSolution<U> {
        FractionalSolution {
            entries: self
                .entries
                .iter()
                .map(|e| Assignment {
                    bidder: e.bidder,
                    bundle: e.bundle,
                    x: f(&e.x),
                })
                .collect(),
            objective: f(&self.objective),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "kebab-case")]
pub enum Violation {
    Negative { bidder: usize, bundle: ItemSet, x: String },
    OutOfRange { bidder: usize, bundle: ItemSet },
    Item { item: usize, load: String },
    Bidder { bidder: usize, mass: String },
}

/// Checks nonnegativity, item supply and one-bundle-per-bidder constraints.
pub fn check_feasibility<T: Scalar>(
    sol: &FractionalSolution<T>,
    n: usize,
    m: usize,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut item_load = vec![T::zero(); m];
    let mut bidder_mass = vec![T::zero(); n];
    for e in sol.entries() {
        if e.bidder >= n || !e.bundle.within(m) || e.bundle.is_empty() {
            violations.push(Violation::OutOfRange {
                bidder: e.bidder,
                bundle: e.bundle,
            });
            continue;
        }
        if e.x.is_neg() {
            violations.push(Violation::Negative {
                bidder: e.bidder,
                bundle: e.bundle,
                x: e.x.encode(),
            });
        }
        for j in e.bundle.iter() {
            item_load[j] = item_load[j].clone() + e.x.clone();
        }
        bidder_mass[e.bidder] = bidder_mass[e.bidder].clone() + e.x.clone();
    }
    for (item, load) in item_load.into_iter().enumerate() {
        if (load.clone() - T::one()).is_pos() {
            violations.push(Violation::Item {
                item,
                load: load.encode(),
            });
        }
    }
    for (bidder, mass) in bidder_mass.into_iter().enumerate() {
        if (mass.clone() - T::one()).is_pos() {
            violations.push(Violation::Bidder {
                bidder,
                mass: mass.encode(),
            });
        }
    }
    violations
}

/// Primal solution together with the dual prices that certify it.
#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub primal: FractionalSolution<T>,
    pub item_duals: Vec<T>,
    pub bidder_duals: Vec<T>,
    pub pivots: usize,
}

/// Optimal basic solution by Bland-rule simplex from the all-slack basis.
pub fn solve_exact<T: Scalar>(lp: &ConfigLp<T>) -> Result<LpSolution<T>> {
    let support: Vec<Vec<usize>> = lp.columns.iter().map(|c| lp.row_support(c)).collect();
    let cost: Vec<T> = lp.columns.iter().map(|c| c.coef.clone()).collect();
    // Bland's rule cannot cycle; this only guards against numerical trouble in float mode.
    let max_pivots = 50 * (lp.columns.len() + lp.rows()) + 1000;
    let out = Tableau::new(lp.rows(), &support, &cost).solve(max_pivots)?;
    let entries = lp
        .columns
        .iter()
        .zip(out.primal)
        .filter(|(_, x)| x.is_pos())
        .map(|(col, x)| Assignment {
            bidder: col.bidder,
            bundle: col.bundle,
            x,
        })
        .collect();
    let mut bidder_duals = out.duals;
    let item_duals = bidder_duals.split_off(lp.n);
    Ok(LpSolution {
        primal: FractionalSolution::new(entries, out.objective),
        item_duals,
        bidder_duals,
        pivots: out.pivots,
    })
}

/// Verifies optimality through LP duality: primal feasibility, dual
/// feasibility over every column, and equal objectives.
pub fn certify<T: Scalar>(lp: &ConfigLp<T>, sol: &LpSolution<T>) -> std::result::Result<(), String> {
    let violations = check_feasibility(&sol.primal, lp.n, lp.m);
    if !violations.is_empty() {
        return Err(format!("primal infeasible: {violations:?}"));
    }
    let coef: BTreeMap<(usize, ItemSet), &T> = lp
        .columns
        .iter()
        .map(|c| ((c.bidder, c.bundle), &c.coef))
        .collect();
    let recomputed = sol
        .primal
        .weighted_sum(|i, s| {
            coef.get(&(i, s))
                .map(|&c| c.clone())
                .ok_or_else(|| Error::Contract(format!("support entry ({i}, {s}) is not a column")))
        })
        .map_err(|e| e.to_string())?;
    if !recomputed.approx_eq(sol.primal.objective()) {
        return Err("stored objective disagrees with entries".into());
    }
    if sol.item_duals.iter().chain(&sol.bidder_duals).any(|y| y.is_neg()) {
        return Err("negative dual price".into());
    }
    for col in &lp.columns {
        let price = col
            .bundle
            .iter()
            .fold(sol.bidder_duals[col.bidder].clone(), |acc, j| acc + sol.item_duals[j].clone());
        if (col.coef.clone() - price).is_pos() {
            return Err(format!(
                "dual infeasible at bidder {} bundle {}",
                col.bidder, col.bundle
            ));
        }
    }
    let dual_objective = sol
        .item_duals
        .iter()
        .chain(&sol.bidder_duals)
        .fold(T::zero(), |acc, y| acc + y.clone());
    if !dual_objective.approx_eq(sol.primal.objective()) {
        return Err(format!(
            "duality gap: primal {} vs dual {}",
            sol.primal.objective().encode(),
            dual_objective.encode()
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational as r, Rational};
    use crate::valuations::{KeepRate, ProxyValuation, Valuation};

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| r(x, 1)).collect()
    }

    fn set(items: &[usize]) -> ItemSet {
        ItemSet::from_items(items.iter().copied(), 64).unwrap()
    }

    #[test]
    fn full_lp_column_counts() {
        let counter = QueryCounter::new();
        let caps = Caps::default();
        let one = vec![Valuation::additive(ints(&[3, 5]))];
        let lp = build_full_lp(&one, 2, &caps, &counter).unwrap();
        assert_eq!(lp.columns().len(), 3);
        let coefs: Vec<(ItemSet, Rational)> =
            lp.columns().iter().map(|c| (c.bundle, c.coef.clone())).collect();
        assert_eq!(
            coefs,
            vec![(set(&[0]), r(3, 1)), (set(&[0, 1]), r(8, 1)), (set(&[1]), r(5, 1))]
        );
        let three = vec![Valuation::additive(ints(&[1, 1, 1])); 3];
        assert_eq!(build_full_lp(&three, 3, &caps, &counter).unwrap().columns().len(), 21);
        assert_eq!(counter.snapshot().value_queries, 24);
    }

    #[test]
    fn full_lp_respects_cap() {
        let caps = Caps {
            lp_items: 2,
            ..Caps::default()
        };
        let v = vec![Valuation::additive(ints(&[1, 1, 1]))];
        assert!(matches!(
            build_full_lp(&v, 3, &caps, &QueryCounter::new()),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn duplicate_and_empty_columns_rejected() {
        let col = |bundle| Column {
            bidder: 0,
            bundle,
            coef: r(1, 1),
        };
        assert!(ConfigLp::new(1, 2, vec![col(set(&[0])), col(set(&[0]))]).is_err());
        assert!(ConfigLp::new(1, 2, vec![col(ItemSet::EMPTY)]).is_err());
    }

    #[test]
    fn single_bidder_takes_everything() {
        let counter = QueryCounter::new();
        let caps = Caps::default();
        let pv = vec![ProxyValuation::new(
            Valuation::additive(ints(&[3, 5, 2])),
            KeepRate::new(2).unwrap(),
        )];
        let lp = build_full_lp(&pv, 3, &caps, &counter).unwrap();
        let sol = solve_exact(&lp).unwrap();
        assert_eq!(*sol.primal.objective(), r(5, 1));
        certify(&lp, &sol).unwrap();
        assert_eq!(sol.primal.x(0, set(&[0, 1, 2])), r(1, 1));
    }

    #[test]
    fn two_additive_bidders_split_items() {
        let counter = QueryCounter::new();
        let v = vec![Valuation::additive(ints(&[3, 1])), Valuation::additive(ints(&[1, 5]))];
        let lp = build_full_lp(&v, 2, &Caps::default(), &counter).unwrap();
        let sol = solve_exact(&lp).unwrap();
        assert_eq!(*sol.primal.objective(), r(8, 1));
        assert_eq!(sol.primal.x(0, set(&[0])), r(1, 1));
        assert_eq!(sol.primal.x(1, set(&[1])), r(1, 1));
        certify(&lp, &sol).unwrap();
    }

    #[test]
    fn two_unit_demand_bidders() {
        let counter = QueryCounter::new();
        let v = vec![Valuation::unit_demand(ints(&[1, 1])); 2];
        let lp = build_full_lp(&v, 2, &Caps::default(), &counter).unwrap();
        let sol = solve_exact(&lp).unwrap();
        assert_eq!(*sol.primal.objective(), r(2, 1));
        certify(&lp, &sol).unwrap();
    }

    #[test]
    fn zeroing_a_bidder_keeps_region() {
        let counter = QueryCounter::new();
        let v = vec![Valuation::additive(ints(&[3, 1])), Valuation::additive(ints(&[1, 5]))];
        let lp = build_full_lp(&v, 2, &Caps::default(), &counter).unwrap();
        let minus = lp.without_bidder(1);
        assert_eq!(minus.columns().len(), lp.columns().len());
        assert_eq!(*solve_exact(&minus).unwrap().primal.objective(), r(4, 1));
    }

    #[test]
    fn feasibility_examples() {
        let sol = FractionalSolution::new(
            vec![
                Assignment { bidder: 0, bundle: set(&[0]), x: r(3, 5) },
                Assignment { bidder: 1, bundle: set(&[0]), x: r(3, 5) },
            ],
            r(0, 1),
        );
        let v = check_feasibility(&sol, 2, 1);
        assert_eq!(v, vec![Violation::Item { item: 0, load: "6/5".into() }]);
        assert!(check_feasibility(&FractionalSolution::<Rational>::empty(), 2, 2).is_empty());
        let over = FractionalSolution::new(
            vec![
                Assignment { bidder: 0, bundle: set(&[0]), x: r(2, 3) },
                Assignment { bidder: 0, bundle: set(&[1]), x: r(2, 3) },
            ],
            r(0, 1),
        );
        assert_eq!(
            check_feasibility(&over, 1, 2),
            vec![Violation::Bidder { bidder: 0, mass: "4/3".into() }]
        );
    }
}
