//! Restricted-master column generation priced by demand queries.

use std::collections::HashSet;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::items::ItemSet;
use crate::lp::{solve_exact, Column, ConfigLp, LpSolution};
use crate::scalar::Scalar;
use crate::valuations::{Metered, QueryCounter, SetFunction};

#[derive(Debug, Clone)]
pub struct ColumnGeneration<T> {
    pub solution: LpSolution<T>,
    /// Pricing rounds, including the final one that found no column.
    pub rounds: usize,
    /// Columns in the final restricted master.
    pub columns: usize,
}

/// Solves the configuration LP without enumerating bundles.
///
/// Each round solves the restricted master, then asks every bidder for its
/// demand at the item duals. A bundle enters when `v_i(S) - y(S) - u_i > 0`.
/// `max_rounds` defaults to `10 (n + m) 2^m`.
pub fn solve_column_generation<T, F>(
    valuations: &[F],
    m: usize,
    start_columns: &[(usize, ItemSet)],
    max_rounds: Option<usize>,
    caps: &Caps,
    counter: &QueryCounter,
) -> Result<ColumnGeneration<T>>
where
    T: Scalar,
    F: SetFunction<T>,
{
    let n = valuations.len();
    let cap = max_rounds.unwrap_or_else(|| {
        let blocks = 1usize.checked_shl(m as u32).unwrap_or(usize::MAX);
        (10 * (n + m)).saturating_mul(blocks)
    });
    let oracles: Vec<Metered<'_, F>> = valuations.iter().map(|v| Metered::new(v, counter)).collect();

    let mut present: HashSet<(usize, ItemSet)> = HashSet::new();
    let mut columns: Vec<Column<T>> = Vec::new();
    for &(bidder, bundle) in start_columns {
        if bidder >= n || bundle.is_empty() || !present.insert((bidder, bundle)) {
            continue;
        }
        columns.push(Column {
            bidder,
            bundle,
            coef: oracles[bidder].value(bundle)?,
        });
    }

    for round in 1..=cap {
        let master = ConfigLp::new(n, m, columns.clone())?;
        let solution = solve_exact(&master)?;
        let mut added = false;
        for (bidder, oracle) in oracles.iter().enumerate() {
            let bundle = oracle.demand_query(&solution.item_duals, caps)?;
            if bundle.is_empty() {
                continue;
            }
            let coef: T = oracle.value(bundle)?;
            let price = bundle.iter().fold(solution.bidder_duals[bidder].clone(), |acc, j| {
                acc + solution.item_duals[j].clone()
            });
            if !(coef.clone() - price).is_pos() {
                continue;
            }
            if !present.insert((bidder, bundle)) {
                return Err(Error::Diagnostics(format!(
                    "column ({bidder}, {bundle}) priced out again; reduced costs are inconsistent"
                )));
            }
            columns.push(Column { bidder, bundle, coef });
            added = true;
        }
        if !added {
            return Ok(ColumnGeneration {
                solution,
                rounds: round,
                columns: columns.len(),
            });
        }
    }
    Err(Error::Diagnostics(format!(
        "column generation did not converge within {cap} rounds ({} columns)",
        columns.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::build_full_lp;
    use crate::scalar::{rational as r, Rational};
    use crate::valuations::{KeepRate, ProxyValuation, Valuation, ValuationKind};

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| r(x, 1)).collect()
    }

    #[test]
    fn single_additive_bidder_converges_fast() {
        let counter = QueryCounter::new();
        let pv = vec![ProxyValuation::new(
            Valuation::additive(ints(&[3, 5, 2])),
            KeepRate::new(2).unwrap(),
        )];
        let cg = solve_column_generation(&pv, 3, &[], None, &Caps::default(), &counter).unwrap();
        assert!(cg.rounds <= 2);
        assert_eq!(*cg.solution.primal.objective(), r(5, 1));
        assert!(counter.snapshot().demand_queries >= 1);
    }

    #[test]
    fn zero_valuations_give_empty_support() {
        let counter = QueryCounter::new();
        let v = vec![Valuation::additive(ints(&[0, 0])); 2];
        let cg = solve_column_generation(&v, 2, &[], None, &Caps::default(), &counter).unwrap();
        assert_eq!(*cg.solution.primal.objective(), r(0, 1));
        assert!(cg.solution.primal.is_empty());
    }

    #[test]
    fn matches_full_lp_on_xos_triangle() {
        let counter = QueryCounter::new();
        let caps = Caps::default();
        let clause = |a: i64, b: i64, c: i64| ints(&[a, b, c]);
        let v: Vec<Valuation<Rational>> = vec![
            Valuation::new(3, ValuationKind::Xos(vec![clause(2, 2, 0), clause(3, 0, 0)])).unwrap(),
            Valuation::new(3, ValuationKind::Xos(vec![clause(0, 2, 2), clause(0, 3, 0)])).unwrap(),
            Valuation::new(3, ValuationKind::Xos(vec![clause(2, 0, 2), clause(0, 0, 3)])).unwrap(),
        ];
        let full = solve_exact(&build_full_lp(&v, 3, &caps, &counter).unwrap()).unwrap();
        let cg = solve_column_generation(&v, 3, &[], None, &caps, &counter).unwrap();
        assert_eq!(cg.solution.primal.objective(), full.primal.objective());
    }

    #[test]
    fn round_cap_reports_diagnostics() {
        let counter = QueryCounter::new();
        let v = vec![Valuation::additive(ints(&[1, 1]))];
        let err = solve_column_generation(&v, 2, &[], Some(1), &Caps::default(), &counter).unwrap_err();
        assert!(matches!(err, Error::Diagnostics(_)));
    }
}
