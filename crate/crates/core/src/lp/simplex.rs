//! Dense primal simplex for `max c·x  s.t.  A x <= 1, x >= 0` with a 0/1
//! constraint matrix, started from the all-slack basis and pivoted with
//! Bland's rule. Structural variables precede slacks in the index order, so
//! the basis reached is a deterministic function of the column order.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) struct Tableau<T> {
    rows: usize,
    /// Structural columns; slacks follow at `cols + r`.
    cols: usize,
    a: Vec<Vec<T>>,
    rhs: Vec<T>,
    /// Reduced costs `c_j - c_B B^-1 A_j`, structural then slack.
    reduced: Vec<T>,
    cost: Vec<T>,
    basis: Vec<usize>,
}

pub(crate) struct SimplexOutput<T> {
    /// Value of each structural variable.
    pub primal: Vec<T>,
    /// Dual price of each row.
    pub duals: Vec<T>,
    pub objective: T,
    pub pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    /// `support[k]` lists the rows in which structural column `k` has a 1.
    pub fn new(rows: usize, support: &[Vec<usize>], cost: &[T]) -> Self {
        let cols = support.len();
        let width = cols + rows;
        let mut a = vec![vec![T::zero(); width]; rows];
        for (k, rs) in support.iter().enumerate() {
            for &r in rs {
                a[r][k] = T::one();
            }
        }
        for (r, row) in a.iter_mut().enumerate() {
            row[cols + r] = T::one();
        }
        let mut full_cost: Vec<T> = cost.to_vec();
        full_cost.extend((0..rows).map(|_| T::zero()));
        Tableau {
            rows,
            cols,
            a,
            rhs: vec![T::one(); rows],
            reduced: full_cost.clone(),
            cost: full_cost,
            basis: (cols..cols + rows).collect(),
        }
    }

    pub fn solve(mut self, max_pivots: usize) -> Result<SimplexOutput<T>> {
        let mut pivots = 0;
        loop {
            let Some(enter) = self.reduced.iter().position(|d| d.is_pos()) else {
                break;
            };
            let leave = self.ratio_test(enter).ok_or_else(|| {
                Error::Contract("unbounded direction in a bounded packing LP".into())
            })?;
            self.pivot(leave, enter);
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Diagnostics(format!(
                    "simplex exceeded {max_pivots} pivots"
                )));
            }
        }
        Ok(self.output(pivots))
    }

    /// Minimum ratio row; ties go to the smallest basic variable index.
    fn ratio_test(&self, enter: usize) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for r in 0..self.rows {
            let coef = &self.a[r][enter];
            if !coef.is_pos() {
                continue;
            }
            let ratio = self.rhs[r].clone() / coef.clone();
            best = match best {
                None => Some((r, ratio)),
                Some((br, bratio)) => {
                    let diff = ratio.clone() - bratio.clone();
                    if diff.is_neg() || (diff.approx_zero() && self.basis[r] < self.basis[br]) {
                        Some((r, ratio))
                    } else {
                        Some((br, bratio))
                    }
                }
            };
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, leave: usize, enter: usize) {
        let width = self.cols + self.rows;
        let pivot = self.a[leave][enter].clone();
        for k in 0..width {
            if !self.a[leave][k].is_zero() {
                self.a[leave][k] = self.a[leave][k].clone() / pivot.clone();
            }
        }
        self.rhs[leave] = self.rhs[leave].clone() / pivot;
        let pivot_row = self.a[leave].clone();
        let pivot_rhs = self.rhs[leave].clone();
        for r in 0..self.rows {
            if r == leave {
                continue;
            }
            let factor = self.a[r][enter].clone();
            if factor.is_zero() {
                continue;
            }
            for k in 0..width {
                if !pivot_row[k].is_zero() {
                    self.a[r][k] = self.a[r][k].clone() - factor.clone() * pivot_row[k].clone();
                }
            }
            self.a[r][enter] = T::zero();
            self.rhs[r] = self.rhs[r].clone() - factor * pivot_rhs.clone();
        }
        let factor = self.reduced[enter].clone();
        for k in 0..width {
            if !pivot_row[k].is_zero() {
                self.reduced[k] = self.reduced[k].clone() - factor.clone() * pivot_row[k].clone();
            }
        }
        self.reduced[enter] = T::zero();
        self.basis[leave] = enter;
    }

    fn output(self, pivots: usize) -> SimplexOutput<T> {
        let mut primal = vec![T::zero(); self.cols];
        let mut objective = T::zero();
        for (r, &b) in self.basis.iter().enumerate() {
            objective = objective + self.cost[b].clone() * self.rhs[r].clone();
            if b < self.cols {
                primal[b] = self.rhs[r].clone();
            }
        }
        let duals = (0..self.rows)
            .map(|r| -self.reduced[self.cols + r].clone())
            .collect();
        SimplexOutput {
            primal,
            duals,
            objective,
            pivots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational as r, Rational};

    #[test]
    fn odd_cycle_is_half_integral() {
        // Three rows, three columns each covering two rows: optimum 3/2.
        let support = vec![vec![0, 1], vec![1, 2], vec![0, 2]];
        let cost = vec![r(1, 1), r(1, 1), r(1, 1)];
        let out = Tableau::<Rational>::new(3, &support, &cost).solve(100).unwrap();
        assert_eq!(out.objective, r(3, 2));
        assert!(out.primal.iter().all(|x| *x == r(1, 2)));
        assert!(out.duals.iter().all(|y| *y == r(1, 2)));
    }

    #[test]
    fn no_positive_costs_stays_at_origin() {
        let support = vec![vec![0]];
        let out = Tableau::<Rational>::new(1, &support, &[r(0, 1)]).solve(10).unwrap();
        assert_eq!(out.objective, r(0, 1));
        assert_eq!(out.pivots, 0);
    }

    #[test]
    fn float_backend_agrees() {
        let support = vec![vec![0, 1], vec![1, 2], vec![0, 2], vec![0]];
        let cost = vec![2.0, 2.0, 2.0, 1.5];
        let out = Tableau::<f64>::new(3, &support, &cost).solve(100).unwrap();
        assert!((out.objective - 3.5).abs() < 1e-9);
    }
}
