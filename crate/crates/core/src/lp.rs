//! Dense two-phase simplex for small linear programs.
//!
//! Minimizes `c·x` subject to linear constraints and `x ≥ 0`. Pricing is
//! Dantzig's rule, falling back to Bland's rule while pivots stay
//! degenerate so the method cannot cycle. The final basis is re-solved
//! against the original constraint matrix to shed accumulated tableau
//! round-off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    max_pivots: usize,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_STREAK: usize = 16;

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            max_pivots: 200_000,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        debug_assert!(terms.iter().all(|&(j, _)| j < self.num_vars));
        self.constraints.push(Constraint {
            terms,
            relation,
            rhs,
        });
    }

    pub fn with_max_pivots(mut self, max_pivots: usize) -> Self {
        self.max_pivots = max_pivots;
        self
    }

    pub fn solve(&self) -> Result<LpSolution> {
        if self.objective.iter().any(|c| !c.is_finite())
            || self
                .constraints
                .iter()
                .any(|c| !c.rhs.is_finite() || c.terms.iter().any(|t| !t.1.is_finite()))
        {
            return Err(Error::NonFinite("linear program data"));
        }
        Tableau::build(self).run(self)
    }
}

/// Terms, relation and right-hand side of one normalized constraint.
type Row = (Vec<(usize, f64)>, Relation, f64);

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major, `rows × (cols + 1)`; the last column is the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    /// Phase-one and phase-two reduced costs; index `cols` holds `-objective`.
    phase1: Vec<f64>,
    phase2: Vec<f64>,
    first_artificial: usize,
    active: Vec<bool>,
    /// Equality-form matrix before any pivot, kept for the final re-solve.
    original: Vec<f64>,
    rhs: Vec<f64>,
    costs: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars;
        let m = lp.constraints.len();
        let slack_count = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        // normalize every row to a nonnegative right-hand side first
        let rows: Vec<Row> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (
                        c.terms.iter().map(|&(j, a)| (j, -a)).collect(),
                        rel,
                        -c.rhs,
                    )
                } else {
                    (c.terms.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let artificial_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + slack_count;
        let cols = first_artificial + artificial_count;
        let stride = cols + 1;

        let mut data = vec![0.0; m * stride];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = first_artificial;
        for (i, (terms, rel, rhs)) in rows.iter().enumerate() {
            let row = &mut data[i * stride..(i + 1) * stride];
            for &(j, a) in terms {
                row[j] += a;
            }
            row[cols] = *rhs;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }

        let mut costs = vec![0.0; cols];
        costs[..n].copy_from_slice(&lp.objective);
        let mut phase1 = vec![0.0; stride];
        for c in phase1.iter_mut().take(cols).skip(first_artificial) {
            *c = 1.0;
        }
        let mut phase2 = vec![0.0; stride];
        phase2[..cols].copy_from_slice(&costs);
        // price out the initial basis
        for i in 0..m {
            let b = basis[i];
            let row = &data[i * stride..(i + 1) * stride];
            let c1 = phase1[b];
            let c2 = phase2[b];
            if c1 != 0.0 || c2 != 0.0 {
                for j in 0..stride {
                    phase1[j] -= c1 * row[j];
                    phase2[j] -= c2 * row[j];
                }
            }
        }
        let rhs = (0..m).map(|i| data[i * stride + cols]).collect();
        Self {
            rows: m,
            cols,
            original: data.clone(),
            data,
            basis,
            phase1,
            phase2,
            first_artificial,
            active: vec![true; m],
            rhs,
            costs,
            pivots: 0,
        }
    }

    fn stride(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.stride() + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let stride = self.stride();
        let p = self.at(r, c);
        {
            let row = &mut self.data[r * stride..(r + 1) * stride];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        let nz: Vec<usize> = (0..stride)
            .filter(|&j| self.data[r * stride + j] != 0.0)
            .collect();
        let pivot_row: Vec<f64> = nz.iter().map(|&j| self.data[r * stride + j]).collect();
        for i in 0..self.rows {
            if i == r || !self.active[i] {
                continue;
            }
            let f = self.data[i * stride + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * stride..(i + 1) * stride];
            for (&j, &v) in nz.iter().zip(&pivot_row) {
                row[j] -= f * v;
            }
            row[c] = 0.0;
        }
        for obj in [&mut self.phase1, &mut self.phase2] {
            let f = obj[c];
            if f != 0.0 {
                for (&j, &v) in nz.iter().zip(&pivot_row) {
                    obj[j] -= f * v;
                }
                obj[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs simplex iterations on the given phase until optimal.
    fn optimize(&mut self, phase_one: bool, max_pivots: usize) -> Result<()> {
        let limit = if phase_one { self.cols } else { self.first_artificial };
        let scale = {
            let obj = if phase_one { &self.phase1 } else { &self.phase2 };
            obj[..limit].iter().fold(1.0f64, |m, v| m.max(v.abs()))
        };
        let dual_tol = 1e-11 * scale;
        let mut degenerate = 0usize;
        loop {
            if self.pivots >= max_pivots {
                return Err(Error::IterationLimit(max_pivots));
            }
            let obj = if phase_one { &self.phase1 } else { &self.phase2 };
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -dual_tol;
            for (j, &d) in obj[..limit].iter().enumerate() {
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else {
                return Ok(());
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                if !self.active[i] {
                    continue;
                }
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.at(i, self.cols).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best_ratio)) => {
                            let tie = (ratio - best_ratio).abs() <= 1e-13 * best_ratio.max(1.0);
                            if ratio < best_ratio && !tie
                                || tie && self.basis[i] < self.basis[r]
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let n = lp.num_vars;
        let rhs_scale = self.rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if self.first_artificial < self.cols {
            self.optimize(true, lp.max_pivots)?;
            let infeasibility = -self.phase1[self.cols];
            if infeasibility > 1e-9 * rhs_scale {
                return Err(Error::Infeasible(format!(
                    "phase one residual {infeasibility:.3e}"
                )));
            }
            // drive artificials out of the basis or drop redundant rows
            for i in 0..self.rows {
                if self.basis[i] < self.first_artificial {
                    continue;
                }
                let mut best: Option<(usize, f64)> = None;
                for j in 0..self.first_artificial {
                    let a = self.at(i, j).abs();
                    if a > 1e-9 && best.is_none_or(|(_, b)| a > b) {
                        best = Some((j, a));
                    }
                }
                match best {
                    Some((j, _)) => self.pivot(i, j),
                    None => self.active[i] = false,
                }
            }
        }
        self.optimize(false, lp.max_pivots)?;

        let mut x_full = vec![0.0; self.cols];
        for i in 0..self.rows {
            if self.active[i] {
                x_full[self.basis[i]] = self.at(i, self.cols);
            }
        }
        if let Some(refined) = self.resolve_basis() {
            x_full = refined;
        }
        for v in x_full.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let x: Vec<f64> = x_full[..n].to_vec();
        let objective = x.iter().zip(&self.costs).map(|(a, c)| a * c).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: self.pivots,
        })
    }

    /// Solves `B x_B = b` on the untouched constraint matrix.
    fn resolve_basis(&self) -> Option<Vec<f64>> {
        let rows: Vec<usize> = (0..self.rows).filter(|&i| self.active[i]).collect();
        let m = rows.len();
        if m == 0 {
            return Some(vec![0.0; self.cols]);
        }
        let stride = self.stride();
        let basis: Vec<usize> = rows.iter().map(|&i| self.basis[i]).collect();
        if basis.iter().any(|&b| b >= self.first_artificial) {
            return None;
        }
        let b_mat = DMatrix::from_fn(m, m, |r, c| self.original[rows[r] * stride + basis[c]]);
        let rhs = DVector::from_iterator(m, rows.iter().map(|&i| self.rhs[i]));
        let sol = b_mat.lu().solve(&rhs)?;
        let scale = self.rhs.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if sol.iter().any(|v| !v.is_finite() || *v < -1e-9 * scale) {
            return None;
        }
        // reject the re-solve if it disagrees with the tableau
        for (k, &i) in rows.iter().enumerate() {
            if (sol[k] - self.at(i, self.cols)).abs() > 1e-7 * scale {
                return None;
            }
        }
        let mut x = vec![0.0; self.cols];
        for (k, &b) in basis.iter().enumerate() {
            x[b] = sol[k];
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, -3.0);
        lp.set_cost(1, -5.0);
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, 4.0);
        lp.add_constraint(vec![(1, 2.0)], Relation::Le, 12.0);
        lp.add_constraint(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y s.t. x + y = 1, x ≥ 0.25, y ≥ 0.25 → x = 0.75
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, 1.0);
        lp.set_cost(1, 2.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        lp.add_constraint(vec![(0, 1.0)], Relation::Ge, 0.25);
        lp.add_constraint(vec![(1, 1.0)], Relation::Ge, 0.25);
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.25).abs() < 1e-12);
        assert!((s.x[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, 1.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        lp.add_constraint(vec![(0, 2.0), (1, 2.0)], Relation::Eq, 2.0);
        let s = lp.solve().unwrap();
        assert!(s.objective.abs() < 1e-12);
        assert!((s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x ≤ -2  ⇔  x ≥ 2
        let mut lp = LinearProgram::new(1);
        lp.set_cost(0, 1.0);
        lp.add_constraint(vec![(0, -1.0)], Relation::Le, -2.0);
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, 1.0);
        lp.add_constraint(vec![(0, 1.0)], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), Err(Error::Infeasible(_))));

        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, -1.0);
        lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap_err(), Error::Unbounded);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example under Dantzig pricing without anti-cycling.
        let mut lp = LinearProgram::new(4);
        for (j, c) in [-0.75, 150.0, -0.02, 6.0].into_iter().enumerate() {
            lp.set_cost(j, c);
        }
        lp.add_constraint(
            vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint(
            vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint(vec![(2, 1.0)], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 0.05).abs() < 1e-12);
    }
}
