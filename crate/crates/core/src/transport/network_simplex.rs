//! Transportation simplex on a spanning-tree basis.
//!
//! The basis is a spanning tree of the bipartite supply/demand graph with
//! `m + n − 1` cells (some possibly at zero flow). Node potentials come from
//! the tree, the entering cell is chosen by reduced cost, and flow is pushed
//! around the unique cycle it closes.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};

/// Marginals of a transport problem must balance to this tolerance.
pub const BALANCE_TOL: f64 = 1e-9;

/// Consecutive zero-step pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 32;

/// An optimal coupling and its cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    pub pi: Vec<Vec<f64>>,
    pub cost: f64,
    pub pivots: usize,
}

/// Solves `min Σ c_ij π_ij` over couplings of `supply` and `demand`.
pub fn solve_transport_lp(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Result<Coupling> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(Error::Empty("transport marginal"));
    }
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::Shape(format!(
            "cost matrix must be {m}×{n} to match the marginals"
        )));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("transport cost"));
    }
    for (index, &value) in supply.iter().chain(demand).enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite("transport marginal"));
        }
        if value < 0.0 {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    let sa: f64 = supply.iter().sum();
    let sb: f64 = demand.iter().sum();
    if (sa - sb).abs() > BALANCE_TOL {
        return Err(Error::Infeasible(format!(
            "marginal masses differ: {sa} vs {sb}"
        )));
    }

    let mut solver = Solver::northwest_corner(cost, supply, demand);
    solver.optimize()?;
    Ok(solver.into_coupling())
}

struct Solver<'a> {
    cost: &'a [Vec<f64>],
    m: usize,
    n: usize,
    /// Basic cells `(i, j)` and their flows.
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    pivots: usize,
}

impl<'a> Solver<'a> {
    fn northwest_corner(cost: &'a [Vec<f64>], supply: &[f64], demand: &[f64]) -> Self {
        let m = supply.len();
        let n = demand.len();
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        let mut ra = supply[0];
        let mut rb = demand[0];
        loop {
            let x = ra.min(rb).max(0.0);
            cells.push((i, j));
            flow.push(x);
            ra -= x;
            rb -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            // advance exactly one index so the staircase stays a spanning tree
            if j == n - 1 || (i < m - 1 && ra <= rb) {
                i += 1;
                ra = supply[i];
            } else {
                j += 1;
                rb = demand[j];
            }
        }
        Self {
            cost,
            m,
            n,
            cells,
            flow,
            pivots: 0,
        }
    }

    fn optimize(&mut self) -> Result<()> {
        let (m, n) = (self.m, self.n);
        let cmax = self
            .cost
            .iter()
            .flatten()
            .fold(0.0f64, |a, c| a.max(c.abs()));
        let tol = 1e-12 * cmax.max(f64::MIN_POSITIVE);
        let max_pivots = 1_000_000usize.max(50 * m * n);
        let nodes = m + n;
        let mut is_basic = vec![false; m * n];
        for &(i, j) in &self.cells {
            is_basic[i * n + j] = true;
        }
        let mut degenerate = 0usize;
        let block = ((m * n) as f64).sqrt().ceil().max(n as f64) as usize;
        let mut next_scan = 0usize;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
        let mut potential = vec![0.0; nodes];
        let mut parent = vec![usize::MAX; nodes];
        let mut parent_cell = vec![usize::MAX; nodes];
        let mut depth = vec![0usize; nodes];
        let mut queue = VecDeque::with_capacity(nodes);

        loop {
            // tree structure and potentials u_i (rows) / v_j (cols), rooted at row 0
            for a in adj.iter_mut() {
                a.clear();
            }
            for (k, &(i, j)) in self.cells.iter().enumerate() {
                adj[i].push((m + j, k));
                adj[m + j].push((i, k));
            }
            parent.iter_mut().for_each(|p| *p = usize::MAX);
            parent[0] = 0;
            potential[0] = 0.0;
            depth[0] = 0;
            queue.clear();
            queue.push_back(0);
            while let Some(u) = queue.pop_front() {
                for &(w, k) in &adj[u] {
                    if parent[w] != usize::MAX {
                        continue;
                    }
                    let (i, j) = self.cells[k];
                    // c_ij = u_i + v_j
                    potential[w] = self.cost[i][j] - potential[u];
                    parent[w] = u;
                    parent_cell[w] = k;
                    depth[w] = depth[u] + 1;
                    queue.push_back(w);
                }
            }
            debug_assert!(parent.iter().all(|&p| p != usize::MAX), "basis is not a tree");

            // block pricing: scan cyclically from where the last scan stopped
            // and take the best candidate once a full block has been seen
            let bland = degenerate >= DEGENERATE_STREAK;
            let total = m * n;
            let start = if bland { 0 } else { next_scan };
            let mut entering = None;
            let mut best = -tol;
            for t in 0..total {
                let c = (start + t) % total;
                if !is_basic[c] {
                    let (i, j) = (c / n, c % n);
                    let r = self.cost[i][j] - potential[i] - potential[m + j];
                    if r < best {
                        entering = Some((i, j));
                        if bland {
                            break;
                        }
                        best = r;
                    }
                }
                if entering.is_some() && (t + 1) % block == 0 {
                    next_scan = (c + 1) % total;
                    break;
                }
            }
            let Some((ei, ej)) = entering else {
                return Ok(());
            };
            if self.pivots >= max_pivots {
                return Err(Error::IterationLimit(max_pivots));
            }

            // cycle: entering cell, then the tree path from column ej back to row ei
            let mut a = m + ej;
            let mut b = ei;
            let mut from_col = Vec::new();
            let mut from_row = Vec::new();
            while depth[a] > depth[b] {
                from_col.push(parent_cell[a]);
                a = parent[a];
            }
            while depth[b] > depth[a] {
                from_row.push(parent_cell[b]);
                b = parent[b];
            }
            while a != b {
                from_col.push(parent_cell[a]);
                a = parent[a];
                from_row.push(parent_cell[b]);
                b = parent[b];
            }
            let path: Vec<usize> = from_col
                .into_iter()
                .chain(from_row.into_iter().rev())
                .collect();
            debug_assert!(path.len() % 2 == 1);

            // even positions lose flow, odd positions gain it
            let mut leave: Option<usize> = None;
            for &k in path.iter().step_by(2) {
                leave = match leave {
                    None => Some(k),
                    Some(l) => {
                        let (fk, fl) = (self.flow[k], self.flow[l]);
                        let key = |c: (usize, usize)| c.0 * n + c.1;
                        if fk < fl || (fk == fl && key(self.cells[k]) < key(self.cells[l])) {
                            Some(k)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
            let leave = leave.expect("cycle has a losing cell");
            let theta = self.flow[leave].max(0.0);
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.flow[k] -= theta;
                } else {
                    self.flow[k] += theta;
                }
            }
            let (li, lj) = self.cells[leave];
            is_basic[li * n + lj] = false;
            is_basic[ei * n + ej] = true;
            self.cells[leave] = (ei, ej);
            self.flow[leave] = theta;
            self.pivots += 1;
            if theta == 0.0 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    fn into_coupling(self) -> Coupling {
        let mut pi = vec![vec![0.0; self.n]; self.m];
        let mut cost = 0.0;
        for (&(i, j), &f) in self.cells.iter().zip(&self.flow) {
            let f = f.max(0.0);
            pi[i][j] = f;
            cost += f * self.cost[i][j];
        }
        Coupling {
            pi,
            cost,
            pivots: self.pivots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let c = solve_transport_lp(&[vec![2.5]], &[1.0], &[1.0]).unwrap();
        assert_eq!(c.pi, vec![vec![1.0]]);
        assert_eq!(c.cost, 2.5);
    }

    #[test]
    fn perfect_matching() {
        let cost = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let c = solve_transport_lp(&cost, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(c.cost, 0.0);
        assert_eq!(c.pi, vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
    }

    #[test]
    fn anti_diagonal_needs_pivots() {
        let cost = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let c = solve_transport_lp(&cost, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(c.cost, 0.0);
        assert_eq!(c.pi, vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert!(c.pivots >= 1);
    }

    #[test]
    fn unbalanced_marginals_rejected() {
        let cost = vec![vec![0.0, 1.0]];
        assert!(matches!(
            solve_transport_lp(&cost, &[1.0], &[0.5, 0.4]),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            solve_transport_lp(&cost, &[1.0], &[0.5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_marginal_entries_are_fine() {
        let cost = vec![vec![3.0, 1.0, 2.0], vec![1.0, 5.0, 0.0]];
        let c = solve_transport_lp(&cost, &[0.0, 1.0], &[0.5, 0.0, 0.5]).unwrap();
        assert!((c.cost - 0.5).abs() < 1e-15);
    }
}
