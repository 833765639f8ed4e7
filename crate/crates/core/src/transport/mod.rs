//! Exact Wasserstein distances between discrete distributions.
//!
//! `W₁` uses the Euclidean ground cost and `W₂²` the squared Euclidean
//! cost; the reported `W₂²` value is the optimal cost itself, no square
//! root is taken. [`w_1d_closed_form`] evaluates both on the line without
//! any linear programming and serves as an oracle for the solver.

mod network_simplex;

use serde::Serialize;

pub use network_simplex::{solve_transport_lp, Coupling, BALANCE_TOL};

use crate::dist::{dist, sq_dist, DiscreteDistribution};
use crate::error::{Error, Result};

pub const DEFAULT_SIZE_CAP: usize = 512;

/// Ground-cost exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Order {
    /// Euclidean distance.
    One,
    /// Squared Euclidean distance.
    Two,
}

impl Order {
    pub fn from_exponent(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Order::One),
            2 => Ok(Order::Two),
            other => Err(Error::OutOfRange {
                name: "transport order",
                value: other as f64,
                range: "{1, 2}",
            }),
        }
    }

    pub fn ground_cost(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Order::One => dist(a, b),
            Order::Two => sq_dist(a, b),
        }
    }
}

/// An optimal coupling between two distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub row: DiscreteDistribution,
    pub col: DiscreteDistribution,
    pub pi: Vec<Vec<f64>>,
    pub cost: f64,
    pub order: Order,
}

impl TransportPlan {
    /// Recomputes `Σ π_ij · ‖row_i − col_j‖^order`.
    pub fn recomputed_cost(&self) -> f64 {
        let mut acc = 0.0;
        for (i, row) in self.pi.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p != 0.0 {
                    acc += p * self.order.ground_cost(self.row.point(i), self.col.point(j));
                }
            }
        }
        acc
    }

    /// Largest deviation of the plan's marginals from `row`/`col`.
    pub fn marginal_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for (i, r) in self.pi.iter().enumerate() {
            err = err.max((r.iter().sum::<f64>() - self.row.prob(i)).abs());
        }
        for j in 0..self.col.len() {
            let s: f64 = self.pi.iter().map(|r| r[j]).sum();
            err = err.max((s - self.col.prob(j)).abs());
        }
        err
    }
}

/// Transport solver with a configurable support-size cap.
#[derive(Debug, Clone, Copy)]
pub struct Transport {
    pub size_cap: usize,
}

impl Default for Transport {
    fn default() -> Self {
        Self {
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

impl Transport {
    pub fn plan(
        &self,
        a: &DiscreteDistribution,
        b: &DiscreteDistribution,
        order: Order,
    ) -> Result<TransportPlan> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        for size in [a.len(), b.len()] {
            if size > self.size_cap {
                return Err(Error::SizeCap {
                    size,
                    cap: self.size_cap,
                });
            }
        }
        let cost: Vec<Vec<f64>> = a
            .points()
            .iter()
            .map(|x| b.points().iter().map(|y| order.ground_cost(x, y)).collect())
            .collect();
        let coupling = solve_transport_lp(&cost, a.probs(), b.probs())?;
        Ok(TransportPlan {
            row: a.clone(),
            col: b.clone(),
            pi: coupling.pi,
            cost: coupling.cost,
            order,
        })
    }

    pub fn w1(&self, a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<TransportPlan> {
        self.plan(a, b, Order::One)
    }

    pub fn w2sq(&self, a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<TransportPlan> {
        self.plan(a, b, Order::Two)
    }
}

/// Exact `W₁` with the default size cap.
pub fn w1_exact(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<TransportPlan> {
    Transport::default().w1(a, b)
}

/// Exact `W₂²` with the default size cap.
pub fn w2sq_exact(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<TransportPlan> {
    Transport::default().w2sq(a, b)
}

/// Closed-form transport cost on the real line.
///
/// Order one integrates `|F_a − F_b|` between consecutive support points;
/// order two integrates `(F_a⁻¹ − F_b⁻¹)²` between consecutive cumulative
/// levels. Both are piecewise constant, so the sums are exact.
pub fn w_1d_closed_form(a: &DiscreteDistribution, b: &DiscreteDistribution, order: Order) -> Result<f64> {
    for d in [a, b] {
        if d.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: d.dim(),
            });
        }
    }
    Ok(match order {
        Order::One => cdf_area(a, b),
        Order::Two => quantile_sq_integral(a, b),
    })
}

fn cdf_area(a: &DiscreteDistribution, b: &DiscreteDistribution) -> f64 {
    let mut events: Vec<(f64, f64, f64)> = a
        .iter()
        .map(|(x, p)| (x[0], p, 0.0))
        .chain(b.iter().map(|(x, p)| (x[0], 0.0, p)))
        .collect();
    events.sort_by(|l, r| l.0.total_cmp(&r.0));
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut area = 0.0;
    for w in 0..events.len() {
        fa += events[w].1;
        fb += events[w].2;
        if let Some(next) = events.get(w + 1) {
            area += (fa - fb).abs() * (next.0 - events[w].0);
        }
    }
    area
}

fn quantile_sq_integral(a: &DiscreteDistribution, b: &DiscreteDistribution) -> f64 {
    let cum = |d: &DiscreteDistribution| -> Vec<f64> {
        d.probs()
            .iter()
            .scan(0.0, |s, p| {
                *s += p;
                Some(*s)
            })
            .collect()
    };
    let (ca, cb) = (cum(a), cum(b));
    let (mut i, mut j) = (0, 0);
    let mut level = 0.0;
    let mut acc = 0.0;
    while i < ca.len() && j < cb.len() {
        let next = ca[i].min(cb[j]);
        let d = a.point(i)[0] - b.point(j)[0];
        acc += (next - level).max(0.0) * d * d;
        level = next;
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(values: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::uniform_scalar(values).unwrap()
    }

    #[test]
    fn self_distance_is_zero() {
        let a = u(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(w1_exact(&a, &a).unwrap().cost, 0.0);
        assert_eq!(w2sq_exact(&a, &a).unwrap().cost, 0.0);
        assert_eq!(w_1d_closed_form(&a, &a, Order::One).unwrap(), 0.0);
        assert_eq!(w_1d_closed_form(&a, &a, Order::Two).unwrap(), 0.0);
    }

    #[test]
    fn point_masses() {
        let a = DiscreteDistribution::point_mass(vec![0.0]).unwrap();
        let b = DiscreteDistribution::point_mass(vec![3.0]).unwrap();
        assert_eq!(w1_exact(&a, &b).unwrap().cost, 3.0);
    }

    #[test]
    fn uniform_four_vs_two() {
        let a = u(&[0.0, 1.0, 2.0, 3.0]);
        let b = u(&[0.5, 2.5]);
        assert!((w1_exact(&a, &b).unwrap().cost - 0.5).abs() < 1e-15);
        assert!((w2sq_exact(&a, &b).unwrap().cost - 0.25).abs() < 1e-15);
        assert!((w_1d_closed_form(&a, &b, Order::One).unwrap() - 0.5).abs() < 1e-15);
        assert!((w_1d_closed_form(&a, &b, Order::Two).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn quarter_shifts() {
        let a = u(&[0.0, 1.0, 2.0, 3.0]);
        let b = u(&[0.25, 0.75, 2.25, 2.75]);
        assert!((w2sq_exact(&a, &b).unwrap().cost - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn disjoint_pairs_order_two() {
        let a = u(&[0.0, 1.0]);
        let b = u(&[2.0, 3.0]);
        assert_eq!(w_1d_closed_form(&a, &b, Order::Two).unwrap(), 4.0);
        assert_eq!(w2sq_exact(&a, &b).unwrap().cost, 4.0);
    }

    #[test]
    fn closed_form_needs_one_dimension() {
        let a = DiscreteDistribution::point_mass(vec![0.0, 1.0]).unwrap();
        assert!(w_1d_closed_form(&a, &a, Order::One).is_err());
    }

    #[test]
    fn dimension_and_cap_errors() {
        let a = DiscreteDistribution::point_mass(vec![0.0, 1.0]).unwrap();
        let b = DiscreteDistribution::point_mass(vec![0.0]).unwrap();
        assert!(matches!(w1_exact(&a, &b), Err(Error::DimensionMismatch { .. })));
        let big = u(&(0..10).map(f64::from).collect::<Vec<_>>());
        let small = Transport { size_cap: 4 };
        assert!(matches!(small.w1(&big, &b), Err(Error::SizeCap { size: 10, cap: 4 })));
    }

    #[test]
    fn plan_invariants_in_two_dimensions() {
        let a = DiscreteDistribution::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let b = DiscreteDistribution::new(vec![vec![1.0, 1.0], vec![-1.0, 0.5]], vec![0.6, 0.4])
            .unwrap();
        for plan in [w1_exact(&a, &b).unwrap(), w2sq_exact(&a, &b).unwrap()] {
            assert!(plan.marginal_error() <= 1e-12);
            assert!((plan.cost - plan.recomputed_cost()).abs() <= 1e-12);
            assert!(plan.pi.iter().flatten().all(|&p| p >= 0.0));
        }
    }
}
