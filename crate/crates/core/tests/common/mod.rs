//! Test-side oracles, written without reference to the library's solvers.

#![allow(dead_code)]

use dplab_core::DiscreteDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random law on up to `max_n` scalar points drawn from a coarse grid, so
/// that coincident atoms and ties show up.
pub fn random_scalar(rng: &mut ChaCha8Rng, max_n: usize) -> DiscreteDistribution {
    let n = rng.random_range(1..=max_n);
    let points = (0..n)
        .map(|_| vec![f64::from(rng.random_range(-40i32..=40)) / 8.0])
        .collect();
    let probs = (0..n).map(|_| rng.random_range(0.05..1.0)).collect::<Vec<f64>>();
    let total: f64 = probs.iter().sum();
    DiscreteDistribution::new(points, probs.into_iter().map(|p| p / total).collect()).unwrap()
}

pub fn random_planar(rng: &mut ChaCha8Rng, n: usize) -> DiscreteDistribution {
    let points = (0..n)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let probs = (0..n).map(|_| rng.random_range(0.1..1.0)).collect::<Vec<f64>>();
    let total: f64 = probs.iter().sum();
    DiscreteDistribution::new(points, probs.into_iter().map(|p| p / total).collect()).unwrap()
}

/// Monotone (northwest-corner) coupling of two sorted scalar laws, which
/// is optimal for any convex ground cost on the line.
pub fn monotone_cost(a: &DiscreteDistribution, b: &DiscreteDistribution, exponent: i32) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.prob(0), b.prob(0));
    let mut cost = 0.0;
    loop {
        let m = ra.min(rb);
        cost += m * (a.point(i)[0] - b.point(j)[0]).abs().powi(exponent);
        ra -= m;
        rb -= m;
        let a_done = ra <= 1e-15;
        let b_done = rb <= 1e-15;
        if a_done {
            i += 1;
        }
        if b_done {
            j += 1;
        }
        if i == a.len() || j == b.len() {
            return cost;
        }
        if a_done {
            ra = a.prob(i);
        }
        if b_done {
            rb = b.prob(j);
        }
    }
}

/// MSE of a partition with cell centroids, computed directly.
pub fn partition_mse(source: &DiscreteDistribution, assignment: &[usize], k: usize) -> f64 {
    let d = source.dim();
    let mut mass = vec![0.0; k];
    let mut sum = vec![vec![0.0; d]; k];
    for (i, (x, p)) in source.iter().enumerate() {
        mass[assignment[i]] += p;
        for c in 0..d {
            sum[assignment[i]][c] += p * x[c];
        }
    }
    let mut mse = 0.0;
    for (i, (x, p)) in source.iter().enumerate() {
        let z = assignment[i];
        mse += p * (0..d).map(|c| (x[c] - sum[z][c] / mass[z]).powi(2)).sum::<f64>();
    }
    mse
}

/// Smallest partition MSE over every assignment of `n` points to `k`
/// non-empty cells.
pub fn brute_force_mse(source: &DiscreteDistribution, k: usize) -> f64 {
    let n = source.len();
    let mut best = f64::INFINITY;
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let assignment: Vec<usize> = (0..n)
            .map(|_| {
                let z = c % k;
                c /= k;
                z
            })
            .collect();
        if (0..k).all(|z| assignment.contains(&z)) {
            best = best.min(partition_mse(source, &assignment, k));
        }
    }
    best
}
