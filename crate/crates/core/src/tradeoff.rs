//! The α-interpolation decoder family and the distortion-perception curve
//! it traces.
//!
//! For an MMSE-optimal pair `(E_d, G_d)` and the conditional resampler
//! `G_p`, the decoder `α·G_d + (1−α)·G_p` attains
//! `D = (1 + (1−α)²)·D_d` and `P = α²·P_d`. [`constrained_oracle`] solves
//! the perception-constrained problem directly as a linear program so the
//! closed forms can be checked against an independent optimum.

use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{
    decoder_output_dist, distortion, exhaustive_optimal_encoder, mmse_decoder_for,
    perceptual_decoder_for, DeterministicDecoder, Encoder, StochasticDecoder,
};
use crate::dist::{cmp_points, sq_dist, DiscreteDistribution, Point};
use crate::error::{Error, Result};
use crate::format::{csv_line, sig17};
use crate::lp::{LinearProgram, Relation};
use crate::transport::{w2sq_exact, TransportPlan};

/// Linear programs above this many variables are refused.
pub const LP_VARIABLE_CAP: usize = 250_000;

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            range: "[0, 1]",
        })
    }
}

/// Sorted, bit-deduplicated copy of a point list.
pub(crate) fn canonical_points(mut points: Vec<Point>) -> Vec<Point> {
    points.iter_mut().flatten().for_each(|v| *v += 0.0);
    points.sort_by(|a, b| cmp_points(a, b));
    points.dedup_by(|a, b| cmp_points(a, b).is_eq());
    points
}

fn position(points: &[Point], p: &[f64]) -> usize {
    points
        .binary_search_by(|q| cmp_points(q, p))
        .expect("point is in the canonical list")
}

/// `α·G_d(z) + (1−α)·G_p(z)` realized as a pmf table.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedDecoder {
    pub alpha: f64,
    pub gd: DeterministicDecoder,
    pub gp: StochasticDecoder,
    pub realized: StochasticDecoder,
}

pub fn interpolate(gd: &DeterministicDecoder, gp: &StochasticDecoder, alpha: f64) -> Result<InterpolatedDecoder> {
    check_alpha(alpha)?;
    let k = gd.table().len();
    if gp.rows().len() != k {
        return Err(Error::Shape(format!(
            "G_d has {k} codes but G_p has {}",
            gp.rows().len()
        )));
    }
    if gd.table()[0].len() != gp.out_support()[0].len() {
        return Err(Error::DimensionMismatch {
            expected: gd.table()[0].len(),
            found: gp.out_support()[0].len(),
        });
    }
    let mix = |g: &[f64], x: &[f64]| -> Point {
        g.iter()
            .zip(x)
            .map(|(g, x)| alpha * g + (1.0 - alpha) * x)
            .collect()
    };
    let mut pts = Vec::new();
    for z in 0..k {
        for (x, &q) in gp.out_support().iter().zip(gp.row(z)) {
            if q > 0.0 {
                pts.push(mix(gd.output(z), x));
            }
        }
    }
    let support = canonical_points(pts);
    let mut rows = vec![vec![0.0; support.len()]; k];
    for (z, row) in rows.iter_mut().enumerate() {
        for (x, &q) in gp.out_support().iter().zip(gp.row(z)) {
            if q > 0.0 {
                let mut y = mix(gd.output(z), x);
                y.iter_mut().for_each(|v| *v += 0.0);
                row[position(&support, &y)] += q;
            }
        }
    }
    Ok(InterpolatedDecoder {
        alpha,
        gd: gd.clone(),
        gp: gp.clone(),
        realized: StochasticDecoder::new(support, rows)?,
    })
}

/// `min(√(P/P_d), 1)`.
pub fn alpha_for_perception(p: f64, p_d: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::OutOfRange {
            name: "perception",
            value: p,
            range: "[0, ∞)",
        });
    }
    if !(p_d > 0.0) {
        return Err(Error::OutOfRange {
            name: "P_d",
            value: p_d,
            range: "(0, ∞); a lossless codec has no tradeoff",
        });
    }
    Ok((p / p_d).sqrt().min(1.0))
}

/// `(1 + (1−α)²)·D_d`.
pub fn predicted_distortion(alpha: f64, d_d: f64) -> f64 {
    let r = 1.0 - alpha;
    (1.0 + r * r) * d_d
}

/// `α²·P_d`.
pub fn predicted_perception(alpha: f64, p_d: f64) -> f64 {
    alpha * alpha * p_d
}

/// `(dP/dD, d²P/dD²)` along the curve at an interior `α`.
pub fn dp_derivatives(alpha: f64, d_d: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            range: "(0, 1)",
        });
    }
    if !(d_d > 0.0) {
        return Err(Error::OutOfRange {
            name: "D_d",
            value: d_d,
            range: "(0, ∞)",
        });
    }
    let r = 1.0 - alpha;
    Ok((alpha / (alpha - 1.0), 1.0 / (2.0 * r * r * r * d_d)))
}

/// Measured and predicted distortion/perception at one `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub alpha: f64,
    pub d_measured: f64,
    pub p_measured: f64,
    pub d_predicted: f64,
    pub p_predicted: f64,
    pub d_d: f64,
    pub p_d: f64,
}

/// `D_d` and `P_d = W₂²(p_X, p_{X_d})` of an encoder with its MMSE decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Endpoint {
    pub d_d: f64,
    pub p_d: f64,
}

pub fn mmse_endpoint(source: &DiscreteDistribution, enc: &Encoder, gd: &DeterministicDecoder) -> Result<Endpoint> {
    let d_d = distortion(source, enc, gd)?;
    let out = decoder_output_dist(source, enc, gd)?;
    let p_d = w2sq_exact(source, &out)?.cost;
    Ok(Endpoint { d_d, p_d })
}

fn measure(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    gp: &StochasticDecoder,
    alpha: f64,
    endpoint: Endpoint,
) -> Result<(TradeoffPoint, TransportPlan)> {
    let dec = interpolate(gd, gp, alpha)?;
    let d_measured = distortion(source, enc, &dec.realized)?;
    let out = decoder_output_dist(source, enc, &dec.realized)?;
    let plan = w2sq_exact(source, &out)?;
    let point = TradeoffPoint {
        alpha,
        d_measured,
        p_measured: plan.cost,
        d_predicted: predicted_distortion(alpha, endpoint.d_d),
        p_predicted: predicted_perception(alpha, endpoint.p_d),
        d_d: endpoint.d_d,
        p_d: endpoint.p_d,
    };
    Ok((point, plan))
}

pub fn evaluate_point(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    gp: &StochasticDecoder,
    alpha: f64,
) -> Result<TradeoffPoint> {
    check_alpha(alpha)?;
    let endpoint = mmse_endpoint(source, enc, gd)?;
    measure(source, enc, gd, gp, alpha, endpoint).map(|(p, _)| p)
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    for &a in alphas {
        check_alpha(a)?;
    }
    if alphas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Shape("alpha grid must be sorted ascending".into()));
    }
    Ok(())
}

/// One [`TradeoffPoint`] per grid value, in grid order.
pub fn sweep(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    gp: &StochasticDecoder,
    alphas: &[f64],
) -> Result<Vec<TradeoffPoint>> {
    Ok(sweep_with_plans(source, enc, gd, gp, alphas)?
        .into_iter()
        .map(|(p, _)| p)
        .collect())
}

/// [`sweep`] together with the `W₂²` plan behind each `P_measured`.
pub fn sweep_with_plans(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    gp: &StochasticDecoder,
    alphas: &[f64],
) -> Result<Vec<(TradeoffPoint, TransportPlan)>> {
    check_grid(alphas)?;
    if alphas.is_empty() {
        return Ok(Vec::new());
    }
    let endpoint = mmse_endpoint(source, enc, gd)?;
    alphas
        .par_iter()
        .map(|&a| measure(source, enc, gd, gp, a, endpoint))
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "alpha,D_measured,P_measured,D_predicted,P_predicted,D_d,P_d";

pub fn sweep_csv(points: &[TradeoffPoint]) -> String {
    let mut out = csv_line([SWEEP_CSV_HEADER]);
    for p in points {
        out.push_str(&csv_line(
            [
                p.alpha,
                p.d_measured,
                p.p_measured,
                p.d_predicted,
                p.p_predicted,
                p.d_d,
                p.p_d,
            ]
            .map(sig17),
        ));
    }
    out
}

/// Optimum of the perception-constrained distortion problem over a finite
/// output alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub d_star: f64,
    pub decoder: StochasticDecoder,
    /// Transport cost of the coupling found alongside the decoder; an upper
    /// bound on `W₂²(p_X, p_X̂)`.
    pub perception_bound: f64,
}

/// Minimizes `E‖X − X̂‖²` over decoders `q(x̂ | z)` on `out_support` subject
/// to `W₂²(p_X, p_X̂) ≤ P`.
///
/// The constraint is linearized with an explicit coupling `π(x, x̂)` whose
/// marginals are `p_X` and the decoder's output law, so the whole problem
/// is one linear program in `(q, π)`.
pub fn constrained_oracle(
    source: &DiscreteDistribution,
    enc: &Encoder,
    perception: f64,
    out_support: &[Point],
) -> Result<OracleSolution> {
    if !(perception >= 0.0) {
        return Err(Error::OutOfRange {
            name: "perception",
            value: perception,
            range: "[0, ∞)",
        });
    }
    enc.check_for(source)?;
    if out_support.is_empty() {
        return Err(Error::Empty("oracle output support"));
    }
    if out_support.iter().any(|y| y.len() != source.dim()) {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: out_support.iter().find(|y| y.len() != source.dim()).unwrap().len(),
        });
    }
    let ys = canonical_points(out_support.to_vec());
    let (n, m, k) = (source.len(), ys.len(), enc.codes());
    let q_var = |z: usize, j: usize| z * m + j;
    let pi_var = |i: usize, j: usize| k * m + i * m + j;
    let vars = k * m + n * m;
    if vars > LP_VARIABLE_CAP {
        return Err(Error::SizeCap {
            size: vars,
            cap: LP_VARIABLE_CAP,
        });
    }

    let mut code_mass = vec![0.0; k];
    let mut cell_cost = vec![vec![0.0; m]; k];
    for (i, (x, p)) in source.iter().enumerate() {
        let z = enc.code_of(i);
        code_mass[z] += p;
        for (j, y) in ys.iter().enumerate() {
            cell_cost[z][j] += p * sq_dist(x, y);
        }
    }

    let mut lp = LinearProgram::new(vars);
    for (z, costs) in cell_cost.iter().enumerate() {
        for (j, &c) in costs.iter().enumerate() {
            lp.set_cost(q_var(z, j), c);
        }
        lp.add_constraint((0..m).map(|j| (q_var(z, j), 1.0)).collect(), Relation::Eq, 1.0);
    }
    for i in 0..n {
        lp.add_constraint(
            (0..m).map(|j| (pi_var(i, j), 1.0)).collect(),
            Relation::Eq,
            source.prob(i),
        );
    }
    for j in 0..m {
        let mut terms: Vec<(usize, f64)> = (0..n).map(|i| (pi_var(i, j), 1.0)).collect();
        terms.extend(
            (0..k)
                .filter(|&z| code_mass[z] > 0.0)
                .map(|z| (q_var(z, j), -code_mass[z])),
        );
        lp.add_constraint(terms, Relation::Eq, 0.0);
    }
    let mut budget = Vec::new();
    for (i, x) in source.points().iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let c = sq_dist(x, y);
            if c > 0.0 {
                budget.push((pi_var(i, j), c));
            }
        }
    }
    lp.add_constraint(budget, Relation::Le, perception);

    let sol = lp.solve().map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!(
            "{msg}; the output support cannot meet the perception budget \
             (for P = 0 it must contain supp(X))"
        )),
        other => other,
    })?;

    let rows: Vec<Vec<f64>> = (0..k)
        .map(|z| {
            let row: Vec<f64> = (0..m).map(|j| sol.x[q_var(z, j)].max(0.0)).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let mut perception_bound = 0.0;
    for (i, x) in source.points().iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            perception_bound += sol.x[pi_var(i, j)] * sq_dist(x, y);
        }
    }
    Ok(OracleSolution {
        d_star: sol.objective,
        decoder: StochasticDecoder::new(ys, rows)?,
        perception_bound,
    })
}

/// `supp(X) ∪ G_d table ∪` the α-interpolation outputs for every `α` given.
pub fn oracle_support(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    alphas: &[f64],
) -> Result<Vec<Point>> {
    let gp = perceptual_decoder_for(source, enc)?;
    let mut pts: Vec<Point> = source.points().to_vec();
    pts.extend(gd.table().iter().cloned());
    for &a in alphas {
        let dec = interpolate(gd, &gp, a)?;
        pts.extend(dec.realized.out_support().iter().cloned());
    }
    Ok(canonical_points(pts))
}

/// Interpolation weights that reach each perception level from `P_d`.
fn alphas_for_grid(perceptions: &[f64], p_d: f64) -> Result<Vec<f64>> {
    if p_d > 0.0 {
        perceptions
            .iter()
            .map(|&p| alpha_for_perception(p, p_d))
            .collect()
    } else {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniversalityRow {
    pub perception: f64,
    /// Oracle optimum with the MMSE-optimal encoder.
    pub d_mmse_encoder: f64,
    /// Smallest oracle optimum over every encoder.
    pub d_best: f64,
    pub best_assignment: Vec<usize>,
    pub abs_gap: f64,
    /// `abs_gap / d_best`, or `abs_gap` itself when `d_best` vanishes.
    pub rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniversalityReport {
    pub mmse_assignment: Vec<usize>,
    pub d_d: f64,
    pub p_d: f64,
    pub encoders_checked: usize,
    pub rows: Vec<UniversalityRow>,
}

impl UniversalityReport {
    pub fn max_rel_gap(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.rel_gap))
    }
}

/// Partitions of `0..n` into exactly `k` non-empty cells, labelled in order
/// of first appearance.
pub(crate) fn canonical_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, used: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let n = cur.len();
        if pos == n {
            if used == k {
                out.push(cur.clone());
            }
            return;
        }
        // not enough points left to open the remaining cells
        if k - used > n - pos {
            return;
        }
        for z in 0..=used.min(k - 1) {
            cur[pos] = z;
            rec(pos + 1, used.max(z + 1), k, cur, out);
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    rec(0, 0, k, &mut cur, &mut out);
    out
}

/// Compares the oracle optimum under the MMSE-optimal encoder with the best
/// optimum over all encoders, at every perception level in the grid.
///
/// Each encoder's oracle runs on `supp(X) ∪` its own MMSE table `∪` its own
/// interpolation outputs at the α reaching each grid level.
pub fn universal_encoder_check(
    source: &DiscreteDistribution,
    k: usize,
    perceptions: &[f64],
    cap: u64,
) -> Result<UniversalityReport> {
    for &p in perceptions {
        if !(p >= 0.0) {
            return Err(Error::OutOfRange {
                name: "perception",
                value: p,
                range: "[0, ∞)",
            });
        }
    }
    let optimal = exhaustive_optimal_encoder(source, k, cap)?;
    let endpoint = mmse_endpoint(source, &optimal.encoder, &optimal.decoder)?;

    let solve_all = |enc: &Encoder| -> Result<Vec<f64>> {
        let gd = mmse_decoder_for(source, enc)?;
        let ep = mmse_endpoint(source, enc, &gd)?;
        let support = oracle_support(source, enc, &gd, &alphas_for_grid(perceptions, ep.p_d)?)?;
        perceptions
            .iter()
            .map(|&p| constrained_oracle(source, enc, p, &support).map(|s| s.d_star))
            .collect()
    };

    let mmse_values = solve_all(&optimal.encoder)?;
    let partitions = canonical_partitions(source.len(), k);
    let others: Vec<Vec<f64>> = partitions
        .par_iter()
        .map(|a| solve_all(&Encoder::new(a.clone(), k)?))
        .collect::<Result<_>>()?;

    let rows = perceptions
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            let mut d_best = mmse_values[t];
            let mut best_assignment = optimal.encoder.assignment().to_vec();
            for (a, vals) in partitions.iter().zip(&others) {
                if vals[t] < d_best {
                    d_best = vals[t];
                    best_assignment = a.clone();
                }
            }
            let abs_gap = (mmse_values[t] - d_best).max(0.0);
            let rel_gap = if d_best > 1e-12 { abs_gap / d_best } else { abs_gap };
            UniversalityRow {
                perception: p,
                d_mmse_encoder: mmse_values[t],
                d_best,
                best_assignment,
                abs_gap,
                rel_gap,
            }
        })
        .collect();
    Ok(UniversalityReport {
        mmse_assignment: optimal.encoder.assignment().to_vec(),
        d_d: endpoint.d_d,
        p_d: endpoint.p_d,
        encoders_checked: partitions.len(),
        rows,
    })
}
