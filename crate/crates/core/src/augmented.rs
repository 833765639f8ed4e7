//! The augmented perfect-perception objective
//! `W₁(p_{X̂,X_d}, p_{X,X_d}) + λ·E‖X̂ − X_d‖`, solved exactly.
//!
//! Decoder rows are indexed by code; with a bijective `G_d` that is the
//! same as indexing by the value of `X_d`. Below `λ = 1` the optimum
//! reproduces the joint law of `(X, X_d)` and above it the decoder
//! collapses onto `X_d`.

use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{distortion, first_collision, DeterministicDecoder, Encoder, StochasticDecoder};
use crate::dist::{dist, DiscreteDistribution, Point};
use crate::error::{Error, Result};
use crate::format::{csv_line, sig17};
use crate::lp::{LinearProgram, Relation};
use crate::tradeoff::{canonical_points, LP_VARIABLE_CAP};
use crate::transport::w1_exact;

/// Distance from `λ = 1` within which a solve is tagged indeterminate.
pub const LAMBDA_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseFlag {
    Ok,
    /// `λ = 1`, where neither structural result applies.
    Indeterminate,
}

impl PhaseFlag {
    pub fn for_lambda(lambda: f64) -> Self {
        if (lambda - 1.0).abs() <= LAMBDA_BOUNDARY_TOL {
            PhaseFlag::Indeterminate
        } else {
            PhaseFlag::Ok
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseFlag::Ok => "ok",
            PhaseFlag::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentedSolution {
    pub lambda: f64,
    #[serde(skip)]
    pub decoder: StochasticDecoder,
    pub w1_gap: f64,
    pub mean_dev: f64,
    pub mse: f64,
    /// `w1_gap + lambda·mean_dev`, both recomputed from the decoder.
    pub objective: f64,
    /// Optimal value reported by the linear program.
    pub lp_objective: f64,
    pub flag: PhaseFlag,
}

/// The two terms of the objective for a given decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AugmentedTerms {
    pub w1_gap: f64,
    pub mean_dev: f64,
}

fn concat(a: &[f64], b: &[f64]) -> Point {
    a.iter().chain(b).copied().collect()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
            range: "[0, ∞)",
        })
    }
}

fn check_shapes(source: &DiscreteDistribution, enc: &Encoder, gd: &DeterministicDecoder) -> Result<()> {
    enc.check_for(source)?;
    if gd.table().len() != enc.codes() {
        return Err(Error::Shape(format!(
            "encoder has {} codes but G_d has {}",
            enc.codes(),
            gd.table().len()
        )));
    }
    if gd.table()[0].len() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: gd.table()[0].len(),
        });
    }
    Ok(())
}

fn code_probs(source: &DiscreteDistribution, enc: &Encoder) -> Vec<f64> {
    let mut pz = vec![0.0; enc.codes()];
    for i in 0..source.len() {
        pz[enc.code_of(i)] += source.prob(i);
    }
    pz
}

/// Joint law of `(X, X_d)` on concatenated vectors.
pub fn reference_joint(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
) -> Result<DiscreteDistribution> {
    check_shapes(source, enc, gd)?;
    let (points, probs) = source
        .iter()
        .enumerate()
        .map(|(i, (x, p))| (concat(x, gd.output(enc.code_of(i))), p))
        .unzip();
    DiscreteDistribution::new(points, probs)
}

/// Joint law of `(X̂, X_d)` on concatenated vectors.
pub fn decoded_joint(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    decoder: &StochasticDecoder,
) -> Result<DiscreteDistribution> {
    check_shapes(source, enc, gd)?;
    if decoder.rows().len() != enc.codes() {
        return Err(Error::Shape(format!(
            "decoder has {} rows for {} codes",
            decoder.rows().len(),
            enc.codes()
        )));
    }
    if decoder.out_support()[0].len() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: decoder.out_support()[0].len(),
        });
    }
    let pz = code_probs(source, enc);
    let mut points = Vec::new();
    let mut probs = Vec::new();
    for (z, &p) in pz.iter().enumerate() {
        for (y, &q) in decoder.out_support().iter().zip(decoder.row(z)) {
            if p * q > 0.0 {
                points.push(concat(y, gd.output(z)));
                probs.push(p * q);
            }
        }
    }
    DiscreteDistribution::new(points, probs)
}

pub fn augmented_terms(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    decoder: &StochasticDecoder,
) -> Result<AugmentedTerms> {
    let ours = decoded_joint(source, enc, gd, decoder)?;
    let reference = reference_joint(source, enc, gd)?;
    let w1_gap = w1_exact(&ours, &reference)?.cost;
    let pz = code_probs(source, enc);
    let mut mean_dev = 0.0;
    for (z, &p) in pz.iter().enumerate() {
        for (y, &q) in decoder.out_support().iter().zip(decoder.row(z)) {
            mean_dev += p * q * dist(y, gd.output(z));
        }
    }
    Ok(AugmentedTerms { w1_gap, mean_dev })
}

/// `W₁(p_{X̂,X_d}, p_{X,X_d}) + λ·E‖X̂ − X_d‖`.
pub fn augmented_objective(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    decoder: &StochasticDecoder,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    let t = augmented_terms(source, enc, gd, decoder)?;
    Ok(t.w1_gap + lambda * t.mean_dev)
}

/// `supp(X) ∪ G_d table`, the smallest support the solver accepts.
pub fn augmented_support(source: &DiscreteDistribution, gd: &DeterministicDecoder) -> Vec<Point> {
    let mut pts = source.points().to_vec();
    pts.extend(gd.table().iter().cloned());
    canonical_points(pts)
}

fn check_bijective(gd: &DeterministicDecoder) -> Result<()> {
    match first_collision(gd) {
        Some((a, b)) => Err(Error::NotBijective(a, b)),
        None => Ok(()),
    }
}

/// Exact minimizer of the augmented objective over decoders on
/// `out_support`.
///
/// Variables are the joint masses `r(z, x̂) = p(z)·q(x̂ | z)` and a coupling
/// between `(x̂, X_d)` and `(X, X_d)`; both objective terms are linear in
/// them.
pub fn solve_augmented(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    lambda: f64,
    out_support: &[Point],
) -> Result<AugmentedSolution> {
    check_lambda(lambda)?;
    check_shapes(source, enc, gd)?;
    check_bijective(gd)?;
    if let Some(z) = enc.first_empty_cell() {
        return Err(Error::EmptyCell(z));
    }
    if out_support.is_empty() {
        return Err(Error::Empty("augmented output support"));
    }
    if let Some(y) = out_support.iter().find(|y| y.len() != source.dim()) {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: y.len(),
        });
    }
    let ys = canonical_points(out_support.to_vec());
    let (n, m, k) = (source.len(), ys.len(), enc.codes());
    let vars = k * m * (n + 1);
    if vars > LP_VARIABLE_CAP {
        return Err(Error::SizeCap {
            size: vars,
            cap: LP_VARIABLE_CAP,
        });
    }
    let r_var = |z: usize, j: usize| z * m + j;
    let pi_var = |z: usize, j: usize, i: usize| k * m + (z * m + j) * n + i;
    let pz = code_probs(source, enc);

    let mut lp = LinearProgram::new(vars);
    for (z, &mass) in pz.iter().enumerate() {
        let xd = gd.output(z);
        for (j, y) in ys.iter().enumerate() {
            lp.set_cost(r_var(z, j), lambda * dist(y, xd));
            let yhat = concat(y, xd);
            for (i, x) in source.points().iter().enumerate() {
                let yref = concat(x, gd.output(enc.code_of(i)));
                lp.set_cost(pi_var(z, j, i), dist(&yhat, &yref));
            }
            let mut terms: Vec<(usize, f64)> = (0..n).map(|i| (pi_var(z, j, i), 1.0)).collect();
            terms.push((r_var(z, j), -1.0));
            lp.add_constraint(terms, Relation::Eq, 0.0);
        }
        lp.add_constraint((0..m).map(|j| (r_var(z, j), 1.0)).collect(), Relation::Eq, mass);
    }
    for i in 0..n {
        let terms = (0..k)
            .flat_map(|z| (0..m).map(move |j| (z, j)))
            .map(|(z, j)| (pi_var(z, j, i), 1.0))
            .collect();
        lp.add_constraint(terms, Relation::Eq, source.prob(i));
    }
    let sol = lp.solve()?;

    let rows: Vec<Vec<f64>> = (0..k)
        .map(|z| {
            let row: Vec<f64> = (0..m).map(|j| sol.x[r_var(z, j)].max(0.0)).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let decoder = StochasticDecoder::new(ys, rows)?;
    let terms = augmented_terms(source, enc, gd, &decoder)?;
    Ok(AugmentedSolution {
        lambda,
        mse: distortion(source, enc, &decoder)?,
        w1_gap: terms.w1_gap,
        mean_dev: terms.mean_dev,
        objective: terms.w1_gap + lambda * terms.mean_dev,
        lp_objective: sol.objective,
        flag: PhaseFlag::for_lambda(lambda),
        decoder,
    })
}

/// One [`AugmentedSolution`] per `λ`, in grid order.
pub fn phase_sweep(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    lambdas: &[f64],
    out_support: &[Point],
) -> Result<Vec<AugmentedSolution>> {
    for &l in lambdas {
        check_lambda(l)?;
    }
    if lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Shape("lambda grid must be sorted ascending".into()));
    }
    lambdas
        .par_iter()
        .map(|&l| solve_augmented(source, enc, gd, l, out_support))
        .collect()
}

pub const PHASE_CSV_HEADER: &str = "lambda,w1_gap,mean_dev,mse,objective,flag";

pub fn phase_csv(rows: &[AugmentedSolution]) -> String {
    let mut out = csv_line([PHASE_CSV_HEADER]);
    for s in rows {
        let mut fields: Vec<String> = [s.lambda, s.w1_gap, s.mean_dev, s.mse, s.objective]
            .map(sig17)
            .to_vec();
        fields.push(s.flag.as_str().to_owned());
        out.push_str(&csv_line(fields));
    }
    out
}

/// `(1 − β)/β`.
pub fn beta_to_lambda(beta: f64) -> Result<f64> {
    if beta > 0.0 && beta <= 1.0 {
        Ok((1.0 - beta) / beta)
    } else {
        Err(Error::OutOfRange {
            name: "beta",
            value: beta,
            range: "(0, 1]",
        })
    }
}

/// Distances of the decoded law from the source law, conditioned on `X_d`
/// and on `Z_d`.
///
/// The first is `W₁` between the joint laws of `(X̂, X_d)` and `(X, X_d)`.
/// The second is `Σ_z p(z)·W₁(q(· | z), p_{X | Z=z})`, which never moves
/// mass between codes.
pub fn conditioning_equivalence(
    source: &DiscreteDistribution,
    enc: &Encoder,
    gd: &DeterministicDecoder,
    decoder: &StochasticDecoder,
) -> Result<(f64, f64)> {
    check_shapes(source, enc, gd)?;
    check_bijective(gd)?;
    let gap_xd = augmented_terms(source, enc, gd, decoder)?.w1_gap;
    let pz = code_probs(source, enc);
    let mut gap_zd = 0.0;
    for (z, &p) in pz.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (pts, probs): (Vec<Point>, Vec<f64>) = source
            .iter()
            .enumerate()
            .filter(|&(i, _)| enc.code_of(i) == z)
            .map(|(_, (x, q))| (x.to_vec(), q / p))
            .unzip();
        let cell = DiscreteDistribution::new(pts, probs)?;
        gap_zd += p * w1_exact(&decoder.row_distribution(z)?, &cell)?.cost;
    }
    Ok((gap_xd, gap_zd))
}
