//! Finite discrete distributions over real vectors, the joint law of a
//! source and its code, and exact expectations.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::codec::Encoder;
use crate::error::{Error, Result};

/// A point in signal space.
pub type Point = Vec<f64>;

/// Drift from unit mass accepted (and removed) at construction.
pub const INPUT_MASS_TOL: f64 = 1e-9;
/// Drift from unit mass tolerated without renormalizing.
pub const MASS_TOL: f64 = 1e-12;

/// Lexicographic total order on points.
pub fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// A probability distribution on finitely many distinct points.
///
/// The support is kept sorted lexicographically with zero-mass points
/// dropped, so two equal distributions compare bit-equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    points: Vec<Point>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates and canonicalizes a distribution. Duplicate points are
    /// merged and mass drift up to [`INPUT_MASS_TOL`] is renormalized away.
    pub fn new(points: Vec<Point>, probs: Vec<f64>) -> Result<Self> {
        if points.len() != probs.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                probs: probs.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::Empty("distribution support"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Empty("point coordinates"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("support point"));
            }
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite("probability"));
            }
            if value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > INPUT_MASS_TOL {
            return Err(Error::BadMass { sum });
        }

        let mut pairs: Vec<(Point, f64)> = points
            .into_iter()
            .map(|p| p.into_iter().map(|v| v + 0.0).collect())
            .zip(probs)
            .collect();
        pairs.sort_by(|a, b| cmp_points(&a.0, &b.0));

        let mut points: Vec<Point> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (p, w) in pairs {
            match points.last() {
                Some(last) if cmp_points(last, &p) == Ordering::Equal => {
                    *probs.last_mut().unwrap() += w;
                }
                _ => {
                    points.push(p);
                    probs.push(w);
                }
            }
        }
        let mut i = 0;
        while i < probs.len() {
            if probs[i] == 0.0 {
                probs.remove(i);
                points.remove(i);
            } else {
                i += 1;
            }
        }
        if points.is_empty() {
            return Err(Error::Empty("distribution support (all mass zero)"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            probs.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self { points, probs })
    }

    pub fn point_mass(point: Point) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    /// Uniform distribution on scalar values.
    pub fn uniform_scalar(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        Self::new(
            values.iter().map(|&v| vec![v]).collect(),
            vec![w; values.len()],
        )
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points
            .iter()
            .map(Vec::as_slice)
            .zip(self.probs.iter().copied())
    }

    /// Index of a support point, by exact comparison.
    pub fn index_of(&self, point: &[f64]) -> Option<usize> {
        self.points
            .binary_search_by(|p| cmp_points(p, point))
            .ok()
    }

    /// Exact expectation of `f` under this distribution.
    pub fn expect<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, p)| p * f(x)).sum()
    }

    pub fn mean(&self) -> Point {
        let mut m = vec![0.0; self.dim()];
        for (x, p) in self.iter() {
            for (acc, v) in m.iter_mut().zip(x) {
                *acc += p * v;
            }
        }
        m
    }

    /// Expected squared distance to the mean.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| sq_dist(x, &m))
    }

    /// Builds a mixture `Σ w_i · dist_i` from weighted components.
    pub fn mixture<'a, I>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a DiscreteDistribution)>,
    {
        let mut points = Vec::new();
        let mut probs = Vec::new();
        for (w, d) in components {
            for (x, p) in d.iter() {
                points.push(x.to_vec());
                probs.push(w * p);
            }
        }
        Self::new(points, probs)
    }
}

/// Canonical constructor; see [`DiscreteDistribution::new`].
pub fn make_distribution(points: Vec<Point>, probs: Vec<f64>) -> Result<DiscreteDistribution> {
    DiscreteDistribution::new(points, probs)
}

/// Exact expectation of `f` under `dist`.
pub fn expectation<F: FnMut(&[f64]) -> f64>(dist: &DiscreteDistribution, f: F) -> f64 {
    dist.expect(f)
}

/// Joint law `p(x, z)` of a source and the code of a deterministic encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct JointXZ {
    source: DiscreteDistribution,
    k: usize,
    /// `mass[z][x]`
    mass: Vec<Vec<f64>>,
}

impl JointXZ {
    pub fn source(&self) -> &DiscreteDistribution {
        &self.source
    }

    pub fn x_support(&self) -> &[Point] {
        self.source.points()
    }

    pub fn codes(&self) -> usize {
        self.k
    }

    pub fn mass(&self, z: usize, x: usize) -> f64 {
        self.mass[z][x]
    }

    pub fn mass_matrix(&self) -> &[Vec<f64>] {
        &self.mass
    }

    /// Marginal `p(z)`.
    pub fn code_prob(&self, z: usize) -> f64 {
        self.mass[z].iter().sum()
    }

    pub fn code_probs(&self) -> Vec<f64> {
        (0..self.k).map(|z| self.code_prob(z)).collect()
    }

    /// Marginal of X, summed over codes.
    pub fn x_marginal(&self) -> Vec<f64> {
        let n = self.source.len();
        (0..n)
            .map(|x| (0..self.k).map(|z| self.mass[z][x]).sum())
            .collect()
    }

    /// Exact expectation of `f(x, z)` under the joint law.
    pub fn expect<F: FnMut(&[f64], usize) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (z, row) in self.mass.iter().enumerate() {
            for (x, &m) in row.iter().enumerate() {
                if m > 0.0 {
                    acc += m * f(self.source.point(x), z);
                }
            }
        }
        acc
    }

    /// `p_{X|Z=z}`.
    pub fn conditional(&self, z: usize) -> Result<DiscreteDistribution> {
        if z >= self.k {
            return Err(Error::CodeOutOfRange { code: z, k: self.k });
        }
        let pz = self.code_prob(z);
        if pz <= 0.0 {
            return Err(Error::EmptyCell(z));
        }
        let mut points = Vec::new();
        let mut probs = Vec::new();
        for (x, &m) in self.mass[z].iter().enumerate() {
            if m > 0.0 {
                points.push(self.source.point(x).to_vec());
                probs.push(m / pz);
            }
        }
        DiscreteDistribution::new(points, probs)
    }
}

/// `mass[z][x] = p(x)·1[enc(x) = z]`.
pub fn joint_from_encoder(source: &DiscreteDistribution, enc: &Encoder) -> Result<JointXZ> {
    enc.check_for(source)?;
    let k = enc.codes();
    let mut mass = vec![vec![0.0; source.len()]; k];
    for (x, &z) in enc.assignment().iter().enumerate() {
        mass[z][x] = source.prob(x);
    }
    Ok(JointXZ {
        source: source.clone(),
        k,
        mass,
    })
}

pub fn conditional_x_given_z(joint: &JointXZ, z: usize) -> Result<DiscreteDistribution> {
    joint.conditional(z)
}

pub fn joint_expectation<F: FnMut(&[f64], usize) -> f64>(joint: &JointXZ, f: F) -> f64 {
    joint.expect(f)
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PointRepr {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl From<PointRepr> for Point {
    fn from(p: PointRepr) -> Self {
        match p {
            PointRepr::Scalar(v) => vec![v],
            PointRepr::Vector(v) => v,
        }
    }
}

/// JSON description of a source.
///
/// Either `{"points": [[..], ..], "probs": [..]}` or
/// `{"kind": "gaussian-grid", "mean": m, "std": s, "n": N, "halfwidth": w}`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum SourceSpec {
    Explicit {
        points: Vec<PointRepr>,
        probs: Vec<f64>,
    },
    Generated {
        kind: String,
        mean: f64,
        std: f64,
        n: usize,
        halfwidth: f64,
    },
}

impl SourceSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::SourceSpec(e.to_string()))
    }

    pub fn build(&self) -> Result<DiscreteDistribution> {
        match self {
            SourceSpec::Explicit { points, probs } => DiscreteDistribution::new(
                points.iter().cloned().map(Point::from).collect(),
                probs.clone(),
            ),
            SourceSpec::Generated {
                kind,
                mean,
                std,
                n,
                halfwidth,
            } => {
                if kind != "gaussian-grid" {
                    return Err(Error::SourceSpec(format!("unknown kind {kind:?}")));
                }
                gaussian_grid(*mean, *std, *n, *halfwidth)
            }
        }
    }
}

/// `n` equally spaced points on `[mean − w·std, mean + w·std]` weighted by
/// the Gaussian density and renormalized.
pub fn gaussian_grid(mean: f64, std: f64, n: usize, halfwidth: f64) -> Result<DiscreteDistribution> {
    if n == 0 {
        return Err(Error::SourceSpec("gaussian-grid needs n >= 1".into()));
    }
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::SourceSpec("gaussian-grid needs std > 0".into()));
    }
    if !(halfwidth >= 0.0) || !halfwidth.is_finite() || !mean.is_finite() {
        return Err(Error::SourceSpec(
            "gaussian-grid needs finite mean and halfwidth >= 0".into(),
        ));
    }
    let span = halfwidth * std;
    let xs: Vec<f64> = if n == 1 {
        vec![mean]
    } else {
        // integer numerator keeps the grid exactly symmetric about the mean
        let denom = (n - 1) as f64;
        (0..n)
            .map(|i| mean + span * ((2 * i) as f64 - denom) / denom)
            .collect()
    };
    let weights: Vec<f64> = xs
        .iter()
        .map(|x| (-(x - mean) * (x - mean) / (2.0 * std * std)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    DiscreteDistribution::new(
        xs.into_iter().map(|x| vec![x]).collect(),
        weights.into_iter().map(|w| w / total).collect(),
    )
}

/// Built-in sources: `u4`, `u2`, `gauss33`.
pub fn builtin_source(name: &str) -> Result<DiscreteDistribution> {
    match name {
        "u4" => DiscreteDistribution::uniform_scalar(&[0.0, 1.0, 2.0, 3.0]),
        "u2" => DiscreteDistribution::uniform_scalar(&[0.0, 1.0]),
        "gauss33" => gaussian_grid(0.0, 1.0, 33, 4.0),
        other => Err(Error::SourceSpec(format!("unknown builtin source {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u4() -> DiscreteDistribution {
        DiscreteDistribution::uniform_scalar(&[0.0, 1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn uniform_four_points() {
        let d = make_distribution(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0.25; 4],
        )
        .unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.probs(), &[0.25; 4]);
    }

    #[test]
    fn duplicates_merge() {
        let d = make_distribution(vec![vec![0.0], vec![0.0], vec![1.0]], vec![0.25, 0.25, 0.5])
            .unwrap();
        assert_eq!(d.points(), &[vec![0.0], vec![1.0]]);
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn excess_mass_rejected() {
        let err = make_distribution(vec![vec![0.0], vec![1.0]], vec![0.6, 0.6]).unwrap_err();
        assert!(matches!(err, Error::BadMass { sum } if (sum - 1.2).abs() < 1e-12));
    }

    #[test]
    fn negative_and_mismatched_inputs_rejected() {
        assert!(matches!(
            make_distribution(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
        assert!(matches!(
            make_distribution(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            make_distribution(vec![vec![0.0]], vec![0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn small_drift_renormalized_and_sorted() {
        let d = make_distribution(vec![vec![2.0], vec![-1.0]], vec![0.5, 0.5 + 5e-10]).unwrap();
        assert_eq!(d.points(), &[vec![-1.0], vec![2.0]]);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn negative_zero_is_canonical() {
        let a = make_distribution(vec![vec![-0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let b = make_distribution(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.point(0)[0].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn expectations() {
        let d = u4();
        assert_eq!(expectation(&d, |x| x[0]), 1.5);
        assert_eq!(expectation(&d, |x| (x[0] - 1.5).powi(2)), 1.25);
        let pm = DiscreteDistribution::point_mass(vec![7.0]).unwrap();
        assert_eq!(expectation(&pm, |x| x[0] * x[0]), 49.0);
    }

    #[test]
    fn joint_and_conditionals() {
        let src = u4();
        let enc = Encoder::new(vec![0, 0, 1, 1], 2).unwrap();
        let j = joint_from_encoder(&src, &enc).unwrap();
        assert_eq!(j.mass_matrix(), &[vec![0.25, 0.25, 0.0, 0.0], vec![0.0, 0.0, 0.25, 0.25]]);
        let c0 = conditional_x_given_z(&j, 0).unwrap();
        assert_eq!(c0, DiscreteDistribution::uniform_scalar(&[0.0, 1.0]).unwrap());

        let enc = Encoder::new(vec![0, 1, 1, 0], 2).unwrap();
        let j = joint_from_encoder(&src, &enc).unwrap();
        assert_eq!(j.mass(0, 0), 0.25);
        assert_eq!(j.mass(0, 3), 0.25);
        assert_eq!(j.mass(1, 1), 0.25);
        assert_eq!(j.mass(1, 2), 0.25);
        assert_eq!(j.mass(0, 1), 0.0);
    }

    #[test]
    fn rate_zero_joint() {
        let src = u4();
        let enc = Encoder::new(vec![0; 4], 1).unwrap();
        let j = joint_from_encoder(&src, &enc).unwrap();
        assert_eq!(j.mass_matrix(), &[vec![0.25; 4]]);
        assert_eq!(conditional_x_given_z(&j, 0).unwrap(), src);
    }

    #[test]
    fn empty_cell_conditional_fails() {
        let src = u4();
        let enc = Encoder::new(vec![0; 4], 2).unwrap();
        let j = joint_from_encoder(&src, &enc).unwrap();
        assert_eq!(conditional_x_given_z(&j, 1), Err(Error::EmptyCell(1)));
    }

    #[test]
    fn unassigned_point_fails() {
        let src = u4();
        let enc = Encoder::new(vec![0, 1, 0], 2).unwrap();
        assert!(matches!(joint_from_encoder(&src, &enc), Err(Error::Unassigned(3))));
    }

    #[test]
    fn gaussian_grid_is_symmetric() {
        let g = builtin_source("gauss33").unwrap();
        assert_eq!(g.len(), 33);
        assert_eq!(g.point(0)[0], -4.0);
        assert_eq!(g.point(32)[0], 4.0);
        for i in 0..33 {
            assert_eq!(g.point(i)[0], -g.point(32 - i)[0]);
            assert_eq!(g.prob(i), g.prob(32 - i));
        }
        assert!((g.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn source_spec_json() {
        let s = SourceSpec::from_json(r#"{"points": [[0],[1]], "probs": [0.5, 0.5]}"#).unwrap();
        assert_eq!(s.build().unwrap(), builtin_source("u2").unwrap());
        let s = SourceSpec::from_json(
            r#"{"kind":"gaussian-grid","mean":0,"std":1,"n":33,"halfwidth":4}"#,
        )
        .unwrap();
        assert_eq!(s.build().unwrap(), builtin_source("gauss33").unwrap());
        let s = SourceSpec::from_json(r#"{"kind":"laplace-grid","mean":0,"std":1,"n":3,"halfwidth":1}"#)
            .unwrap();
        assert!(s.build().is_err());
        assert!(SourceSpec::from_json(r#"{"points": 3}"#).is_err());
    }
}
