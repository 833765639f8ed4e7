//! Fixed-rate encoders and the two canonical decoders.
//!
//! An [`Encoder`] partitions the source support into `K = 2^R` cells. The
//! MMSE decoder maps each cell to its conditional mean; the perceptual
//! decoder resamples from the cell's conditional law, so its output
//! marginal is the source law exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{cmp_points, joint_from_encoder, sq_dist, DiscreteDistribution, Point};
use crate::error::{Error, Result};

/// Default cap on `K^n` for exhaustive encoder search.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Codebook size for an integer rate in bits.
pub fn codebook_size(rate_bits: u32) -> Result<usize> {
    if rate_bits >= usize::BITS - 1 {
        return Err(Error::OutOfRange {
            name: "rate",
            value: rate_bits as f64,
            range: "[0, 62] bits",
        });
    }
    Ok(1usize << rate_bits)
}

/// Deterministic map from source-support index to code index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoder {
    assignment: Vec<usize>,
    k: usize,
}

impl Encoder {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Empty("codebook"));
        }
        if let Some(&code) = assignment.iter().find(|&&z| z >= k) {
            return Err(Error::CodeOutOfRange { code, k });
        }
        Ok(Self { assignment, k })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            k: n,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn codes(&self) -> usize {
        self.k
    }

    pub fn code_of(&self, x: usize) -> usize {
        self.assignment[x]
    }

    /// `Some(R)` when `K = 2^R`.
    pub fn rate_bits(&self) -> Option<u32> {
        self.k.is_power_of_two().then(|| self.k.trailing_zeros())
    }

    pub fn cell_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &z in &self.assignment {
            sizes[z] += 1;
        }
        sizes
    }

    pub fn first_empty_cell(&self) -> Option<usize> {
        self.cell_sizes().iter().position(|&s| s == 0)
    }

    /// Checks that every support point of `source` is assigned.
    pub fn check_for(&self, source: &DiscreteDistribution) -> Result<()> {
        let n = source.len();
        if self.assignment.len() < n {
            return Err(Error::Unassigned(self.assignment.len()));
        }
        if self.assignment.len() > n {
            return Err(Error::Shape(format!(
                "encoder covers {} points but the source has {n}",
                self.assignment.len()
            )));
        }
        Ok(())
    }

    fn check_no_empty(&self, source: &DiscreteDistribution) -> Result<()> {
        self.check_for(source)?;
        match self.first_empty_cell() {
            Some(z) => Err(Error::EmptyCell(z)),
            None => Ok(()),
        }
    }
}

/// Anything that maps a code to a law over output points.
pub trait Decoder {
    fn codes(&self) -> usize;

    /// Visits `(output point, probability)` pairs for code `z`.
    fn for_each_output(&self, z: usize, f: &mut dyn FnMut(&[f64], f64));
}

/// Code → output point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicDecoder {
    table: Vec<Point>,
}

impl DeterministicDecoder {
    pub fn new(table: Vec<Point>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Empty("decoder table"));
        }
        let dim = table[0].len();
        for p in &table {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("decoder table"));
            }
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &[Point] {
        &self.table
    }

    pub fn output(&self, z: usize) -> &[f64] {
        &self.table[z]
    }

    /// The same decoder written as point-mass rows.
    pub fn to_stochastic(&self) -> StochasticDecoder {
        let k = self.table.len();
        let mut table = vec![vec![0.0; k]; k];
        for (z, row) in table.iter_mut().enumerate() {
            row[z] = 1.0;
        }
        StochasticDecoder {
            out_support: self.table.clone(),
            table,
        }
    }
}

impl Decoder for DeterministicDecoder {
    fn codes(&self) -> usize {
        self.table.len()
    }

    fn for_each_output(&self, z: usize, f: &mut dyn FnMut(&[f64], f64)) {
        f(&self.table[z], 1.0);
    }
}

/// Code → pmf over a shared output support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticDecoder {
    out_support: Vec<Point>,
    table: Vec<Vec<f64>>,
}

impl StochasticDecoder {
    pub fn new(out_support: Vec<Point>, table: Vec<Vec<f64>>) -> Result<Self> {
        if out_support.is_empty() || table.is_empty() {
            return Err(Error::Empty("stochastic decoder"));
        }
        let dim = out_support[0].len();
        if out_support.iter().any(|p| p.len() != dim) {
            return Err(Error::Shape("output points of mixed dimension".into()));
        }
        if out_support.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decoder output support"));
        }
        for row in &table {
            if row.len() != out_support.len() {
                return Err(Error::Shape(format!(
                    "decoder row of length {} for {} output points",
                    row.len(),
                    out_support.len()
                )));
            }
            if let Some((index, &value)) = row.iter().enumerate().find(|(_, &q)| !(q >= 0.0)) {
                return Err(Error::NegativeProbability { index, value });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::BadMass { sum });
            }
        }
        Ok(Self { out_support, table })
    }

    pub fn out_support(&self) -> &[Point] {
        &self.out_support
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn row(&self, z: usize) -> &[f64] {
        &self.table[z]
    }

    /// Conditional output law for code `z`.
    pub fn row_distribution(&self, z: usize) -> Result<DiscreteDistribution> {
        DiscreteDistribution::new(self.out_support.clone(), self.table[z].clone())
    }
}

impl Decoder for StochasticDecoder {
    fn codes(&self) -> usize {
        self.table.len()
    }

    fn for_each_output(&self, z: usize, f: &mut dyn FnMut(&[f64], f64)) {
        for (x, &q) in self.out_support.iter().zip(&self.table[z]) {
            if q > 0.0 {
                f(x, q);
            }
        }
    }
}

fn check_decoder(enc: &Encoder, dec: &dyn Decoder) -> Result<()> {
    if dec.codes() != enc.codes() {
        return Err(Error::Shape(format!(
            "decoder has {} rows for {} codes",
            dec.codes(),
            enc.codes()
        )));
    }
    Ok(())
}

/// Conditional means `E[X | Z = z]`.
pub fn mmse_decoder_for(source: &DiscreteDistribution, enc: &Encoder) -> Result<DeterministicDecoder> {
    enc.check_no_empty(source)?;
    let (table, _) = conditional_means(source, enc.assignment(), enc.codes());
    DeterministicDecoder::new(table)
}

fn conditional_means(
    source: &DiscreteDistribution,
    assignment: &[usize],
    k: usize,
) -> (Vec<Point>, Vec<f64>) {
    let d = source.dim();
    let mut sums = vec![vec![0.0; d]; k];
    let mut mass = vec![0.0; k];
    for (i, (x, p)) in source.iter().enumerate() {
        let z = assignment[i];
        mass[z] += p;
        for (s, v) in sums[z].iter_mut().zip(x) {
            *s += p * v;
        }
    }
    for (s, &m) in sums.iter_mut().zip(&mass) {
        if m > 0.0 {
            s.iter_mut().for_each(|v| *v /= m);
        }
    }
    (sums, mass)
}

fn assignment_mse(source: &DiscreteDistribution, assignment: &[usize], centroids: &[Point]) -> f64 {
    source
        .iter()
        .enumerate()
        .map(|(i, (x, p))| p * sq_dist(x, &centroids[assignment[i]]))
        .sum()
}

/// Conditional resampler: row `z` is `p_{X|Z=z}` over the source support.
pub fn perceptual_decoder_for(source: &DiscreteDistribution, enc: &Encoder) -> Result<StochasticDecoder> {
    enc.check_no_empty(source)?;
    let joint = joint_from_encoder(source, enc)?;
    let rows = joint
        .mass_matrix()
        .iter()
        .map(|row| {
            let pz: f64 = row.iter().sum();
            row.iter().map(|m| m / pz).collect()
        })
        .collect();
    StochasticDecoder::new(source.points().to_vec(), rows)
}

/// Exact `E‖X − X̂‖²` with `X̂ ~ dec(· | enc(X))`.
pub fn distortion(source: &DiscreteDistribution, enc: &Encoder, dec: &dyn Decoder) -> Result<f64> {
    enc.check_for(source)?;
    check_decoder(enc, dec)?;
    let mut acc = 0.0;
    for (i, (x, p)) in source.iter().enumerate() {
        let mut inner = 0.0;
        dec.for_each_output(enc.code_of(i), &mut |y, q| inner += q * sq_dist(x, y));
        acc += p * inner;
    }
    Ok(acc)
}

/// Exact output marginal `Σ_z p(z)·q(· | z)`.
pub fn decoder_output_dist(
    source: &DiscreteDistribution,
    enc: &Encoder,
    dec: &dyn Decoder,
) -> Result<DiscreteDistribution> {
    enc.check_for(source)?;
    check_decoder(enc, dec)?;
    let mut code_mass = vec![0.0; enc.codes()];
    for (i, p) in source.probs().iter().enumerate() {
        code_mass[enc.code_of(i)] += p;
    }
    let mut points = Vec::new();
    let mut probs = Vec::new();
    for (z, &pz) in code_mass.iter().enumerate() {
        if pz > 0.0 {
            dec.for_each_output(z, &mut |y, q| {
                points.push(y.to_vec());
                probs.push(pz * q);
            });
        }
    }
    DiscreteDistribution::new(points, probs)
}

/// True iff the decoder table has `K` pairwise distinct outputs.
pub fn check_zd_xd_bijective(enc: &Encoder, dec: &DeterministicDecoder) -> bool {
    dec.table().len() == enc.codes() && first_collision(dec).is_none()
}

/// First pair of codes whose outputs coincide.
pub fn first_collision(dec: &DeterministicDecoder) -> Option<(usize, usize)> {
    let t = dec.table();
    for a in 0..t.len() {
        for b in a + 1..t.len() {
            if cmp_points(&t[a], &t[b]).is_eq() {
                return Some((a, b));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
pub struct LloydOptions {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative MSE change falls to this level.
    pub tol: f64,
    /// Independent seeded initializations; the best final MSE wins.
    pub restarts: usize,
}

impl Default for LloydOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 1000,
            tol: 1e-10,
            restarts: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub encoder: Encoder,
    pub decoder: DeterministicDecoder,
    pub mse: f64,
    /// MSE after every assignment/update round of the winning restart.
    pub history: Vec<f64>,
}

/// Lloyd's algorithm: nearest-centroid assignment alternating with
/// conditional-mean updates.
pub fn lloyd_train(source: &DiscreteDistribution, k: usize, opts: &LloydOptions) -> Result<LloydOutcome> {
    let n = source.len();
    if k == 0 {
        return Err(Error::Empty("codebook"));
    }
    if k > n {
        return Err(Error::TooManyCells { k, n });
    }
    if opts.max_iter == 0 {
        return Err(Error::OutOfRange {
            name: "max_iter",
            value: 0.0,
            range: ">= 1",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<LloydOutcome> = None;
    for _ in 0..opts.restarts.max(1) {
        let init = quantile_init(source, k, &mut rng);
        let run = lloyd_run(source, init, opts)?;
        if best.as_ref().is_none_or(|b| run.mse < b.mse) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// One centroid per probability stratum `[k/K, (k+1)/K)`, drawn at a seeded
/// level inside the stratum.
fn quantile_init(source: &DiscreteDistribution, k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let n = source.len();
    let mut cum = Vec::with_capacity(n);
    let mut s = 0.0;
    for &p in source.probs() {
        s += p;
        cum.push(s);
    }
    let mut taken = vec![false; n];
    let mut centroids = Vec::with_capacity(k);
    for stratum in 0..k {
        let u = (stratum as f64 + rng.random::<f64>()) / k as f64;
        let mut idx = cum.iter().position(|&c| c > u).unwrap_or(n - 1);
        if taken[idx] {
            // nearest free index, looking below first
            idx = (1..n)
                .flat_map(|d| [idx.checked_sub(d), Some(idx + d)])
                .flatten()
                .find(|&i| i < n && !taken[i])
                .expect("k <= n leaves a free point");
        }
        taken[idx] = true;
        centroids.push(source.point(idx).to_vec());
    }
    centroids
}

fn nearest(x: &[f64], centroids: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (z, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best = z;
            best_d = d;
        }
    }
    best
}

fn lloyd_run(source: &DiscreteDistribution, mut centroids: Vec<Point>, opts: &LloydOptions) -> Result<LloydOutcome> {
    let n = source.len();
    let k = centroids.len();
    let mut assignment = vec![usize::MAX; n];
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..opts.max_iter {
        let mut next: Vec<usize> = source.points().iter().map(|x| nearest(x, &centroids)).collect();

        // repair empty cells by stealing the worst-served point
        loop {
            let mut sizes = vec![0usize; k];
            for &z in &next {
                sizes[z] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            let mut victim = None;
            let mut worst = -1.0;
            for (i, x) in source.points().iter().enumerate() {
                if sizes[next[i]] < 2 {
                    continue;
                }
                let d = sq_dist(x, &centroids[next[i]]);
                if d > worst {
                    worst = d;
                    victim = Some(i);
                }
            }
            let i = victim.expect("k <= n leaves a donor cell");
            next[i] = empty;
            centroids[empty] = source.point(i).to_vec();
        }

        let unchanged = next == assignment;
        assignment = next;
        let (means, _) = conditional_means(source, &assignment, k);
        centroids = means;
        let mse = assignment_mse(source, &assignment, &centroids);
        let converged = match history.last() {
            Some(&prev) => unchanged || prev <= 0.0 || (prev - mse).abs() <= opts.tol * prev,
            None => false,
        };
        history.push(mse);
        if converged {
            break;
        }
    }
    let mse = *history.last().expect("max_iter >= 1");
    Ok(LloydOutcome {
        encoder: Encoder::new(assignment, k)?,
        decoder: DeterministicDecoder::new(centroids)?,
        mse,
        history,
    })
}

/// How global optimality of an encoder was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    /// Every assignment in `[0, K)^n` was scored.
    Enumeration,
    /// Dynamic program over contiguous partitions of a scalar source.
    IntervalDp,
}

#[derive(Debug, Clone)]
pub struct OptimalPair {
    pub encoder: Encoder,
    pub decoder: DeterministicDecoder,
    /// The minimum MSE `D_d`.
    pub distortion: f64,
    pub certificate: Certificate,
}

/// Globally MSE-optimal encoder by scoring all `K^n` assignments.
///
/// Assignments with an empty cell are skipped; ties go to the
/// lexicographically smallest assignment.
pub fn exhaustive_optimal_encoder(source: &DiscreteDistribution, k: usize, cap: u64) -> Result<OptimalPair> {
    let n = source.len();
    if k == 0 {
        return Err(Error::Empty("codebook"));
    }
    if k > n {
        return Err(Error::TooManyCells { k, n });
    }
    let count = (k as f64).powi(n as i32);
    if count > cap as f64 {
        return Err(Error::EnumerationCap { count, cap });
    }
    let mut assignment = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut sizes = vec![0usize; k];
    loop {
        sizes.iter_mut().for_each(|s| *s = 0);
        for &z in &assignment {
            sizes[z] += 1;
        }
        if sizes.iter().all(|&s| s > 0) {
            let (means, _) = conditional_means(source, &assignment, k);
            let mse = assignment_mse(source, &assignment, &means);
            let better = match &best {
                None => true,
                Some((_, b)) => mse < b - 1e-12 * b.abs(),
            };
            if better {
                best = Some((assignment.clone(), mse));
            }
        }
        // odometer with the last index fastest: lexicographic order
        let mut pos = n;
        loop {
            if pos == 0 {
                let (assignment, _) = best.expect("k <= n admits a full assignment");
                return finish(source, assignment, k, Certificate::Enumeration);
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < k {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

fn finish(source: &DiscreteDistribution, assignment: Vec<usize>, k: usize, certificate: Certificate) -> Result<OptimalPair> {
    let encoder = Encoder::new(assignment, k)?;
    let decoder = mmse_decoder_for(source, &encoder)?;
    let distortion = distortion(source, &encoder, &decoder)?;
    Ok(OptimalPair {
        encoder,
        decoder,
        distortion,
        certificate,
    })
}

/// Globally MSE-optimal encoder for a scalar source.
///
/// On the line an optimal partition consists of contiguous runs of the
/// sorted support, so a dynamic program over split points is exact.
pub fn optimal_1d_quantizer(source: &DiscreteDistribution, k: usize) -> Result<OptimalPair> {
    let n = source.len();
    if source.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: source.dim(),
        });
    }
    if k == 0 {
        return Err(Error::Empty("codebook"));
    }
    if k > n {
        return Err(Error::TooManyCells { k, n });
    }
    let mean = source.mean()[0];
    // centred prefix sums of p, p·x and p·x²
    let mut w = vec![0.0; n + 1];
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, (x, p)) in source.iter().enumerate() {
        let y = x[0] - mean;
        w[i + 1] = w[i] + p;
        s1[i + 1] = s1[i] + p * y;
        s2[i + 1] = s2[i] + p * y * y;
    }
    let seg = |a: usize, b: usize| -> f64 {
        let m = w[b] - w[a];
        let t = s1[b] - s1[a];
        (s2[b] - s2[a] - t * t / m).max(0.0)
    };
    // best[c][j]: first j points split into c cells
    let mut best = vec![vec![f64::INFINITY; n + 1]; k + 1];
    let mut split = vec![vec![0usize; n + 1]; k + 1];
    best[0][0] = 0.0;
    for c in 1..=k {
        for j in c..=n - (k - c) {
            for i in (c - 1)..j {
                let v = best[c - 1][i] + seg(i, j);
                if v < best[c][j] {
                    best[c][j] = v;
                    split[c][j] = i;
                }
            }
        }
    }
    let mut assignment = vec![0; n];
    let mut j = n;
    for c in (1..=k).rev() {
        let i = split[c][j];
        for a in assignment.iter_mut().take(j).skip(i) {
            *a = c - 1;
        }
        j = i;
    }
    finish(source, assignment, k, Certificate::IntervalDp)
}

/// Certified MSE-optimal pair: enumeration when `K^n` is within `cap`,
/// otherwise the interval dynamic program for scalar sources.
pub fn optimal_encoder(source: &DiscreteDistribution, k: usize, cap: u64) -> Result<OptimalPair> {
    match exhaustive_optimal_encoder(source, k, cap) {
        Err(Error::EnumerationCap { .. }) if source.dim() == 1 => optimal_1d_quantizer(source, k),
        other => other,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GpTable {
    support: Vec<Point>,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CodecFile {
    #[serde(rename = "K")]
    k: usize,
    assignment: Vec<usize>,
    gd: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gp: Option<GpTable>,
}

/// Encoder with its MMSE decoder and, optionally, its perceptual decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Codec {
    pub encoder: Encoder,
    pub gd: DeterministicDecoder,
    pub gp: Option<StochasticDecoder>,
}

impl Codec {
    pub fn to_json(&self) -> String {
        let file = CodecFile {
            k: self.encoder.codes(),
            assignment: self.encoder.assignment().to_vec(),
            gd: self.gd.table().to_vec(),
            gp: self.gp.as_ref().map(|gp| GpTable {
                support: gp.out_support().to_vec(),
                rows: gp.rows().to_vec(),
            }),
        };
        serde_json::to_string_pretty(&file).expect("codec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CodecFile = serde_json::from_str(text).map_err(|e| Error::Codec(e.to_string()))?;
        let encoder = Encoder::new(file.assignment, file.k)?;
        let gd = DeterministicDecoder::new(file.gd)?;
        if gd.codes() != file.k {
            return Err(Error::Codec(format!(
                "gd has {} entries for K = {}",
                gd.codes(),
                file.k
            )));
        }
        let gp = match file.gp {
            Some(t) => {
                let gp = StochasticDecoder::new(t.support, t.rows)?;
                if gp.codes() != file.k {
                    return Err(Error::Codec(format!(
                        "gp has {} rows for K = {}",
                        gp.codes(),
                        file.k
                    )));
                }
                Some(gp)
            }
            None => None,
        };
        Ok(Self { encoder, gd, gp })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::builtin_source;

    fn u4() -> DiscreteDistribution {
        builtin_source("u4").unwrap()
    }

    fn split() -> Encoder {
        Encoder::new(vec![0, 0, 1, 1], 2).unwrap()
    }

    #[test]
    fn mmse_tables() {
        let src = u4();
        assert_eq!(mmse_decoder_for(&src, &split()).unwrap().table(), &[vec![0.5], vec![2.5]]);
        let one = Encoder::new(vec![0; 4], 1).unwrap();
        assert_eq!(mmse_decoder_for(&src, &one).unwrap().table(), &[vec![1.5]]);
        let u2 = builtin_source("u2").unwrap();
        assert_eq!(
            mmse_decoder_for(&u2, &Encoder::identity(2)).unwrap().table(),
            &[vec![0.0], vec![1.0]]
        );
        let holey = Encoder::new(vec![0, 0, 0, 0], 2).unwrap();
        assert_eq!(mmse_decoder_for(&src, &holey), Err(Error::EmptyCell(1)));
    }

    #[test]
    fn distortions() {
        let src = u4();
        let enc = split();
        let gd = mmse_decoder_for(&src, &enc).unwrap();
        let gp = perceptual_decoder_for(&src, &enc).unwrap();
        assert!((distortion(&src, &enc, &gd).unwrap() - 0.25).abs() < 1e-15);
        assert!((distortion(&src, &enc, &gp).unwrap() - 0.5).abs() < 1e-15);
        let id = Encoder::identity(4);
        let gd_id = mmse_decoder_for(&src, &id).unwrap();
        assert_eq!(distortion(&src, &id, &gd_id).unwrap(), 0.0);
    }

    #[test]
    fn perceptual_rows() {
        let src = u4();
        let gp = perceptual_decoder_for(&src, &split()).unwrap();
        assert_eq!(gp.rows(), &[vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]]);
        let one = Encoder::new(vec![0; 4], 1).unwrap();
        let gp = perceptual_decoder_for(&src, &one).unwrap();
        assert_eq!(gp.row_distribution(0).unwrap(), src);
        let gp = perceptual_decoder_for(&src, &Encoder::identity(4)).unwrap();
        for (z, row) in gp.rows().iter().enumerate() {
            assert_eq!(row[z], 1.0);
        }
    }

    #[test]
    fn output_marginals() {
        let src = u4();
        let enc = split();
        let gp = perceptual_decoder_for(&src, &enc).unwrap();
        assert_eq!(decoder_output_dist(&src, &enc, &gp).unwrap(), src);
        let gd = mmse_decoder_for(&src, &enc).unwrap();
        assert_eq!(
            decoder_output_dist(&src, &enc, &gd).unwrap(),
            DiscreteDistribution::uniform_scalar(&[0.5, 2.5]).unwrap()
        );
        let one = Encoder::new(vec![0; 4], 1).unwrap();
        let gd = mmse_decoder_for(&src, &one).unwrap();
        assert_eq!(
            decoder_output_dist(&src, &one, &gd).unwrap(),
            DiscreteDistribution::point_mass(vec![1.5]).unwrap()
        );
    }

    #[test]
    fn bijectivity() {
        let enc = split();
        let gd = DeterministicDecoder::new(vec![vec![0.5], vec![2.5]]).unwrap();
        assert!(check_zd_xd_bijective(&enc, &gd));
        let gd = DeterministicDecoder::new(vec![vec![1.5], vec![1.5]]).unwrap();
        assert!(!check_zd_xd_bijective(&enc, &gd));
        let one = Encoder::new(vec![0; 4], 1).unwrap();
        let gd = DeterministicDecoder::new(vec![vec![1.5]]).unwrap();
        assert!(check_zd_xd_bijective(&one, &gd));
    }

    #[test]
    fn exhaustive_examples() {
        let pair = exhaustive_optimal_encoder(&u4(), 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(pair.encoder.assignment(), &[0, 0, 1, 1]);
        assert!((pair.distortion - 0.25).abs() < 1e-15);

        let src = DiscreteDistribution::uniform_scalar(&[0.0, 1.0, 4.0, 5.0]).unwrap();
        let pair = exhaustive_optimal_encoder(&src, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(pair.encoder.assignment(), &[0, 0, 1, 1]);
        assert!((pair.distortion - 0.25).abs() < 1e-15);

        let pair = exhaustive_optimal_encoder(&u4(), 4, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(pair.distortion, 0.0);
        assert_eq!(pair.encoder.assignment(), &[0, 1, 2, 3]);
    }

    #[test]
    fn exhaustive_cap() {
        let g = builtin_source("gauss33").unwrap();
        assert!(matches!(
            exhaustive_optimal_encoder(&g, 2, DEFAULT_ENUMERATION_CAP),
            Err(Error::EnumerationCap { .. })
        ));
        assert!(matches!(
            exhaustive_optimal_encoder(&u4(), 5, DEFAULT_ENUMERATION_CAP),
            Err(Error::TooManyCells { k: 5, n: 4 })
        ));
    }

    #[test]
    fn interval_dp_agrees_with_enumeration() {
        let src = DiscreteDistribution::new(
            (0..9).map(|i| vec![(i * i) as f64 * 0.3 - 2.0]).collect(),
            vec![0.05, 0.2, 0.1, 0.05, 0.15, 0.1, 0.1, 0.2, 0.05],
        )
        .unwrap();
        for k in 1..=4 {
            let e = exhaustive_optimal_encoder(&src, k, DEFAULT_ENUMERATION_CAP).unwrap();
            let d = optimal_1d_quantizer(&src, k).unwrap();
            assert!((e.distortion - d.distortion).abs() <= 1e-12, "k = {k}");
        }
        let g = builtin_source("gauss33").unwrap();
        let pair = optimal_encoder(&g, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(pair.certificate, Certificate::IntervalDp);
    }

    #[test]
    fn lloyd_examples() {
        let src = u4();
        let out = lloyd_train(&src, 2, &LloydOptions::default()).unwrap();
        assert_eq!(out.encoder.assignment(), &[0, 0, 1, 1]);
        assert_eq!(out.decoder.table(), &[vec![0.5], vec![2.5]]);
        assert!((out.mse - 0.25).abs() < 1e-15);

        let out = lloyd_train(&src, 1, &LloydOptions::default()).unwrap();
        assert_eq!(out.decoder.table(), &[vec![1.5]]);
        assert!((out.mse - src.variance()).abs() < 1e-15);

        let out = lloyd_train(&src, 4, &LloydOptions::default()).unwrap();
        assert_eq!(out.mse, 0.0);
        assert_eq!(out.encoder.cell_sizes(), vec![1; 4]);

        assert!(matches!(
            lloyd_train(&src, 5, &LloydOptions::default()),
            Err(Error::TooManyCells { .. })
        ));
    }

    #[test]
    fn lloyd_is_deterministic_and_monotone() {
        let g = builtin_source("gauss33").unwrap();
        let opts = LloydOptions {
            seed: 7,
            ..LloydOptions::default()
        };
        let a = lloyd_train(&g, 4, &opts).unwrap();
        let b = lloyd_train(&g, 4, &opts).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.history, b.history);
        for w in a.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert!(a.encoder.first_empty_cell().is_none());
    }

    #[test]
    fn codec_json_round_trip() {
        let src = builtin_source("gauss33").unwrap();
        let pair = optimal_encoder(&src, 4, DEFAULT_ENUMERATION_CAP).unwrap();
        let codec = Codec {
            gp: Some(perceptual_decoder_for(&src, &pair.encoder).unwrap()),
            encoder: pair.encoder,
            gd: pair.decoder,
        };
        let text = codec.to_json();
        let back = Codec::from_json(&text).unwrap();
        assert_eq!(back, codec);
        assert_eq!(back.to_json(), text);

        let bare = Codec { gp: None, ..codec };
        let back = Codec::from_json(&bare.to_json()).unwrap();
        assert_eq!(back, bare);
        assert!(!bare.to_json().contains("gp"));
    }

    #[test]
    fn codec_json_rejects_bad_shapes() {
        assert!(Codec::from_json(r#"{"K":2,"assignment":[0,2],"gd":[[0],[1]]}"#).is_err());
        assert!(Codec::from_json(r#"{"K":2,"assignment":[0,1],"gd":[[0]]}"#).is_err());
        assert!(Codec::from_json("not json").is_err());
    }
}
