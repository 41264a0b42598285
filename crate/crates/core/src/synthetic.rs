//! Correlated-pairs Gaussian worlds, multilinear targets and their closed-form oracles.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::poly::Polynomial;
use crate::subset::FeatureSet;

/// Anything that draws i.i.d. points of a fixed dimension.
pub trait Sampler: Send + Sync {
    fn dim(&self) -> usize;
    /// `n × dim` matrix, deterministic given `seed`.
    fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>>;
}

/// Standard-normal features where `2j` and `2j+1` have correlation `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairsGaussian {
    d: usize,
    rho: f64,
}

impl PairsGaussian {
    pub fn new(d: usize, rho: f64) -> Result<Self> {
        if d == 0 || d % 2 != 0 {
            return Err(Error::InvalidParameter(format!("pairs world needs an even, positive d; got {d}")));
        }
        if !(rho.abs() <= 1.0) {
            return Err(Error::InvalidParameter(format!("correlation must lie in [-1, 1], got {rho}")));
        }
        Ok(PairsGaussian { d, rho })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn partner(&self, i: usize) -> usize {
        i ^ 1
    }

    /// `d × d` covariance matrix.
    pub fn covariance(&self) -> Array2<f64> {
        let mut c = Array2::eye(self.d);
        for p in (0..self.d).step_by(2) {
            c[(p, p + 1)] = self.rho;
            c[(p + 1, p)] = self.rho;
        }
        c
    }

    /// Fills the unobserved coordinates of `x` from the exact Gaussian conditional given `x_S`.
    pub fn sample_conditional<R: Rng + ?Sized>(&self, x: &mut [f64], observed: FeatureSet, rng: &mut R) {
        let sigma = (1.0 - self.rho * self.rho).max(0.0).sqrt();
        for p in (0..self.d).step_by(2) {
            let q = p + 1;
            match (observed.contains(p), observed.contains(q)) {
                (true, true) => {}
                (true, false) => {
                    let z: f64 = rng.sample(StandardNormal);
                    x[q] = self.rho * x[p] + sigma * z;
                }
                (false, true) => {
                    let z: f64 = rng.sample(StandardNormal);
                    x[p] = self.rho * x[q] + sigma * z;
                }
                (false, false) => {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    x[p] = z1;
                    x[q] = self.rho * z1 + sigma * z2;
                }
            }
        }
    }
}

impl Sampler for PairsGaussian {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample count must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Array2::zeros((n, self.d));
        for mut row in out.rows_mut() {
            let r = row.as_slice_mut().expect("contiguous row");
            self.sample_conditional(r, FeatureSet::EMPTY, &mut rng);
        }
        Ok(out)
    }
}

/// Bootstrap resampling of a fixed set of rows.
#[derive(Clone, Debug)]
pub struct EmpiricalSampler {
    rows: Array2<f64>,
}

impl EmpiricalSampler {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::Data("empirical sampler needs at least one row".into()));
        }
        Ok(EmpiricalSampler { rows })
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }
}

impl Sampler for EmpiricalSampler {
    fn dim(&self) -> usize {
        self.rows.ncols()
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Array2::zeros((n, self.dim()));
        for mut row in out.rows_mut() {
            let k = rng.random_range(0..self.rows.nrows());
            row.assign(&self.rows.row(k));
        }
        Ok(out)
    }
}

/// Distribution of the random monomial coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffDist {
    Normal,
    Laplace,
}

impl std::str::FromStr for CoeffDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(CoeffDist::Normal),
            "laplace" => Ok(CoeffDist::Laplace),
            _ => Err(Error::InvalidParameter(format!("unknown coefficient distribution {s:?}"))),
        }
    }
}

/// `y = Σ_S β_S Π_{i∈S} x_i / normalizer`, normalized to unit variance under its world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultilinearTarget {
    d: usize,
    coefficients: BTreeMap<FeatureSet, f64>,
    normalizer: f64,
}

impl MultilinearTarget {
    /// Normalizes the raw coefficients so `Var[y] = 1` under `world`.
    pub fn new(world: &PairsGaussian, coefficients: BTreeMap<FeatureSet, f64>) -> Result<Self> {
        let d = world.d();
        if let Some(s) = coefficients.keys().find(|s| !s.fits(d)) {
            return Err(Error::InvalidParameter(format!("monomial {s} exceeds d = {d}")));
        }
        let raw = MultilinearTarget { d, coefficients, normalizer: 1.0 };
        let var = raw.polynomial().variance(world.rho());
        if !(var > 1e-12) {
            return Err(Error::ZeroVariance("multilinear target is constant under the world".into()));
        }
        Ok(MultilinearTarget { normalizer: var.sqrt(), ..raw })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Raw (unnormalized) coefficients.
    pub fn coefficients(&self) -> &BTreeMap<FeatureSet, f64> {
        &self.coefficients
    }

    /// Largest monomial order with a non-zero coefficient.
    pub fn order(&self) -> usize {
        self.coefficients.iter().filter(|(_, c)| **c != 0.0).map(|(s, _)| s.len()).max().unwrap_or(0)
    }

    /// Normalized coefficients `β_S / normalizer`.
    pub fn scaled_terms(&self) -> impl Iterator<Item = (FeatureSet, f64)> + '_ {
        self.coefficients.iter().map(move |(s, c)| (*s, c / self.normalizer))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.scaled_terms()
            .map(|(s, c)| s.indices().fold(c, |acc, i| acc * x[i]))
            .sum()
    }

    /// The normalized target as a polynomial.
    pub fn polynomial(&self) -> Polynomial {
        let mut p = Polynomial::zero(self.d);
        for (s, c) in self.scaled_terms() {
            p = p.add(&Polynomial::monomial(self.d, s, c));
        }
        p
    }
}

fn draw_coefficient(rng: &mut ChaCha8Rng, dist: CoeffDist) -> f64 {
    match dist {
        CoeffDist::Normal => rng.sample(StandardNormal),
        CoeffDist::Laplace => {
            // inverse CDF with unit scale
            let u: f64 = rng.random::<f64>() - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
        }
    }
}

/// Random multilinear target with i.i.d. coefficients on every `|S| ≤ kstar`.
pub fn make_multilinear_target(world: &PairsGaussian, kstar: usize, dist: CoeffDist, seed: u64) -> Result<MultilinearTarget> {
    let d = world.d();
    if kstar == 0 || kstar > d {
        return Err(Error::InvalidParameter(format!("kstar must be in 1..={d}, got {kstar}")));
    }
    let mut sets: Vec<FeatureSet> = (0..(1u32 << d)).map(FeatureSet::from_bits).filter(|s| s.len() <= kstar).collect();
    sets.sort_by_key(|s| (s.len(), s.bits()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefficients = sets.into_iter().map(|s| (s, draw_coefficient(&mut rng, dist))).collect();
    MultilinearTarget::new(world, coefficients)
}

/// `E[y(x_S, X_{−S}) | X_S = x_S]` under the pairs world.
pub fn exact_conditional_value(target: &MultilinearTarget, world: &PairsGaussian, x: &[f64], s: FeatureSet) -> Result<f64> {
    check_dim(world.d(), target.d())?;
    check_dim(world.d(), x.len())?;
    Ok(multilinear_conditional(target, world.rho(), x, s))
}

pub(crate) fn multilinear_conditional(target: &MultilinearTarget, rho: f64, x: &[f64], s: FeatureSet) -> f64 {
    let mut total = 0.0;
    'terms: for (m, c) in target.scaled_terms() {
        let mut v = c;
        let mut seen = FeatureSet::EMPTY;
        for i in m.indices() {
            if seen.contains(i) {
                continue;
            }
            let j = i ^ 1;
            if m.contains(j) {
                seen = seen.with(j);
                v *= match (s.contains(i), s.contains(j)) {
                    (true, true) => x[i] * x[j],
                    (true, false) => rho * x[i] * x[i],
                    (false, true) => rho * x[j] * x[j],
                    (false, false) => rho,
                };
            } else if s.contains(i) {
                v *= x[i];
            } else if s.contains(j) {
                v *= rho * x[j];
            } else {
                continue 'terms;
            }
        }
        total += v;
    }
    total
}

/// The fixed two-feature target `f = x + xy` (unnormalized).
pub fn target_2d() -> Polynomial {
    let x = Polynomial::var(2, 0);
    let y = Polynomial::var(2, 1);
    x.add(&x.mul(&y))
}

/// Closed-form Shapley values of `f = x + xy` under conditional removal.
pub fn exact_shapley_2d(rho: f64, x: f64, y: f64) -> (f64, f64) {
    let phi_x = (x - 0.5 * rho * y) + (0.5 * x * y + 0.5 * rho * (x * x - y * y - 1.0));
    let phi_y = (0.5 * rho * y) + (0.5 * x * y + 0.5 * rho * (y * y - x * x - 1.0));
    (phi_x, phi_y)
}

/// Closed-form purified components `(f̃_∅, f̃_x, f̃_y, f̃_xy)` of `f = x + xy`.
pub fn purified_2d(rho: f64, x: f64, y: f64) -> [f64; 4] {
    [
        rho,
        x + rho * x * x - rho,
        rho * y + rho * y * y - rho,
        -rho * y + x * y - rho * x * x - rho * y * y + rho,
    ]
}

/// Closed-form uncentered Sobol covariances `E[F · f̃_S]` of `f = x + xy`.
pub fn sobol_covariances_2d(rho: f64) -> [f64; 4] {
    let r2 = rho * rho;
    [r2, 1.0 + 2.0 * r2, 3.0 * r2, 1.0 - 4.0 * r2]
}

/// Downward closure of the pair-unions touched by each monomial of `target`.
///
/// Under the pairs world every purified component of `target` lives on this family.
pub fn pair_closure_frontier(target: &MultilinearTarget) -> Vec<FeatureSet> {
    let mut maximal: Vec<FeatureSet> = Vec::new();
    for (m, c) in target.coefficients() {
        if *c == 0.0 || m.is_empty() {
            continue;
        }
        let closed = m.indices().fold(FeatureSet::EMPTY, |acc, i| acc.with(i).with(i ^ 1));
        maximal.push(closed);
    }
    let mut all: Vec<FeatureSet> = maximal
        .iter()
        .flat_map(|t| t.subsets())
        .filter(|s| !s.is_empty())
        .collect();
    all.sort_by_key(|s| (s.len(), s.bits()));
    all.dedup();
    all
}

/// Writes samples with a header `x1..xd,y`.
pub fn write_samples_csv<W: Write>(x: &Array2<f64>, y: &[f64], out: W) -> Result<()> {
    check_dim(x.nrows(), y.len())?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=x.ncols()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (row, yi) in x.rows().into_iter().zip(y) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        rec.push(format!("{yi:.17e}"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
