//! Functional ANOVA: pointwise purification, Sobol indices and covariances, and the
//! repeated-projection solver for additive fits over arbitrary frontiers.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::masking::{set_function_table, MaskedFunction, Model};
use crate::par::map_chunks;
use crate::poly::Polynomial;
use crate::subset::{check_exhaustive, mobius_purify, FeatureSet, PurifiedTable};
use crate::synthetic::Sampler;

/// Purified components `f̃_S(x)` of `f` at `x` for every `S ⊆ [d]`.
pub fn purify_at(f: &dyn MaskedFunction, x: &[f64]) -> Result<PurifiedTable> {
    check_dim(f.dim(), x.len())?;
    Ok(mobius_purify(&set_function_table(f, x)?))
}

/// Sobol statistics of one subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolEntry {
    pub subset: FeatureSet,
    /// `Var[f̃_S]`.
    pub v: f64,
    pub v_se: f64,
    /// `Cov[F, f̃_S]`.
    pub c: f64,
    pub c_se: f64,
    /// `E[F · f̃_S]`.
    pub c_uncentered: f64,
    pub c_uncentered_se: f64,
}

/// Monte-Carlo Sobol indices and covariances over all subsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolReport {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub entries: Vec<SobolEntry>,
    /// `Var[F]`.
    pub variance: f64,
    /// `E[F²]`.
    pub second_moment: f64,
    /// `Σ_S V_S − Var[F]` and its standard error.
    pub variance_gap: f64,
    pub variance_gap_se: f64,
}

impl SobolReport {
    pub fn entry(&self, s: FeatureSet) -> &SobolEntry {
        &self.entries[s.bits() as usize]
    }

    pub fn sum_v(&self) -> f64 {
        self.entries.iter().map(|e| e.v).sum()
    }

    pub fn sum_c(&self) -> f64 {
        self.entries.iter().map(|e| e.c).sum()
    }

    pub fn sum_c_uncentered(&self) -> f64 {
        self.entries.iter().map(|e| e.c_uncentered).sum()
    }

    /// `subset_bits,subset,size,v,v_se,c,c_se,c_uncentered,c_uncentered_se`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subset_bits", "subset", "size", "v", "v_se", "c", "c_se", "c_uncentered", "c_uncentered_se"])?;
        for e in &self.entries {
            let members: Vec<String> = e.subset.indices().map(|i| i.to_string()).collect();
            w.write_record([
                e.subset.bits().to_string(),
                members.join(" "),
                e.subset.len().to_string(),
                format!("{:.17e}", e.v),
                format!("{:.17e}", e.v_se),
                format!("{:.17e}", e.c),
                format!("{:.17e}", e.c_se),
                format!("{:.17e}", e.c_uncentered),
                format!("{:.17e}", e.c_uncentered_se),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

const CHUNK: usize = 4096;

fn chunk_seed(seed: u64, chunk: usize) -> u64 {
    seed ^ (chunk as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Per-sample `(F, f̃_S for all S)` for the rows of one chunk.
fn chunk_values(
    f: &dyn MaskedFunction,
    full: Option<&dyn Model>,
    sampler: &dyn Sampler,
    range: std::ops::Range<usize>,
    seed: u64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let xs: Array2<f64> = sampler.sample(range.len(), chunk_seed(seed, range.start / CHUNK))?;
    let mut out = Vec::with_capacity(range.len());
    for row in xs.rows() {
        let x = row.to_vec();
        let p = mobius_purify(&set_function_table(f, &x)?);
        let big_f = match full {
            Some(m) => m.predict(&x)[0],
            None => set_sum(&p),
        };
        out.push((big_f, (0..(1u32 << p.d())).map(|b| p.scalar(FeatureSet::from_bits(b))).collect()));
    }
    Ok(out)
}

/// `Σ_S f̃_S(x) = f(x, [d])`.
fn set_sum(p: &PurifiedTable) -> f64 {
    (0..(1u32 << p.d())).map(|b| p.scalar(FeatureSet::from_bits(b))).sum()
}

/// Sobol indices `V_S = Var[f̃_S(X)]`, covariances `C_S = Cov[F, f̃_S]` and their standard errors.
///
/// `full` supplies `F`; when `None`, `F(x) = f(x, [d])`. Two passes over the same seeded
/// draws give centered moments without storing all samples.
pub fn sobol_report(
    f: &dyn MaskedFunction,
    full: Option<&dyn Model>,
    sampler: &dyn Sampler,
    n: usize,
    seed: u64,
) -> Result<SobolReport> {
    let d = f.dim();
    check_dim(d, sampler.dim())?;
    check_exhaustive(d)?;
    if d > 16 {
        return Err(Error::DimensionOutOfRange(d));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("Sobol estimation needs n >= 2".into()));
    }
    if let Some(m) = full {
        check_dim(d, m.dim())?;
    }
    let m = 1usize << d;
    let nf = n as f64;

    // pass 1: means
    let sums = map_chunks(n, CHUNK, |r| -> Result<(f64, Vec<f64>)> {
        let vals = chunk_values(f, full, sampler, r, seed)?;
        let mut sf = 0.0;
        let mut sa = vec![0.0; m];
        for (bf, a) in &vals {
            sf += bf;
            for (s, v) in sa.iter_mut().zip(a) {
                *s += v;
            }
        }
        Ok((sf, sa))
    });
    let mut mean_f = 0.0;
    let mut mean_a = vec![0.0; m];
    for part in sums {
        let (sf, sa) = part?;
        mean_f += sf;
        for (a, b) in mean_a.iter_mut().zip(sa) {
            *a += b;
        }
    }
    mean_f /= nf;
    mean_a.iter_mut().for_each(|a| *a /= nf);

    // pass 2: centered moments
    #[derive(Default, Clone)]
    struct Acc {
        a2: Vec<f64>,
        a4: Vec<f64>,
        fa: Vec<f64>,
        fa2: Vec<f64>,
        ua: Vec<f64>,
        ua2: Vec<f64>,
        f2: f64,
        f2_raw: f64,
        z: f64,
        z2: f64,
    }
    let new_acc = || Acc {
        a2: vec![0.0; m],
        a4: vec![0.0; m],
        fa: vec![0.0; m],
        fa2: vec![0.0; m],
        ua: vec![0.0; m],
        ua2: vec![0.0; m],
        ..Default::default()
    };
    let parts = map_chunks(n, CHUNK, |r| -> Result<Acc> {
        let vals = chunk_values(f, full, sampler, r, seed)?;
        let mut acc = new_acc();
        for (bf, a) in &vals {
            let fc = bf - mean_f;
            let mut z = -fc * fc;
            for s in 0..m {
                let ac = a[s] - mean_a[s];
                let a2 = ac * ac;
                acc.a2[s] += a2;
                acc.a4[s] += a2 * a2;
                acc.fa[s] += fc * ac;
                acc.fa2[s] += (fc * ac).powi(2);
                acc.ua[s] += bf * a[s];
                acc.ua2[s] += (bf * a[s]).powi(2);
                z += a2;
            }
            acc.f2 += fc * fc;
            acc.f2_raw += bf * bf;
            acc.z += z;
            acc.z2 += z * z;
        }
        Ok(acc)
    });
    let mut tot = new_acc();
    for part in parts {
        let p = part?;
        for s in 0..m {
            tot.a2[s] += p.a2[s];
            tot.a4[s] += p.a4[s];
            tot.fa[s] += p.fa[s];
            tot.fa2[s] += p.fa2[s];
            tot.ua[s] += p.ua[s];
            tot.ua2[s] += p.ua2[s];
        }
        tot.f2 += p.f2;
        tot.f2_raw += p.f2_raw;
        tot.z += p.z;
        tot.z2 += p.z2;
    }
    let se = |sum: f64, sum_sq: f64| -> f64 {
        let mean = sum / nf;
        ((sum_sq / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt()
    };
    let entries = (0..m)
        .map(|s| SobolEntry {
            subset: FeatureSet::from_bits(s as u32),
            v: tot.a2[s] / nf,
            v_se: se(tot.a2[s], tot.a4[s]),
            c: tot.fa[s] / nf,
            c_se: se(tot.fa[s], tot.fa2[s]),
            c_uncentered: tot.ua[s] / nf,
            c_uncentered_se: se(tot.ua[s], tot.ua2[s]),
        })
        .collect();
    let variance = tot.f2 / nf;
    if !(variance > 0.0) {
        return Err(Error::ZeroVariance("model output is constant over the sample".into()));
    }
    Ok(SobolReport {
        d,
        n,
        seed,
        entries,
        variance,
        second_moment: tot.f2_raw / nf,
        variance_gap: tot.z / nf,
        variance_gap_se: se(tot.z, tot.z2),
    })
}

/// Sobol indices with `F(x) = f(x, [d])`.
pub fn sobol_indices(f: &dyn MaskedFunction, sampler: &dyn Sampler, n: usize, seed: u64) -> Result<SobolReport> {
    sobol_report(f, None, sampler, n, seed)
}

/// Sobol covariances of an explicit full model `F` against the purified components of `f`.
pub fn sobol_covariances(full: &dyn Model, f: &dyn MaskedFunction, sampler: &dyn Sampler, n: usize, seed: u64) -> Result<SobolReport> {
    sobol_report(f, Some(full), sampler, n, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Synergy,
    Redundancy,
    None,
}

/// Synergy iff `V_S` is significant and `C_S > 0`; redundancy iff significant and `C_S < 0`.
///
/// Significance is `V_S > 3·SE(V_S)`.
pub fn classify_interaction(entry: &SobolEntry) -> InteractionKind {
    if entry.v <= 3.0 * entry.v_se || entry.v <= 0.0 {
        InteractionKind::None
    } else if entry.c > 0.0 {
        InteractionKind::Synergy
    } else if entry.c < 0.0 {
        InteractionKind::Redundancy
    } else {
        InteractionKind::None
    }
}

/// Exact purified components of a polynomial under the pairs world: `f̃_S = Σ_{W⊆S} (−1)^{|S∖W|} E[P | X_W]`.
pub fn purified_polynomials(p: &Polynomial, rho: f64) -> Result<Vec<Polynomial>> {
    let d = p.d();
    if d > 12 {
        return Err(Error::DimensionOutOfRange(d));
    }
    let cond: Vec<Polynomial> = (0..(1u32 << d))
        .map(|b| p.conditional_expectation(rho, FeatureSet::from_bits(b)))
        .collect();
    Ok((0..(1u32 << d))
        .map(|b| {
            let s = FeatureSet::from_bits(b);
            let mut acc = Polynomial::zero(d);
            for w in s.subsets() {
                let term = &cond[w.bits() as usize];
                acc = if (s.len() - w.len()) % 2 == 0 { acc.add(term) } else { acc.sub(term) };
            }
            acc.chop(1e-13)
        })
        .collect())
}

/// Conditional-expectation projections `M_T` over some function space.
pub trait ProjectionSpace {
    type Func: Clone;
    fn d(&self) -> usize;
    fn zero(&self) -> Self::Func;
    fn add(&self, a: &Self::Func, b: &Self::Func) -> Self::Func;
    fn sub(&self, a: &Self::Func, b: &Self::Func) -> Self::Func;
    /// `M_T f = E[f(X) | X_T]`.
    fn project(&self, t: FeatureSet, f: &Self::Func) -> Self::Func;
    fn mean(&self, f: &Self::Func) -> f64;
    fn mean_square(&self, f: &Self::Func) -> f64;
}

/// Exact projections of polynomials under the pairs world.
#[derive(Clone, Copy, Debug)]
pub struct PolynomialSpace {
    pub d: usize,
    pub rho: f64,
}

impl ProjectionSpace for PolynomialSpace {
    type Func = Polynomial;
    fn d(&self) -> usize {
        self.d
    }
    fn zero(&self) -> Polynomial {
        Polynomial::zero(self.d)
    }
    fn add(&self, a: &Polynomial, b: &Polynomial) -> Polynomial {
        a.add(b)
    }
    fn sub(&self, a: &Polynomial, b: &Polynomial) -> Polynomial {
        a.sub(b)
    }
    fn project(&self, t: FeatureSet, f: &Polynomial) -> Polynomial {
        f.conditional_expectation(self.rho, t).chop(1e-14)
    }
    fn mean(&self, f: &Polynomial) -> f64 {
        f.expectation(self.rho)
    }
    fn mean_square(&self, f: &Polynomial) -> f64 {
        f.mean_square(self.rho)
    }
}

/// Empirical projections on a fixed sample: `M_T` averages over the `k` nearest rows in the
/// standardized coordinates of `T`.
pub struct SampleSpace {
    x: Array2<f64>,
    k: usize,
    neighbors: std::collections::HashMap<FeatureSet, Vec<Vec<usize>>>,
}

impl SampleSpace {
    pub fn new(x: Array2<f64>, k: usize) -> Result<Self> {
        if x.nrows() == 0 || k == 0 {
            return Err(Error::InvalidParameter("sample space needs rows and k >= 1".into()));
        }
        let mut z = x;
        for mut col in z.columns_mut() {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let sd = if sd > 0.0 { sd } else { 1.0 };
            col.mapv_inplace(|v| (v - mean) / sd);
        }
        Ok(SampleSpace { x: z, k, neighbors: Default::default() })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds neighbor lists for every set in `sets` (required before projecting on them).
    pub fn prepare(&mut self, sets: &[FeatureSet]) {
        let n = self.x.nrows();
        let k = self.k.min(n);
        for &t in sets {
            if self.neighbors.contains_key(&t) || t.is_empty() || t == FeatureSet::full(self.x.ncols()) {
                continue;
            }
            let cols: Vec<usize> = t.indices().collect();
            let x = &self.x;
            let lists = crate::par::map_indices(n, |i| {
                let mut dist: Vec<(f64, usize)> = (0..n)
                    .map(|j| {
                        let d2: f64 = cols.iter().map(|&c| (x[(i, c)] - x[(j, c)]).powi(2)).sum();
                        (d2, j)
                    })
                    .collect();
                dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut idx: Vec<usize> = dist[..k].iter().map(|p| p.1).collect();
                idx.sort_unstable();
                idx
            });
            self.neighbors.insert(t, lists);
        }
    }
}

impl ProjectionSpace for SampleSpace {
    type Func = Vec<f64>;
    fn d(&self) -> usize {
        self.x.ncols()
    }
    fn zero(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }
    fn add(&self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }
    fn sub(&self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }
    fn project(&self, t: FeatureSet, f: &Vec<f64>) -> Vec<f64> {
        if t == FeatureSet::full(self.d()) {
            return f.clone();
        }
        if t.is_empty() {
            return vec![self.mean(f); f.len()];
        }
        let lists = self.neighbors.get(&t).expect("SampleSpace::prepare must cover every frontier set");
        lists.iter().map(|nb| nb.iter().map(|&j| f[j]).sum::<f64>() / nb.len() as f64).collect()
    }
    fn mean(&self, f: &Vec<f64>) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }
    fn mean_square(&self, f: &Vec<f64>) -> f64 {
        f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Cyclic updates using the freshest components.
    GaussSeidel,
    /// Simultaneous updates from the previous sweep.
    Jacobi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeumannConfig {
    pub max_sweeps: usize,
    /// Stop once the residual RMS changes by less than this between sweeps.
    pub tolerance: f64,
    pub order: SweepOrder,
}

impl Default for NeumannConfig {
    fn default() -> Self {
        NeumannConfig { max_sweeps: 100, tolerance: 1e-12, order: SweepOrder::GaussSeidel }
    }
}

/// Additive fit `F ≈ f_∅ + Σ_T g_T` over the maximal elements of a frontier.
#[derive(Clone, Debug)]
pub struct FrontierSolution<F> {
    pub frontier: Vec<FeatureSet>,
    pub intercept: f64,
    pub components: Vec<F>,
    /// Residual RMS `‖F − f_∅ − Σ g_T‖` after each sweep, starting with the initial value.
    pub residual_trace: Vec<f64>,
    pub converged: bool,
}

impl<F> FrontierSolution<F> {
    pub fn residual(&self) -> f64 {
        *self.residual_trace.last().expect("trace")
    }

    pub fn component(&self, t: FeatureSet) -> Option<&F> {
        self.frontier.iter().position(|s| *s == t).map(|i| &self.components[i])
    }
}

/// Keeps only sets not strictly contained in another member.
pub fn maximal_elements(frontier: &[FeatureSet]) -> Vec<FeatureSet> {
    let mut out: Vec<FeatureSet> = frontier
        .iter()
        .copied()
        .filter(|s| !s.is_empty())
        .filter(|s| !frontier.iter().any(|t| t != s && s.is_subset_of(*t)))
        .collect();
    out.sort_by_key(|s| (s.len(), s.bits()));
    out.dedup();
    out
}

/// Repeated conditional projections solving the stationarity equations
/// `M_{T_i}(F − Σ_j g_j) = 0` for the maximal frontier elements.
///
/// Non-convergence is reported through the trace and `converged`, never as an error.
pub fn neumann_frontier_solve<P: ProjectionSpace>(
    space: &P,
    target: &P::Func,
    frontier: &[FeatureSet],
    config: &NeumannConfig,
) -> Result<FrontierSolution<P::Func>> {
    let d = space.d();
    if let Some(s) = frontier.iter().find(|s| !s.fits(d)) {
        return Err(Error::InvalidParameter(format!("frontier set {s} exceeds d = {d}")));
    }
    let maximal = maximal_elements(frontier);
    let intercept = space.mean(target);
    let constant = space.project(FeatureSet::EMPTY, target);
    let centered = space.sub(target, &constant);
    let mut comps: Vec<P::Func> = maximal.iter().map(|_| space.zero()).collect();
    let residual_of = |comps: &[P::Func]| {
        let total = comps.iter().fold(space.zero(), |acc, g| space.add(&acc, g));
        space.sub(&centered, &total)
    };
    let mut trace = vec![space.mean_square(&centered).sqrt()];
    let mut converged = maximal.is_empty();
    for _ in 0..config.max_sweeps {
        if maximal.is_empty() {
            break;
        }
        match config.order {
            SweepOrder::GaussSeidel => {
                let mut resid = residual_of(&comps);
                for (i, t) in maximal.iter().enumerate() {
                    let partial = space.add(&resid, &comps[i]);
                    let updated = space.project(*t, &partial);
                    resid = space.sub(&partial, &updated);
                    comps[i] = updated;
                }
            }
            SweepOrder::Jacobi => {
                let resid = residual_of(&comps);
                comps = maximal
                    .iter()
                    .enumerate()
                    .map(|(i, t)| space.project(*t, &space.add(&resid, &comps[i])))
                    .collect();
            }
        }
        let r = space.mean_square(&residual_of(&comps)).max(0.0).sqrt();
        let prev = *trace.last().expect("trace");
        trace.push(r);
        if (prev - r).abs() <= config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(FrontierSolution { frontier: maximal, intercept, components: comps, residual_trace: trace, converged })
}
