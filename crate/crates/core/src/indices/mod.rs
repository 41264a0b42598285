//! Attribution and interaction-attribution indices over masked functions.

pub(crate) mod coefficients;

pub use coefficients::{bernoulli_numbers, index_coefficient, IndexFamily, Rational};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::masking::{set_function_table, MaskedFunction};
use crate::subset::{
    binomial, mobius_purify, shap_kernel_weights, shap_unif_weights, superset_sums, FeatureSet,
    PurifiedTable, SetFunctionTable,
};

/// Which attribution an [`AttributionResult`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionFamily {
    Shapley,
    Faith,
    Sii,
    Taylor,
    #[serde(rename = "nshap")]
    NShapley,
    Inclusion,
    Removal,
    Archipelago,
}

impl AttributionFamily {
    pub fn from_index_family(f: IndexFamily) -> Self {
        match f {
            IndexFamily::Sii => AttributionFamily::Sii,
            IndexFamily::Taylor => AttributionFamily::Taylor,
            IndexFamily::NShapley => AttributionFamily::NShapley,
            IndexFamily::Faith => AttributionFamily::Faith,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttributionFamily::Shapley => "shapley",
            AttributionFamily::Faith => "faith",
            AttributionFamily::Sii => "sii",
            AttributionFamily::Taylor => "taylor",
            AttributionFamily::NShapley => "nshap",
            AttributionFamily::Inclusion => "inclusion",
            AttributionFamily::Removal => "removal",
            AttributionFamily::Archipelago => "archipelago",
        }
    }
}

/// Provenance of an attribution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributionMeta {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Per-feature standard errors (Monte-Carlo estimators only), flattened feature-major.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<f64>>,
    /// `Σ φ − (f(x,[d]) − f(x,∅))`, max over outputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency_residual: Option<f64>,
}

/// Per-subset attribution values at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionResult {
    pub family: AttributionFamily,
    pub order: usize,
    pub d: usize,
    pub point: Vec<f64>,
    /// `f(x, ∅)`; empty when unknown.
    pub base_value: Vec<f64>,
    pub values: BTreeMap<FeatureSet, Vec<f64>>,
    pub meta: AttributionMeta,
}

#[derive(Serialize, Deserialize)]
struct AttributionEntry {
    subset: Vec<usize>,
    bits: u32,
    value: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AttributionJson {
    family: AttributionFamily,
    k: usize,
    d: usize,
    point: Vec<f64>,
    base_value: Vec<f64>,
    attributions: Vec<AttributionEntry>,
    meta: AttributionMeta,
}

impl AttributionResult {
    pub fn new(family: AttributionFamily, order: usize, point: &[f64], base_value: Vec<f64>, method: &str) -> Self {
        AttributionResult {
            family,
            order,
            d: point.len(),
            point: point.to_vec(),
            base_value,
            values: BTreeMap::new(),
            meta: AttributionMeta { method: method.to_string(), ..Default::default() },
        }
    }

    pub fn outputs(&self) -> usize {
        self.values.values().next().map_or(self.base_value.len(), Vec::len)
    }

    pub fn get(&self, s: FeatureSet) -> Option<&[f64]> {
        self.values.get(&s).map(Vec::as_slice)
    }

    /// Scalar value of output 0, zero for absent subsets.
    pub fn value(&self, s: FeatureSet) -> f64 {
        self.get(s).map_or(0.0, |v| v[0])
    }

    /// Singleton attributions `[φ_0, …, φ_{d−1}]` for output `channel`.
    pub fn feature_vector(&self, channel: usize) -> Vec<f64> {
        (0..self.d)
            .map(|i| self.get(FeatureSet::singleton(i)).map_or(0.0, |v| v[channel]))
            .collect()
    }

    /// Sum of all attributions per output.
    pub fn total(&self) -> Vec<f64> {
        let c = self.outputs();
        let mut acc = vec![0.0; c];
        for v in self.values.values() {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = AttributionJson {
            family: self.family,
            k: self.order,
            d: self.d,
            point: self.point.clone(),
            base_value: self.base_value.clone(),
            attributions: self
                .values
                .iter()
                .map(|(s, v)| AttributionEntry { subset: s.indices().collect(), bits: s.bits(), value: v.clone() })
                .collect(),
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AttributionJson = serde_json::from_str(text)?;
        Ok(AttributionResult {
            family: doc.family,
            order: doc.k,
            d: doc.d,
            point: doc.point,
            base_value: doc.base_value,
            values: doc
                .attributions
                .into_iter()
                .map(|e| (FeatureSet::from_bits(e.bits), e.value))
                .collect(),
            meta: doc.meta,
        })
    }

    fn record_efficiency(&mut self, table: &SetFunctionTable) {
        let full = table.get(FeatureSet::full(table.d()));
        let empty = table.get(FeatureSet::EMPTY);
        let total = self.total();
        let resid = total
            .iter()
            .zip(full.iter().zip(empty))
            .map(|(t, (f, e))| (t - (f - e)).abs())
            .fold(0.0, f64::max);
        self.meta.efficiency_residual = Some(resid);
    }
}

/// Writes a batch of results as flat CSV: `point,subset_bits,subset,size,output,value`.
pub fn write_attributions_csv<W: Write>(results: &[AttributionResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["point", "subset_bits", "subset", "size", "output", "value"])?;
    for (p, r) in results.iter().enumerate() {
        for (s, v) in &r.values {
            let members: Vec<String> = s.indices().map(|i| i.to_string()).collect();
            for (c, val) in v.iter().enumerate() {
                w.write_record([
                    p.to_string(),
                    s.bits().to_string(),
                    members.join(" "),
                    s.len().to_string(),
                    c.to_string(),
                    format!("{val:.17e}"),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn checked_table(f: &dyn MaskedFunction, x: &[f64]) -> Result<SetFunctionTable> {
    check_dim(f.dim(), x.len())?;
    set_function_table(f, x)
}

/// Exact Shapley values by summing over all subsets with uniform-Shapley weights.
pub fn shapley_exact(f: &dyn MaskedFunction, x: &[f64]) -> Result<AttributionResult> {
    let table = checked_table(f, x)?;
    shapley_from_table(&table, x)
}

/// Exact Shapley values of a precomputed set-function table.
pub fn shapley_from_table(table: &SetFunctionTable, x: &[f64]) -> Result<AttributionResult> {
    let d = table.d();
    let c = table.outputs();
    let weights = shap_unif_weights(d)?;
    let mut phi = vec![vec![0.0; c]; d];
    for b in 0..(1u32 << d) {
        let s = FeatureSet::from_bits(b);
        let w = weights.weight(s);
        for (i, phi_i) in phi.iter_mut().enumerate() {
            let hi = table.get(s.with(i));
            let lo = table.get(s.without(i));
            for k in 0..c {
                phi_i[k] += w * (hi[k] - lo[k]);
            }
        }
    }
    let mut res = AttributionResult::new(
        AttributionFamily::Shapley,
        1,
        x,
        table.get(FeatureSet::EMPTY).to_vec(),
        "enumeration",
    );
    for (i, v) in phi.into_iter().enumerate() {
        res.values.insert(FeatureSet::singleton(i), v);
    }
    res.record_efficiency(table);
    Ok(res)
}

/// Shapley values via unanimity games: `φ_i = Σ_{S∋i} f̃_S / |S|`.
pub fn shapley_from_purified(p: &PurifiedTable, x: &[f64]) -> AttributionResult {
    let d = p.d();
    let c = p.outputs();
    let mut phi = vec![vec![0.0; c]; d];
    for b in 1..(1u32 << d) {
        let s = FeatureSet::from_bits(b);
        let share = 1.0 / s.len() as f64;
        let v = p.get(s);
        for i in s.indices() {
            for k in 0..c {
                phi[i][k] += share * v[k];
            }
        }
    }
    let mut res = AttributionResult::new(
        AttributionFamily::Shapley,
        1,
        x,
        p.get(FeatureSet::EMPTY).to_vec(),
        "unanimity",
    );
    for (i, v) in phi.into_iter().enumerate() {
        res.values.insert(FeatureSet::singleton(i), v);
    }
    res
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Heap's algorithm over all permutations of `0..d`.
fn all_permutations(d: usize) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..d).collect();
    let mut out = vec![perm.clone()];
    let mut c = vec![0usize; d];
    let mut i = 0;
    while i < d {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            out.push(perm.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Monte-Carlo Shapley values from `m` random feature orderings.
///
/// When `m >= d!` (and `d <= 8`) every ordering is enumerated once and the result is exact.
pub fn shapley_permutation(f: &dyn MaskedFunction, x: &[f64], m: usize, seed: u64) -> Result<AttributionResult> {
    check_dim(f.dim(), x.len())?;
    if m == 0 {
        return Err(Error::InvalidParameter("permutation count must be >= 1".into()));
    }
    let d = f.dim();
    let c = f.outputs();
    let exhaustive = d <= 8 && m >= factorial(d);
    let perms: Vec<Vec<usize>> = if exhaustive {
        all_permutations(d)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut base: Vec<usize> = (0..d).collect();
        (0..m)
            .map(|_| {
                base.shuffle(&mut rng);
                base.clone()
            })
            .collect()
    };
    let n = perms.len();
    let mut sum = vec![0.0; d * c];
    let mut sum_sq = vec![0.0; d * c];
    let mut prev = vec![0.0; c];
    let mut cur = vec![0.0; c];
    f.eval_into(x, FeatureSet::EMPTY, &mut prev);
    let empty = prev.clone();
    for perm in &perms {
        let mut s = FeatureSet::EMPTY;
        prev.copy_from_slice(&empty);
        for &i in perm {
            s = s.with(i);
            f.eval_into(x, s, &mut cur);
            for k in 0..c {
                let delta = cur[k] - prev[k];
                sum[i * c + k] += delta;
                sum_sq[i * c + k] += delta * delta;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
    }
    let mut res = AttributionResult::new(AttributionFamily::Shapley, 1, x, empty, "permutation");
    let mut se = Vec::with_capacity(d * c);
    for i in 0..d {
        let mean: Vec<f64> = (0..c).map(|k| sum[i * c + k] / n as f64).collect();
        for k in 0..c {
            if exhaustive || n < 2 {
                se.push(0.0);
            } else {
                let var = (sum_sq[i * c + k] / n as f64 - mean[k] * mean[k]).max(0.0) * n as f64 / (n - 1) as f64;
                se.push((var / n as f64).sqrt());
            }
        }
        res.values.insert(FeatureSet::singleton(i), mean);
    }
    res.meta.samples = Some(n);
    res.meta.seed = if exhaustive { None } else { Some(seed) };
    res.meta.standard_errors = Some(se);
    Ok(res)
}

/// Solves the constrained weighted least squares
/// `min Σ_S w(S) (f(S) − f(∅) − Σ_{T⊆S} φ_T)²  s.t.  Σ_T φ_T = f([d]) − f(∅)`
/// over the basis `basis` (non-empty subsets), with Shapley-kernel weights on proper subsets.
/// Largest `2^d · m²` solved by QR on the weighted design rather than by normal equations.
const QR_BUDGET: f64 = 2e9;

/// Kernel-weighted least squares over `{1(T⊆S)}_{T∈basis}` with `Σ φ_T = f([d]) − f(∅)`.
///
/// Small problems go through QR on the design itself; the normal equations square its
/// conditioning, which costs about seven digits once `k` approaches `d`.
fn kernel_least_squares(table: &SetFunctionTable, basis: &[FeatureSet]) -> Result<Vec<Vec<f64>>> {
    let m = basis.len() as f64;
    if (1u64 << table.d()) as f64 * m * m <= QR_BUDGET {
        kernel_least_squares_qr(table, basis)
    } else {
        kernel_least_squares_normal(table, basis)
    }
}

/// Eliminates the constraint through the last basis set `P`:
/// `φ_P = Δ − Σ_{T≠P} φ_T`, leaving columns `1(T⊆S) − 1(P⊆S)`.
fn kernel_least_squares_qr(table: &SetFunctionTable, basis: &[FeatureSet]) -> Result<Vec<Vec<f64>>> {
    let d = table.d();
    let c = table.outputs();
    let w = shap_kernel_weights(d)?;
    let w = w.per_size();
    let m = basis.len();
    let pivot = basis[m - 1];
    let rows: Vec<FeatureSet> = (1..(1u32 << d) - 1).map(FeatureSet::from_bits).collect();
    let root: Vec<f64> = rows.iter().map(|s| w[s.len()].sqrt()).collect();
    let inside = |t: FeatureSet, s: FeatureSet| if t.is_subset_of(s) { 1.0 } else { 0.0 };
    let design = DMatrix::from_fn(rows.len(), m - 1, |r, q| root[r] * (inside(basis[q], rows[r]) - inside(pivot, rows[r])));
    let qr = design.qr();
    let r_factor = qr.r();
    let empty = table.get(FeatureSet::EMPTY).to_vec();
    let full = table.get(FeatureSet::full(d)).to_vec();
    let mut out = vec![vec![0.0; c]; m];
    for k in 0..c {
        let delta = full[k] - empty[k];
        let mut rhs = DVector::from_fn(rows.len(), |r, _| root[r] * (table.get(rows[r])[k] - empty[k] - inside(pivot, rows[r]) * delta));
        qr.q_tr_mul(&mut rhs);
        let y = r_factor
            .solve_upper_triangular(&rhs.rows(0, m - 1).into_owned())
            .ok_or_else(|| Error::Singular("kernel least-squares design is rank deficient".into()))?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("kernel least-squares produced non-finite values".into()));
        }
        for q in 0..m - 1 {
            out[q][k] = y[q];
        }
        out[m - 1][k] = delta - y.sum();
    }
    Ok(out)
}

fn kernel_least_squares_normal(table: &SetFunctionTable, basis: &[FeatureSet]) -> Result<Vec<Vec<f64>>> {
    let d = table.d();
    let c = table.outputs();
    let kernel = shap_kernel_weights(d)?;
    let w = kernel.per_size();
    // a[j] = Σ_{S ⊇ U, S proper} w(S) for |U| = j
    let a: Vec<f64> = (0..=d)
        .map(|j| (j.max(1)..d).map(|s| w[s] * binomial(d - j, s - j)).sum())
        .collect();
    let m = basis.len();
    let mut kkt = DMatrix::<f64>::zeros(m + 1, m + 1);
    for (r, t) in basis.iter().enumerate() {
        for (q, u) in basis.iter().enumerate() {
            kkt[(r, q)] = a[t.union(*u).len()];
        }
        kkt[(r, m)] = 1.0;
        kkt[(m, r)] = 1.0;
    }
    // Equilibrate rows/columns of the quadratic block so tiny kernel weights do not dominate pivoting.
    let scale: Vec<f64> = (0..m)
        .map(|r| if kkt[(r, r)] > 0.0 { 1.0 / kkt[(r, r)].sqrt() } else { 1.0 })
        .chain(std::iter::once(1.0))
        .collect();
    for r in 0..=m {
        for q in 0..=m {
            kkt[(r, q)] *= scale[r] * scale[q];
        }
    }
    let lu = kkt.lu();
    let empty = table.get(FeatureSet::EMPTY).to_vec();
    let full = table.get(FeatureSet::full(d)).to_vec();
    let mut out = vec![vec![0.0; c]; m];
    let mut g = vec![0.0; 1 << d];
    for k in 0..c {
        for (b, gv) in g.iter_mut().enumerate() {
            let s = FeatureSet::from_bits(b as u32);
            *gv = w[s.len()] * (table.get(s)[k] - empty[k]);
        }
        superset_sums(&mut g, d);
        let mut rhs = DVector::<f64>::zeros(m + 1);
        for (r, t) in basis.iter().enumerate() {
            rhs[r] = g[t.bits() as usize] * scale[r];
        }
        rhs[m] = full[k] - empty[k];
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("kernel least-squares normal equations".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("kernel least-squares produced non-finite values".into()));
        }
        for r in 0..m {
            out[r][k] = sol[r] * scale[r];
        }
    }
    Ok(out)
}

/// Shapley values as the Shapley-kernel weighted least-squares fit with pinned endpoints.
pub fn kernel_shap_ls(f: &dyn MaskedFunction, x: &[f64]) -> Result<AttributionResult> {
    let table = checked_table(f, x)?;
    kernel_shap_from_table(&table, x)
}

pub fn kernel_shap_from_table(table: &SetFunctionTable, x: &[f64]) -> Result<AttributionResult> {
    let d = table.d();
    let mut res = AttributionResult::new(
        AttributionFamily::Shapley,
        1,
        x,
        table.get(FeatureSet::EMPTY).to_vec(),
        "kernel_least_squares",
    );
    if d == 1 {
        let v: Vec<f64> = table
            .get(FeatureSet::full(1))
            .iter()
            .zip(table.get(FeatureSet::EMPTY))
            .map(|(a, b)| a - b)
            .collect();
        res.values.insert(FeatureSet::singleton(0), v);
        return Ok(res);
    }
    let basis: Vec<FeatureSet> = (0..d).map(FeatureSet::singleton).collect();
    let sol = kernel_least_squares(table, &basis)?;
    for (s, v) in basis.into_iter().zip(sol) {
        res.values.insert(s, v);
    }
    res.record_efficiency(table);
    Ok(res)
}

/// All non-empty subsets of `[d]` with at most `k` members, ordered by size then bitmask.
pub fn subsets_up_to(d: usize, k: usize) -> Vec<FeatureSet> {
    let mut out: Vec<FeatureSet> = (1..(1u32 << d))
        .map(FeatureSet::from_bits)
        .filter(|s| s.len() <= k)
        .collect();
    out.sort_by_key(|s| (s.len(), s.bits()));
    out
}

/// Faith-SHAP-k by solving the kernel least squares over `{1(T⊆S)}_{1≤|T|≤k}`.
pub fn faith_shap_exact(f: &dyn MaskedFunction, x: &[f64], k: usize) -> Result<AttributionResult> {
    let table = checked_table(f, x)?;
    faith_shap_from_table(&table, x, k)
}

pub fn faith_shap_from_table(table: &SetFunctionTable, x: &[f64], k: usize) -> Result<AttributionResult> {
    let d = table.d();
    if d > 20 {
        return Err(Error::DimensionOutOfRange(d));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!("Faith-SHAP order must be in 1..={d}, got {k}")));
    }
    let mut res = AttributionResult::new(
        AttributionFamily::Faith,
        k,
        x,
        table.get(FeatureSet::EMPTY).to_vec(),
        "kernel_least_squares",
    );
    let basis = subsets_up_to(d, k);
    if d == 1 {
        return Ok(kernel_shap_from_table(table, x)?.retag(AttributionFamily::Faith, 1));
    }
    let sol = kernel_least_squares(table, &basis)?;
    for (s, v) in basis.into_iter().zip(sol) {
        res.values.insert(s, v);
    }
    res.record_efficiency(table);
    Ok(res)
}

impl AttributionResult {
    fn retag(mut self, family: AttributionFamily, order: usize) -> Self {
        self.family = family;
        self.order = order;
        self
    }
}

/// Interaction indices of order `k` from a purified table via the family's coefficient rule.
pub fn mobius_to_index(p: &PurifiedTable, family: IndexFamily, k: usize, x: &[f64]) -> Result<AttributionResult> {
    let d = p.d();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!("order must be in 1..={d}, got {k}")));
    }
    let c = p.outputs();
    let coef = coefficients::coefficient_grid(family, k, d);
    let full = FeatureSet::full(d);
    let mut res = AttributionResult::new(
        AttributionFamily::from_index_family(family),
        k,
        x,
        p.get(FeatureSet::EMPTY).to_vec(),
        "mobius",
    );
    for s in subsets_up_to(d, k) {
        let row = &coef[s.len()];
        let mut acc = vec![0.0; c];
        for extra in full.difference(s).subsets() {
            let t = s.union(extra);
            let w = row[t.len()];
            if w != 0.0 {
                for (a, v) in acc.iter_mut().zip(p.get(t)) {
                    *a += w * v;
                }
            }
        }
        res.values.insert(s, acc);
    }
    Ok(res)
}

/// Inclusion, removal and Archipelago interaction values of `s` at `x`.
pub struct SimpleIndices {
    pub inclusion: Vec<f64>,
    pub removal: Vec<f64>,
    pub archipelago: Vec<f64>,
}

/// `δ_S f` at `∅` (inclusion), at `[d]` (removal), and their mean (Archipelago).
pub fn simple_indices(f: &dyn MaskedFunction, x: &[f64], s: FeatureSet) -> Result<SimpleIndices> {
    check_dim(f.dim(), x.len())?;
    let d = f.dim();
    if s.is_empty() || !s.fits(d) {
        return Err(Error::InvalidParameter(format!("subset {s} must be non-empty and within [d]")));
    }
    let c = f.outputs();
    let mut inclusion = vec![0.0; c];
    let mut removal = vec![0.0; c];
    let mut buf = vec![0.0; c];
    let rest = FeatureSet::full(d).difference(s);
    for w in s.subsets() {
        let sign = if (s.len() - w.len()) % 2 == 0 { 1.0 } else { -1.0 };
        f.eval_into(x, w, &mut buf);
        for k in 0..c {
            inclusion[k] += sign * buf[k];
        }
        f.eval_into(x, rest.union(w), &mut buf);
        for k in 0..c {
            removal[k] += sign * buf[k];
        }
    }
    let archipelago = inclusion.iter().zip(&removal).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(SimpleIndices { inclusion, removal, archipelago })
}

/// Purified table of `f` at `x` (the Möbius transform of its subset table).
pub fn purified_at(f: &dyn MaskedFunction, x: &[f64]) -> Result<PurifiedTable> {
    Ok(mobius_purify(&checked_table(f, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::TableGame;
    use rand::Rng;

    fn random_game(d: usize, seed: u64) -> TableGame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = SetFunctionTable::from_fn(d, |_| rng.random_range(-2.0..2.0)).unwrap();
        TableGame::new(t)
    }

    fn unanimity(d: usize, t: FeatureSet) -> TableGame {
        TableGame::new(SetFunctionTable::from_fn(d, |s| if t.is_subset_of(s) { 1.0 } else { 0.0 }).unwrap())
    }

    /// Classic closed form `Σ_{S⊆[d]−i} |S|!(d−|S|−1)!/d! [f(S+i) − f(S)]`.
    fn shapley_classic(table: &SetFunctionTable, i: usize) -> f64 {
        let d = table.d();
        let mut acc = 0.0;
        for b in 0..(1u32 << d) {
            let s = FeatureSet::from_bits(b);
            if s.contains(i) {
                continue;
            }
            let w = 1.0 / (d as f64 * binomial(d - 1, s.len()));
            acc += w * (table.scalar(s.with(i)) - table.scalar(s));
        }
        acc
    }

    #[test]
    fn unanimity_game_splits_evenly() {
        let t = FeatureSet::from_indices(&[1, 3, 4]);
        let g = unanimity(6, t);
        let x = vec![0.0; 6];
        let phi = shapley_exact(&g, &x).unwrap();
        for i in 0..6 {
            let expect = if t.contains(i) { 1.0 / 3.0 } else { 0.0 };
            assert!((phi.value(FeatureSet::singleton(i)) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_game_returns_coefficients() {
        let a = [0.5, -1.0, 2.0, 0.25];
        let g = TableGame::new(
            SetFunctionTable::from_fn(4, |s| s.indices().map(|i| a[i]).sum()).unwrap(),
        );
        let phi = shapley_exact(&g, &[0.0; 4]).unwrap();
        for (i, ai) in a.iter().enumerate() {
            assert!((phi.value(FeatureSet::singleton(i)) - ai).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_sum_matches_classic_formula() {
        for d in 1..=9 {
            let g = random_game(d, d as u64);
            let x = vec![0.0; d];
            let phi = shapley_exact(&g, &x).unwrap();
            for i in 0..d {
                let classic = shapley_classic(g.table(), i);
                assert!((phi.value(FeatureSet::singleton(i)) - classic).abs() < 1e-12);
            }
            assert!(phi.meta.efficiency_residual.unwrap() < 1e-10);
        }
    }

    #[test]
    fn unanimity_route_and_kernel_route_agree() {
        for trial in 0..100 {
            let d = 1 + trial % 10;
            let g = random_game(d, 1000 + trial as u64);
            let x = vec![0.0; d];
            let exact = shapley_exact(&g, &x).unwrap();
            let via_p = shapley_from_purified(&mobius_purify(g.table()), &x);
            let ls = kernel_shap_ls(&g, &x).unwrap();
            for i in 0..d {
                let s = FeatureSet::singleton(i);
                assert!((exact.value(s) - via_p.value(s)).abs() < 1e-10);
                assert!((exact.value(s) - ls.value(s)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn singleton_only_purified_table() {
        let vals = [0.0, 1.5, -2.0, 0.0, 4.0, 0.0, 0.0, 0.0];
        let p = PurifiedTable::from_table(SetFunctionTable::new(3, 1, vals.to_vec()).unwrap());
        let phi = shapley_from_purified(&p, &[0.0; 3]);
        assert_eq!(phi.feature_vector(0), vec![1.5, -2.0, 4.0]);
    }

    #[test]
    fn symmetric_game_equal_attributions() {
        let g = TableGame::new(SetFunctionTable::from_fn(5, |s| (s.len() as f64).powi(2)).unwrap());
        let phi = kernel_shap_ls(&g, &[0.0; 5]).unwrap().feature_vector(0);
        for v in &phi {
            assert!((v - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_estimator_exhaustive_and_reproducible() {
        let g = random_game(5, 77);
        let x = vec![0.0; 5];
        let exact = shapley_exact(&g, &x).unwrap();
        let all = shapley_permutation(&g, &x, 120, 0).unwrap();
        for i in 0..5 {
            let s = FeatureSet::singleton(i);
            assert!((all.value(s) - exact.value(s)).abs() < 1e-12);
        }
        let a = shapley_permutation(&g, &x, 37, 9).unwrap();
        let b = shapley_permutation(&g, &x, 37, 9).unwrap();
        assert_eq!(a, b);
        // efficiency holds for every sampled ordering
        let total: f64 = a.feature_vector(0).iter().sum();
        let full = g.table().scalar(FeatureSet::full(5)) - g.table().scalar(FeatureSet::EMPTY);
        assert!((total - full).abs() < 1e-12);
    }

    #[test]
    fn permutation_estimator_unbiased_within_se() {
        let g = random_game(8, 5);
        let x = vec![0.0; 8];
        let exact = shapley_exact(&g, &x).unwrap().feature_vector(0);
        let reps = 30;
        let mut means = vec![0.0; 8];
        let mut se2 = vec![0.0; 8];
        for r in 0..reps {
            let est = shapley_permutation(&g, &x, 200, r).unwrap();
            let se = est.meta.standard_errors.clone().unwrap();
            for i in 0..8 {
                means[i] += est.value(FeatureSet::singleton(i)) / reps as f64;
                se2[i] += se[i] * se[i] / (reps * reps) as f64;
            }
        }
        for i in 0..8 {
            assert!((means[i] - exact[i]).abs() < 3.0 * se2[i].sqrt() + 1e-12, "feature {i}");
        }
    }

    #[test]
    fn faith_order_one_is_shapley_and_full_order_is_mobius() {
        for seed in 0..10u64 {
            let d = 2 + (seed as usize % 6);
            let g = random_game(d, 50 + seed);
            let x = vec![0.0; d];
            let sh = shapley_exact(&g, &x).unwrap();
            let f1 = faith_shap_exact(&g, &x, 1).unwrap();
            for i in 0..d {
                let s = FeatureSet::singleton(i);
                assert!((sh.value(s) - f1.value(s)).abs() < 1e-8);
            }
            let fd = faith_shap_exact(&g, &x, d).unwrap();
            let p = mobius_purify(g.table());
            for b in 1..(1u32 << d) {
                let s = FeatureSet::from_bits(b);
                assert!((fd.value(s) - p.scalar(s)).abs() < 1e-8, "d={d} s={s}");
            }
        }
    }

    #[test]
    fn faith_least_squares_matches_mobius_formula() {
        let g = random_game(6, 4242);
        let x = vec![0.0; 6];
        let ls = faith_shap_exact(&g, &x, 2).unwrap();
        let mob = mobius_to_index(&mobius_purify(g.table()), IndexFamily::Faith, 2, &x).unwrap();
        for (s, v) in &ls.values {
            assert!((v[0] - mob.value(*s)).abs() < 1e-8, "{s}");
        }
    }

    #[test]
    fn mobius_to_index_edge_cases() {
        let x = vec![0.0; 4];
        let zero = PurifiedTable::from_table(SetFunctionTable::from_fn(4, |_| 0.0).unwrap());
        for fam in IndexFamily::ALL {
            let r = mobius_to_index(&zero, fam, 2, &x).unwrap();
            assert!(r.values.values().all(|v| v[0] == 0.0));
        }
        let g = random_game(4, 8);
        let p = mobius_purify(g.table());
        let sii = mobius_to_index(&p, IndexFamily::Sii, 1, &x).unwrap();
        let sh = shapley_exact(&g, &x).unwrap();
        for i in 0..4 {
            let s = FeatureSet::singleton(i);
            assert!((sii.value(s) - sh.value(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_indices_examples() {
        let additive = TableGame::new(SetFunctionTable::from_fn(4, |s| s.indices().map(|i| i as f64 + 1.0).sum()).unwrap());
        let x = vec![0.0; 4];
        let pair = FeatureSet::from_indices(&[0, 2]);
        let si = simple_indices(&additive, &x, pair).unwrap();
        assert!(si.inclusion[0].abs() < 1e-12 && si.removal[0].abs() < 1e-12);

        let t = FeatureSet::from_indices(&[1, 2]);
        let u = unanimity(4, t);
        let si = simple_indices(&u, &x, t).unwrap();
        assert_eq!(si.inclusion[0], 1.0);
        assert_eq!(si.removal[0], 1.0);

        let g = random_game(4, 3);
        let si = simple_indices(&g, &x, pair).unwrap();
        assert_eq!(si.archipelago[0], 0.5 * (si.inclusion[0] + si.removal[0]));
        assert!(simple_indices(&g, &x, FeatureSet::EMPTY).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = random_game(3, 1);
        let r = faith_shap_exact(&g, &[0.1, 0.2, 0.3], 2).unwrap();
        let back = AttributionResult::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let mut buf = Vec::new();
        write_attributions_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("point,subset_bits,subset,size,output,value"));
        assert_eq!(text.lines().count(), 1 + 6);
    }
}
