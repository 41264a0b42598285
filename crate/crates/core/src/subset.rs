//! Exact set-function algebra over the powerset of `d` features.
//!
//! Subsets are bitmasks: feature `i` (zero-based) is bit `i`. All exhaustive
//! routines are capped at [`MAX_EXHAUSTIVE_D`] features.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Largest feature count accepted by routines that enumerate all `2^d` subsets.
pub const MAX_EXHAUSTIVE_D: usize = 25;

/// A subset of `[d]` stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSet(u32);

impl FeatureSet {
    pub const EMPTY: FeatureSet = FeatureSet(0);

    pub const fn from_bits(bits: u32) -> Self {
        FeatureSet(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn full(d: usize) -> Self {
        debug_assert!(d <= 31);
        FeatureSet(((1u64 << d) - 1) as u32)
    }

    pub fn singleton(i: usize) -> Self {
        FeatureSet(1 << i)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        FeatureSet(indices.iter().fold(0, |acc, &i| acc | (1 << i)))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        FeatureSet(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        FeatureSet(self.0 & !(1 << i))
    }

    pub fn union(self, other: Self) -> Self {
        FeatureSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        FeatureSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        FeatureSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// True when every member is below `d`.
    pub fn fits(self, d: usize) -> bool {
        d >= 32 || self.0 >> d == 0
    }

    /// Member indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    /// All subsets of `self`, including the empty set and `self`, in increasing bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = FeatureSet> {
        let mask = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == mask {
                None
            } else {
                Some((cur.wrapping_sub(mask)) & mask)
            };
            Some(FeatureSet(cur))
        })
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub(crate) fn check_exhaustive(d: usize) -> Result<()> {
    if d == 0 || d > MAX_EXHAUSTIVE_D {
        return Err(Error::DimensionOutOfRange(d));
    }
    Ok(())
}

/// Binomial coefficient as a float. Exact for the ranges used here (n ≤ 60).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc.round()
}

/// Binomial coefficient in exact integer arithmetic.
pub fn binomial_exact(n: u64, k: u64) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as i128 / (j + 1) as i128;
    }
    acc
}

/// Dense table of an output vector per subset, indexed by bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct SetFunctionTable {
    d: usize,
    c: usize,
    values: Vec<f64>,
}

impl SetFunctionTable {
    pub fn new(d: usize, c: usize, values: Vec<f64>) -> Result<Self> {
        check_exhaustive(d)?;
        if c == 0 || values.len() != (1usize << d) * c {
            return Err(Error::InvalidParameter(format!(
                "table for d={d}, c={c} needs {} values, got {}",
                (1usize << d) * c,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("table contains non-finite values".into()));
        }
        Ok(SetFunctionTable { d, c, values })
    }

    /// Builds a scalar table from a function of the subset.
    pub fn from_fn(d: usize, mut f: impl FnMut(FeatureSet) -> f64) -> Result<Self> {
        check_exhaustive(d)?;
        let values = (0..1u32 << d).map(|b| f(FeatureSet(b))).collect();
        SetFunctionTable::new(d, 1, values)
    }

    pub(crate) fn from_raw(d: usize, c: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), (1usize << d) * c);
        SetFunctionTable { d, c, values }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn outputs(&self) -> usize {
        self.c
    }

    pub fn get(&self, s: FeatureSet) -> &[f64] {
        let start = s.bits() as usize * self.c;
        &self.values[start..start + self.c]
    }

    /// Scalar view for single-output tables.
    pub fn scalar(&self, s: FeatureSet) -> f64 {
        self.values[s.bits() as usize * self.c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Möbius coefficients `f̃_S` of a set function (pointwise purified effects).
#[derive(Clone, Debug, PartialEq)]
pub struct PurifiedTable(SetFunctionTable);

impl PurifiedTable {
    pub fn from_table(table: SetFunctionTable) -> Self {
        PurifiedTable(table)
    }

    pub fn d(&self) -> usize {
        self.0.d
    }

    pub fn outputs(&self) -> usize {
        self.0.c
    }

    pub fn get(&self, s: FeatureSet) -> &[f64] {
        self.0.get(s)
    }

    pub fn scalar(&self, s: FeatureSet) -> f64 {
        self.0.scalar(s)
    }

    pub fn table(&self) -> &SetFunctionTable {
        &self.0
    }
}

/// Per-size subset weights; every subset of size `s` carries `per_size[s]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    d: usize,
    per_size: Vec<f64>,
    normalized: bool,
}

impl WeightTable {
    /// Normalizes so the weights of all `2^d` subsets sum to one.
    pub fn from_per_size(d: usize, per_size: Vec<f64>) -> Result<Self> {
        if per_size.len() != d + 1 || per_size.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("per-size weights must be finite and non-negative".into()));
        }
        let total: f64 = per_size.iter().enumerate().map(|(s, w)| binomial(d, s) * w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        Ok(WeightTable {
            d,
            per_size: per_size.into_iter().map(|w| w / total).collect(),
            normalized: true,
        })
    }

    /// All mass on the full set `[d]`.
    pub fn full_mask(d: usize) -> Self {
        let mut per_size = vec![0.0; d + 1];
        per_size[d] = 1.0;
        WeightTable { d, per_size, normalized: true }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn per_size(&self) -> &[f64] {
        &self.per_size
    }

    pub fn weight(&self, s: FeatureSet) -> f64 {
        self.per_size[s.len()]
    }

    /// Probability that a draw has size `s`.
    pub fn size_probabilities(&self) -> Vec<f64> {
        self.per_size
            .iter()
            .enumerate()
            .map(|(s, w)| binomial(self.d, s) * w)
            .collect()
    }

    /// Sum of all per-subset weights (1 for normalized tables).
    pub fn total(&self) -> f64 {
        self.size_probabilities().iter().sum()
    }
}

/// The uniform Shapley distribution: weight ∝ C(d,s)^{-1} / (d+1).
pub fn shap_unif_weights(d: usize) -> Result<WeightTable> {
    check_exhaustive(d)?;
    let per_size = (0..=d).map(|s| 1.0 / (binomial(d, s) * (d + 1) as f64)).collect();
    WeightTable::from_per_size(d, per_size)
}

/// The Shapley kernel: weight ∝ C(d,s)^{-1} / (s (d−s)) on proper, non-empty subsets.
///
/// The endpoints `∅` and `[d]` carry zero weight; consumers pin them with constraints.
pub fn shap_kernel_weights(d: usize) -> Result<WeightTable> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("Shapley kernel needs d >= 2, got {d}")));
    }
    check_exhaustive(d)?;
    let per_size = (0..=d)
        .map(|s| {
            if s == 0 || s == d {
                0.0
            } else {
                1.0 / (binomial(d, s) * (s * (d - s)) as f64)
            }
        })
        .collect();
    WeightTable::from_per_size(d, per_size)
}

/// `[δ_S f](T) = Σ_{W⊆S} (−1)^{|S|−|W|} f((T∖S) ∪ W)`.
pub fn discrete_derivative(table: &SetFunctionTable, s: FeatureSet, t: FeatureSet) -> Vec<f64> {
    let base = t.difference(s);
    let mut out = vec![0.0; table.c];
    for w in s.subsets() {
        let sign = if (s.len() - w.len()) % 2 == 0 { 1.0 } else { -1.0 };
        for (o, v) in out.iter_mut().zip(table.get(base.union(w))) {
            *o += sign * v;
        }
    }
    out
}

fn for_each_bit_pair(values: &mut [f64], d: usize, c: usize, mut op: impl FnMut(f64, &mut f64)) {
    for bit in 0..d {
        let step = 1usize << bit;
        for base in 0..(1usize << d) {
            if base & step == 0 {
                let hi = base | step;
                for k in 0..c {
                    let lo_val = values[base * c + k];
                    op(lo_val, &mut values[hi * c + k]);
                }
            }
        }
    }
}

/// Möbius (purification) transform: `f̃(S) = Σ_{W⊆S} (−1)^{|S|−|W|} f(W)`.
pub fn mobius_purify(table: &SetFunctionTable) -> PurifiedTable {
    let mut values = table.values.clone();
    for_each_bit_pair(&mut values, table.d, table.c, |lo, hi| *hi -= lo);
    PurifiedTable(SetFunctionTable::from_raw(table.d, table.c, values))
}

/// Zeta transform, the inverse of [`mobius_purify`]: `f(S) = Σ_{T⊆S} f̃(T)`.
pub fn zeta_transform(purified: &PurifiedTable) -> SetFunctionTable {
    let t = &purified.0;
    let mut values = t.values.clone();
    for_each_bit_pair(&mut values, t.d, t.c, |lo, hi| *hi += lo);
    SetFunctionTable::from_raw(t.d, t.c, values)
}

/// Superset sums `g(S) = Σ_{T⊇S} f(T)` over a flat single-output array of length `2^d`.
pub(crate) fn superset_sums(values: &mut [f64], d: usize) {
    for bit in 0..d {
        let step = 1usize << bit;
        for base in 0..(1usize << d) {
            if base & step == 0 {
                values[base] += values[base | step];
            }
        }
    }
}
