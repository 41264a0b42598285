//! Piecewise-multilinear shape functions on per-dimension knot grids.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSpec};
use crate::error::{Error, Result};
use crate::subset::FeatureSet;

/// Largest tuple size a tensor basis may span.
pub const MAX_SHAPE_ORDER: usize = 5;

/// One input dimension of a shape function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AxisBasis {
    /// Hat functions on sorted knots, extrapolated linearly past both ends.
    Linear { knots: Vec<f64> },
    /// Indicator per level.
    OneHot { levels: usize },
}

impl AxisBasis {
    pub fn size(&self) -> usize {
        match self {
            AxisBasis::Linear { knots } => knots.len(),
            AxisBasis::OneHot { levels } => *levels,
        }
    }

    /// Up to two `(index, weight)` pairs whose weighted sum of coefficients interpolates at `v`.
    pub fn active(&self, v: f64) -> [(usize, f64); 2] {
        match self {
            AxisBasis::OneHot { levels } => {
                let idx = if v.is_finite() && v >= 0.0 { (v.round() as usize).min(levels - 1) } else { 0 };
                [(idx, 1.0), (idx, 0.0)]
            }
            AxisBasis::Linear { knots } => {
                let n = knots.len();
                if n == 1 {
                    return [(0, 1.0), (0, 0.0)];
                }
                // segment j covers [knots[j], knots[j+1]]; outer segments extend to infinity
                let j = match knots.partition_point(|k| *k <= v) {
                    0 => 0,
                    p if p >= n => n - 2,
                    p => p - 1,
                };
                let t = (v - knots[j]) / (knots[j + 1] - knots[j]);
                [(j, 1.0 - t), (j + 1, t)]
            }
        }
    }

    /// Evenly spaced probe values across the knot range (or all levels).
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match self {
            AxisBasis::OneHot { levels } => (0..*levels).map(|l| l as f64).collect(),
            AxisBasis::Linear { knots } => {
                let (lo, hi) = (knots[0], knots[knots.len() - 1]);
                if points < 2 || hi <= lo {
                    return vec![lo];
                }
                (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
            }
        }
    }
}

/// `φ_T(x_T)`: a tensor-product basis over the members of `T` with `c` outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub subset: FeatureSet,
    pub axes: Vec<AxisBasis>,
    pub outputs: usize,
    /// Row-major over the axes (first axis slowest), then outputs.
    pub coefficients: Vec<f64>,
}

impl ShapeFunction {
    pub fn new(subset: FeatureSet, axes: Vec<AxisBasis>, outputs: usize) -> Result<Self> {
        if subset.is_empty() || subset.len() != axes.len() {
            return Err(Error::InvalidParameter(format!("shape for {subset} needs one axis per member")));
        }
        if subset.len() > MAX_SHAPE_ORDER {
            return Err(Error::InvalidParameter(format!(
                "tensor bases support tuples of at most {MAX_SHAPE_ORDER} features, got {subset}"
            )));
        }
        let size: usize = axes.iter().map(AxisBasis::size).product();
        Ok(ShapeFunction { subset, axes, outputs, coefficients: vec![0.0; size * outputs] })
    }

    pub fn basis_size(&self) -> usize {
        self.axes.iter().map(AxisBasis::size).product()
    }

    /// Calls `visit(flat_basis_index, weight)` for every active tensor basis entry at `x`.
    pub fn for_each_active(&self, x: &[f64], mut visit: impl FnMut(usize, f64)) {
        let members: Vec<usize> = self.subset.indices().collect();
        let per_axis: Vec<[(usize, f64); 2]> = members.iter().zip(&self.axes).map(|(&i, a)| a.active(x[i])).collect();
        let m = members.len();
        for combo in 0..(1usize << m) {
            let mut idx = 0;
            let mut w = 1.0;
            for (a, act) in per_axis.iter().enumerate() {
                let (i, wi) = act[(combo >> a) & 1];
                idx = idx * self.axes[a].size() + i;
                w *= wi;
            }
            if w != 0.0 {
                visit(idx, w);
            }
        }
    }

    /// Adds `φ_T(x_T)` into `out`.
    pub fn add_into(&self, x: &[f64], out: &mut [f64]) {
        let c = self.outputs;
        self.for_each_active(x, |idx, w| {
            for k in 0..c {
                out[k] += w * self.coefficients[idx * c + k];
            }
        });
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        self.add_into(x, &mut out);
        out
    }
}

/// Knot budget per tuple size and feature kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    /// `knots_by_order[s−1]` knots per axis for tuples of size `s`.
    pub knots_by_order: Vec<usize>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig { knots_by_order: vec![32, 16, 6, 4, 3] }
    }
}

impl BasisConfig {
    pub fn knots_for(&self, order: usize) -> usize {
        let last = *self.knots_by_order.last().unwrap_or(&2);
        self.knots_by_order.get(order.saturating_sub(1)).copied().unwrap_or(last).max(1)
    }
}

/// Share of each tail left outside the outermost knots.
pub const KNOT_TRIM: f64 = 0.005;

/// Knots halfway between evenly spaced quantiles and evenly spaced values, both spanning the
/// `KNOT_TRIM` to `1 − KNOT_TRIM` quantile range, deduplicated.
///
/// Pure quantile knots leave the tails coarse where curved shapes need them, and pure even
/// spacing wastes knots on skewed columns; the blend keeps every gap at most half of either.
/// Trimming keeps a lone outlier from stretching the last cell while the outer knots still sit
/// near the data's edge, so little mass relies on the linear extrapolation.
pub fn quantile_knots(values: &[f64], count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return vec![0.0];
    }
    v.sort_by(f64::total_cmp);
    let count = count.max(1);
    let quantile = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let mut knots: Vec<f64> = if count == 1 {
        vec![quantile(0.5)]
    } else {
        let (lo, hi) = (quantile(KNOT_TRIM), quantile(1.0 - KNOT_TRIM));
        (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                0.5 * (quantile(KNOT_TRIM + (1.0 - 2.0 * KNOT_TRIM) * t) + lo + (hi - lo) * t)
            })
            .collect()
    };
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    knots
}

/// Builds zero-initialized shapes for every non-empty frontier set from the data's quantiles.
pub fn build_shapes(
    frontier: &[FeatureSet],
    x: &Array2<f64>,
    features: Option<&[FeatureSpec]>,
    outputs: usize,
    config: &BasisConfig,
) -> Result<Vec<ShapeFunction>> {
    let d = x.ncols();
    let mut sets: Vec<FeatureSet> = frontier.iter().copied().filter(|s| !s.is_empty()).collect();
    sets.sort_by_key(|s| (s.len(), s.bits()));
    sets.dedup();
    if let Some(s) = sets.iter().find(|s| !s.fits(d)) {
        return Err(Error::InvalidParameter(format!("frontier set {s} exceeds d = {d}")));
    }
    let columns: Vec<Vec<f64>> = (0..d).map(|j| x.column(j).to_vec()).collect();
    let axis = |j: usize, order: usize| -> AxisBasis {
        if let Some(FeatureKind::Categorical { levels }) = features.map(|f| &f[j].kind) {
            AxisBasis::OneHot { levels: levels.len().max(1) }
        } else {
            AxisBasis::Linear { knots: quantile_knots(&columns[j], config.knots_for(order)) }
        }
    };
    sets.into_iter()
        .map(|s| ShapeFunction::new(s, s.indices().map(|j| axis(j, s.len())).collect(), outputs))
        .collect()
}
