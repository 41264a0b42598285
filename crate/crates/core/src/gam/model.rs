use serde::{Deserialize, Serialize};
use std::io::Write;

use super::basis::ShapeFunction;
use crate::error::{check_dim, Error, Result};
use crate::masking::{MaskedFunction, Model, RemovalMode};
use crate::subset::FeatureSet;

/// Which objective produced a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Unmasked regression of the full prediction.
    Vanilla,
    /// Masked regression under the Shapley kernel; shapes self-purify.
    Instashap,
    FastShap,
    FastFaith,
}

/// Training provenance stored with a model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    pub loss_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_mse: Option<f64>,
}

/// `f_∅ + Σ_{T∈𝓘} φ_T(x_T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModel {
    pub d: usize,
    pub outputs: usize,
    pub intercept: Vec<f64>,
    pub shapes: Vec<ShapeFunction>,
    pub objective: Objective,
    pub meta: TrainingMeta,
}

impl AdditiveModel {
    pub fn new(d: usize, outputs: usize, shapes: Vec<ShapeFunction>, objective: Objective) -> Result<Self> {
        for s in &shapes {
            if !s.subset.fits(d) || s.outputs != outputs {
                return Err(Error::InvalidParameter(format!("shape {} incompatible with d={d}, c={outputs}", s.subset)));
            }
        }
        let mut sets: Vec<FeatureSet> = shapes.iter().map(|s| s.subset).collect();
        sets.sort();
        if sets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate frontier sets".into()));
        }
        Ok(AdditiveModel { d, outputs, intercept: vec![0.0; outputs], shapes, objective, meta: TrainingMeta::default() })
    }

    /// The frontier, including `∅`.
    pub fn frontier(&self) -> Vec<FeatureSet> {
        std::iter::once(FeatureSet::EMPTY).chain(self.shapes.iter().map(|s| s.subset)).collect()
    }

    pub fn shape(&self, t: FeatureSet) -> Option<&ShapeFunction> {
        self.shapes.iter().find(|s| s.subset == t)
    }

    pub fn max_order(&self) -> usize {
        self.shapes.iter().map(|s| s.subset.len()).max().unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.outputs + self.shapes.iter().map(|s| s.coefficients.len()).sum::<usize>()
    }

    /// `f_∅ + Σ_{T∈𝓘, T⊆S} φ_T(x_T)`.
    pub fn predict_masked_into(&self, x: &[f64], s: FeatureSet, out: &mut [f64]) {
        out.copy_from_slice(&self.intercept);
        for shape in &self.shapes {
            if shape.subset.is_subset_of(s) {
                shape.add_into(x, out);
            }
        }
    }

    pub fn predict_masked(&self, x: &[f64], s: FeatureSet) -> Result<Vec<f64>> {
        check_dim(self.d, x.len())?;
        if !s.fits(self.d) {
            return Err(Error::InvalidParameter(format!("mask {s} exceeds d = {}", self.d)));
        }
        let mut out = vec![0.0; self.outputs];
        self.predict_masked_into(x, s, &mut out);
        Ok(out)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict_masked(x, FeatureSet::full(self.d))
    }

    /// Per-shape values `φ_T(x_T)` in frontier order (without the intercept).
    pub fn components(&self, x: &[f64]) -> Vec<(FeatureSet, Vec<f64>)> {
        self.shapes.iter().map(|s| (s.subset, s.eval(x))).collect()
    }

    /// Writes the shape of `t` on a grid: member columns `x<i>` then `out<k>` columns.
    ///
    /// Other features are irrelevant to `φ_T` and held at zero.
    pub fn write_shape_grid<W: Write>(&self, t: FeatureSet, points: usize, out: W) -> Result<()> {
        let shape = self
            .shape(t)
            .ok_or_else(|| Error::InvalidParameter(format!("{t} is not in the frontier")))?;
        let members: Vec<usize> = t.indices().collect();
        let grids: Vec<Vec<f64>> = shape.axes.iter().map(|a| a.grid(points)).collect();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = members.iter().map(|i| format!("x{}", i + 1)).collect();
        header.extend((0..self.outputs).map(|k| format!("out{k}")));
        w.write_record(&header)?;
        let total: usize = grids.iter().map(Vec::len).product();
        let mut x = vec![0.0; self.d];
        for flat in 0..total {
            let mut rem = flat;
            let mut rec = Vec::with_capacity(header.len());
            let mut coords = vec![0.0; members.len()];
            for a in (0..members.len()).rev() {
                coords[a] = grids[a][rem % grids[a].len()];
                rem /= grids[a].len();
            }
            for (a, &i) in members.iter().enumerate() {
                x[i] = coords[a];
                rec.push(format!("{:.17e}", coords[a]));
            }
            for v in shape.eval(&x) {
                rec.push(format!("{v:.17e}"));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl MaskedFunction for AdditiveModel {
    fn dim(&self) -> usize {
        self.d
    }
    fn outputs(&self) -> usize {
        self.outputs
    }
    fn mode(&self) -> RemovalMode {
        RemovalMode::Native
    }
    fn eval_into(&self, x: &[f64], s: FeatureSet, out: &mut [f64]) {
        self.predict_masked_into(x, s, out);
    }
}

impl Model for AdditiveModel {
    fn dim(&self) -> usize {
        self.d
    }
    fn outputs(&self) -> usize {
        self.outputs
    }
    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        self.predict_masked_into(x, FeatureSet::full(self.d), out);
    }
}
