//! Metrics and diagnostics: SHAP-approximation error, normalized error, trust gap and
//! SHAP-trace completion.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::indices::{shapley_exact, AttributionResult};
use crate::masking::MaskedFunction;
use crate::subset::FeatureSet;

/// One metric over a monotone axis (epochs or sample counts).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub se: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>) -> Self {
        MetricSeries { name: name.into(), ..Default::default() }
    }

    /// Appends a point; `x` must not decrease.
    pub fn push(&mut self, x: f64, value: f64, se: Option<f64>) -> Result<()> {
        if self.x.last().is_some_and(|&last| x < last) {
            return Err(Error::InvalidParameter(format!("series {} must be monotone in x", self.name)));
        }
        self.x.push(x);
        self.values.push(value);
        self.se.push(se);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// CSV with header `epoch,value,se`; an absent SE is an empty cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "value", "se"])?;
        for i in 0..self.len() {
            w.write_record([
                format_number(self.x[i]),
                format!("{:.17e}", self.values[i]),
                self.se[i].map_or(String::new(), |s| format!("{s:.17e}")),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.17e}")
    }
}

/// SHAP-approximation error in both normalizations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapMse {
    /// Mean squared difference over points, features and outputs.
    pub raw: f64,
    /// `raw` divided by the variance of the oracle values; `None` when that variance is zero.
    pub normalized: Option<f64>,
}

/// Compares per-feature attributions of aligned batches.
pub fn shap_mse(pred: &[AttributionResult], oracle: &[AttributionResult]) -> Result<ShapMse> {
    check_dim(oracle.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::InvalidParameter("empty attribution batch".into()));
    }
    let (mut se, mut sum, mut sq, mut count) = (0.0, 0.0, 0.0, 0usize);
    for (p, o) in pred.iter().zip(oracle) {
        check_dim(o.d, p.d)?;
        check_dim(o.outputs(), p.outputs())?;
        if p.point.iter().zip(&o.point).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(Error::InvalidParameter("attribution batches are not evaluated at the same points".into()));
        }
        for c in 0..o.outputs() {
            for (a, b) in p.feature_vector(c).into_iter().zip(o.feature_vector(c)) {
                se += (a - b) * (a - b);
                sum += b;
                sq += b * b;
                count += 1;
            }
        }
    }
    let n = count as f64;
    let raw = se / n;
    let var = sq / n - (sum / n).powi(2);
    Ok(ShapMse { raw, normalized: (var > 1e-300).then(|| raw / var) })
}

/// `MSE / Var[labels]`: 0 for a perfect fit, 1 for the label mean.
pub fn nmse(pred: &[f64], labels: &[f64]) -> Result<f64> {
    check_dim(labels.len(), pred.len())?;
    let n = labels.len() as f64;
    let mean = labels.iter().sum::<f64>() / n;
    let var = labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance("labels are constant".into()));
    }
    let mse = pred.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n;
    Ok(mse / var)
}

/// Fraction of matching class indices.
pub fn accuracy(pred: &[usize], labels: &[usize]) -> Result<f64> {
    check_dim(labels.len(), pred.len())?;
    if labels.is_empty() {
        return Err(Error::InvalidParameter("no labels".into()));
    }
    Ok(pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64)
}

/// Index of the largest entry in each row of logits.
pub fn argmax_rows(logits: &ndarray::Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0)
        .collect()
}

/// Whether the interpretable models can be trusted to stand in for the blackbox.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// The best additive model matches the blackbox: its interactions are captured.
    #[serde(rename = "scenario-A")]
    ScenarioA,
    /// A gap remains: the blackbox relies on structure outside every frontier tried.
    #[serde(rename = "scenario-B")]
    ScenarioB,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GamScore {
    pub label: String,
    /// Frontier as lists of 0-based feature indices (∅ omitted).
    pub frontier: Vec<Vec<usize>>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrustGapReport {
    pub metric: String,
    pub higher_is_better: bool,
    pub blackbox: f64,
    pub gam1: f64,
    pub gams: Vec<GamScore>,
    pub best_gam: String,
    pub best_score: f64,
    /// How much worse the best additive model is than the blackbox (positive = worse).
    pub gap: f64,
    /// `gap / |blackbox|`.
    pub relative_gap: f64,
    /// GAM-1's shortfall, the room interactions can recover.
    pub gam1_gap: f64,
    /// Allowed relative shortfall.
    pub margin: f64,
    pub verdict: Verdict,
}

impl TrustGapReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Scenario-A iff the best additive score is within `margin · |blackbox|` of the blackbox.
///
/// `gams` lists every additive model scored on the same split; the first entry with a
/// frontier of singletons only is reported as GAM-1.
pub fn trust_gap(metric: &str, higher_is_better: bool, blackbox: f64, gams: &[GamScore], margin: f64) -> Result<TrustGapReport> {
    if gams.is_empty() {
        return Err(Error::InvalidParameter("no additive model scores".into()));
    }
    if !(margin >= 0.0) {
        return Err(Error::InvalidParameter(format!("margin must be non-negative, got {margin}")));
    }
    // shortfall relative to the blackbox, positive when worse
    let shortfall = |s: f64| if higher_is_better { blackbox - s } else { s - blackbox };
    let best = gams
        .iter()
        .min_by(|a, b| shortfall(a.score).total_cmp(&shortfall(b.score)))
        .expect("non-empty");
    let gam1 = gams.iter().find(|g| g.frontier.iter().all(|t| t.len() <= 1)).unwrap_or(&gams[0]);
    let gap = shortfall(best.score);
    let verdict = if gap <= margin * blackbox.abs() { Verdict::ScenarioA } else { Verdict::ScenarioB };
    Ok(TrustGapReport {
        metric: metric.to_string(),
        higher_is_better,
        blackbox,
        gam1: gam1.score,
        gams: gams.to_vec(),
        best_gam: best.label.clone(),
        best_score: best.score,
        gap,
        relative_gap: if blackbox != 0.0 { gap / blackbox.abs() } else { f64::INFINITY * gap.signum() },
        gam1_gap: shortfall(gam1.score),
        margin,
        verdict,
    })
}

/// `Σ_i Φ_i(x*₁, …, x_i, …, x*_d)`: each feature's Shapley function traced along its own axis
/// through the anchor, then summed.
pub fn trace_completion_with(phi: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>, anchor: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(anchor.len(), x.len())?;
    let mut z = anchor.to_vec();
    let mut total = 0.0;
    for i in 0..x.len() {
        z[i] = x[i];
        let v = phi(&z)?;
        check_dim(x.len(), v.len())?;
        total += v[i];
        z[i] = anchor[i];
    }
    Ok(total)
}

/// Trace completion of the exact Shapley values of `f` (output 0).
pub fn shap_trace_completion(f: &dyn MaskedFunction, anchor: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(f.dim(), anchor.len())?;
    trace_completion_with(&mut |z| Ok(shapley_exact(f, z)?.feature_vector(0)), anchor, x)
}

/// Feature sets as index lists, dropping `∅`.
pub fn frontier_indices(frontier: &[FeatureSet]) -> Vec<Vec<usize>> {
    frontier.iter().filter(|s| !s.is_empty()).map(|s| s.indices().collect()).collect()
}
