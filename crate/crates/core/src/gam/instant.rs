use std::collections::HashMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{AdditiveModel, Objective};
use crate::error::{check_dim, Error, Result};
use crate::indices::coefficients::coefficient_grid;
use crate::indices::IndexFamily;
use crate::indices::{AttributionFamily, AttributionResult};
use crate::masking::MaskedFunction;
use crate::subset::FeatureSet;

/// Order-`k` attributions read off the shapes of a masked-trained model.
///
/// The shapes are taken as the purified components; every other Möbius term is zero, so each
/// index is `Σ_{T∈𝓘, T⊇S} c(|S|, |T|) φ_T(x_T)` and no target queries are needed. With `k = 1`
/// every family is the Shapley value.
pub fn instant_shap(model: &AdditiveModel, x: &[f64], k: usize, family: IndexFamily) -> Result<AttributionResult> {
    if model.objective != Objective::Instashap {
        return Err(Error::Incompatible(format!(
            "instant attributions need a masked-trained model; this one was trained with {:?}",
            model.objective
        )));
    }
    check_dim(model.d, x.len())?;
    let d = model.d;
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!("order must be in 1..={d}, got {k}")));
    }
    let (fam, method) = if k == 1 {
        (AttributionFamily::Shapley, "instant")
    } else {
        (AttributionFamily::from_index_family(family), "instant")
    };
    let c = model.outputs;
    let max_t = model.max_order().max(k);
    let coef = coefficient_grid(family, k, max_t);
    let mut res = AttributionResult::new(fam, k, x, model.intercept.clone(), method);
    if k == 1 {
        for i in 0..d {
            res.values.insert(FeatureSet::singleton(i), vec![0.0; c]);
        }
    }
    for shape in &model.shapes {
        let t = shape.subset;
        let v = shape.eval(x);
        for s in t.subsets().filter(|s| !s.is_empty() && s.len() <= k) {
            let w = coef[s.len()][t.len()];
            let acc = res.values.entry(s).or_insert_with(|| vec![0.0; c]);
            if w != 0.0 {
                for (a, b) in acc.iter_mut().zip(&v) {
                    *a += w * b;
                }
            }
        }
    }
    let total = res.total();
    let full = model.predict(x)?;
    let resid = (0..c).map(|o| (total[o] - (full[o] - model.intercept[o])).abs()).fold(0.0, f64::max);
    res.meta.efficiency_residual = Some(resid);
    Ok(res)
}

/// Interaction statistic used to rank candidate tuples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    /// Mean of the discrete derivative at the empty and the complementary context.
    Archipelago,
    /// Discrete derivative at the empty context.
    Inclusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierSearch {
    pub rounds: usize,
    /// Candidates kept per round.
    pub per_round: usize,
    /// Minimum fraction of a candidate's one-smaller subsets already in the frontier.
    pub threshold: f64,
    pub scorer: Scorer,
    /// Candidates must score strictly above this.
    pub min_score: f64,
    pub max_order: usize,
    /// Rows used to estimate scores.
    pub probe_rows: usize,
    pub seed: u64,
}

impl Default for FrontierSearch {
    fn default() -> Self {
        FrontierSearch {
            rounds: 2,
            per_round: 5,
            threshold: 1.0,
            scorer: Scorer::Archipelago,
            min_score: 1e-3,
            max_order: 3,
            probe_rows: 256,
            seed: 0,
        }
    }
}

/// Masked evaluations on the probe rows, memoized per mask.
struct Probe<'a> {
    f: &'a dyn MaskedFunction,
    xs: Array2<f64>,
    cache: HashMap<FeatureSet, Array2<f64>>,
}

impl Probe<'_> {
    fn at(&mut self, s: FeatureSet) -> &Array2<f64> {
        let (f, xs) = (self.f, &self.xs);
        self.cache.entry(s).or_insert_with(|| f.eval_rows(xs.view(), &vec![s; xs.nrows()]))
    }

    /// `Σ_{W⊆T} (−1)^{|T−W|} f(x, context ∪ W)`.
    fn derivative(&mut self, t: FeatureSet, context: FeatureSet) -> Array2<f64> {
        let mut acc = Array2::zeros((self.xs.nrows(), self.f.outputs()));
        for w in t.subsets() {
            let sign = if (t.len() - w.len()) % 2 == 0 { 1.0 } else { -1.0 };
            acc.scaled_add(sign, self.at(context.union(w)));
        }
        acc
    }
}

fn inclusion_ratio(c: FeatureSet, frontier: &[FeatureSet]) -> f64 {
    let present = c.indices().filter(|&i| frontier.contains(&c.without(i))).count();
    present as f64 / c.len() as f64
}

/// Greedy frontier growth from `{∅} ∪ singletons`.
///
/// Each round scores every one-element fattening whose inclusion ratio reaches the threshold by
/// `|E[s_C · r]| / √E[r²]`, where `r = f(x,[d]) − f(x,∅) − Σ_{T∈𝓘} f̃_T(x)` is the part of the
/// prediction not yet carried by the frontier's purified effects. Returns the frontier sorted by
/// size then bitmask, with `∅` first.
pub fn select_frontier(target: &dyn MaskedFunction, x: &Array2<f64>, config: &FrontierSearch) -> Result<Vec<FeatureSet>> {
    let d = target.dim();
    check_dim(d, x.ncols())?;
    if config.rounds == 0 || config.per_round == 0 {
        return Err(Error::InvalidParameter("rounds and per-round count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(Error::InvalidParameter(format!("threshold {} outside [0, 1]", config.threshold)));
    }
    if x.nrows() == 0 {
        return Err(Error::Data("no rows to score interactions on".into()));
    }
    let mut rows: Vec<usize> = (0..x.nrows()).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    rows.truncate(config.probe_rows.max(1));
    rows.sort_unstable();
    let mut probe = Probe { f: target, xs: x.select(Axis(0), &rows), cache: HashMap::new() };
    let full = FeatureSet::full(d);

    let mut frontier: Vec<FeatureSet> = std::iter::once(FeatureSet::EMPTY).chain((0..d).map(FeatureSet::singleton)).collect();
    let mut resid = probe.at(full).clone();
    resid -= probe.at(FeatureSet::EMPTY);
    for i in 0..d {
        resid -= &probe.derivative(FeatureSet::singleton(i), FeatureSet::EMPTY);
    }
    for _ in 0..config.rounds {
        let mut candidates: Vec<FeatureSet> = frontier
            .iter()
            .filter(|t| !t.is_empty() && t.len() < config.max_order.min(d))
            .flat_map(|&t| (0..d).filter(move |&j| !t.contains(j)).map(move |j| t.with(j)))
            .filter(|c| !frontier.contains(c))
            .collect();
        candidates.sort_by_key(|c| c.bits());
        candidates.dedup();
        candidates.retain(|&c| inclusion_ratio(c, &frontier) >= config.threshold);
        if candidates.is_empty() {
            break;
        }
        let r_norm = resid.iter().map(|v| v * v).sum::<f64>() / resid.len() as f64;
        let mut scored: Vec<(f64, FeatureSet)> = Vec::with_capacity(candidates.len());
        for &c in &candidates {
            let score = if r_norm <= 1e-24 {
                0.0
            } else {
                let mut s = probe.derivative(c, FeatureSet::EMPTY);
                if config.scorer == Scorer::Archipelago {
                    s = (s + probe.derivative(c, full.difference(c))) * 0.5;
                }
                let cov = s.iter().zip(resid.iter()).map(|(a, b)| a * b).sum::<f64>() / resid.len() as f64;
                cov.abs() / r_norm.sqrt()
            };
            scored.push((score, c));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.bits().cmp(&b.1.bits())));
        let chosen: Vec<FeatureSet> = scored
            .into_iter()
            .take(config.per_round)
            .filter(|(s, _)| *s > config.min_score)
            .map(|(_, c)| c)
            .collect();
        if chosen.is_empty() {
            break;
        }
        for c in chosen {
            resid -= &probe.derivative(c, FeatureSet::EMPTY);
            frontier.push(c);
        }
    }
    frontier.sort_by_key(|s| (s.len(), s.bits()));
    Ok(frontier)
}
