//! Removal operators turning a model `F(x)` into a masked function `f(x, S)`.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::data::{InputEncoder, Labels};
use crate::error::{check_dim, Error, Result};
use crate::nn::{log_softmax, mse_loss, softmax_cross_entropy, Adam, Mlp};
use crate::poly::Polynomial;
use crate::subset::{check_exhaustive, shap_unif_weights, FeatureSet, SetFunctionTable, WeightTable};
use crate::synthetic::{multilinear_conditional, MultilinearTarget, PairsGaussian, Sampler};

/// A full-input predictor `F: R^d → R^c`.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;
    fn outputs(&self) -> usize {
        1
    }
    fn predict_into(&self, x: &[f64], out: &mut [f64]);

    fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs()];
        self.predict_into(x, &mut out);
        out
    }
}

/// Adapts a closure `x ↦ F(x)` into a scalar [`Model`].
pub struct FnModel<F> {
    d: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnModel<F> {
    pub fn new(d: usize, f: F) -> Self {
        FnModel { d, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Model for FnModel<F> {
    fn dim(&self) -> usize {
        self.d
    }
    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = (self.f)(x);
    }
}

impl Model for Polynomial {
    fn dim(&self) -> usize {
        self.d()
    }
    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.eval(x);
    }
}

impl Model for MultilinearTarget {
    fn dim(&self) -> usize {
        self.d()
    }
    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.eval(x);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalMode {
    Baseline,
    Marginal,
    ExactConditional,
    Surrogate,
    /// A model that natively accepts masks, e.g. an additive model.
    Native,
    /// A fixed table of subset values.
    Table,
}

/// The masked function `f(x, S)`.
pub trait MaskedFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn outputs(&self) -> usize {
        1
    }
    fn mode(&self) -> RemovalMode;
    fn eval_into(&self, x: &[f64], s: FeatureSet, out: &mut [f64]);

    fn eval(&self, x: &[f64], s: FeatureSet) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs()];
        self.eval_into(x, s, &mut out);
        out
    }

    /// Evaluates row `i` of `xs` under `masks[i]`, writing an `n × c` matrix.
    fn eval_rows(&self, xs: ArrayView2<'_, f64>, masks: &[FeatureSet]) -> Array2<f64> {
        let c = self.outputs();
        let mut out = Array2::zeros((xs.nrows(), c));
        let mut buf = vec![0.0; xs.ncols()];
        for ((row, s), mut o) in xs.rows().into_iter().zip(masks).zip(out.rows_mut()) {
            buf.iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
            self.eval_into(&buf, *s, o.as_slice_mut().expect("contiguous"));
        }
        out
    }
}

/// Evaluates `f(x, S)` at all `2^d` subsets.
pub fn set_function_table(f: &dyn MaskedFunction, x: &[f64]) -> Result<SetFunctionTable> {
    check_dim(f.dim(), x.len())?;
    let d = f.dim();
    check_exhaustive(d)?;
    let n = 1usize << d;
    let xs = ArrayView2::from_shape((1, d), x).expect("row").broadcast((n, d)).expect("broadcast").to_owned();
    let masks: Vec<FeatureSet> = (0..n as u32).map(FeatureSet::from_bits).collect();
    let out = f.eval_rows(xs.view(), &masks);
    SetFunctionTable::new(d, f.outputs(), out.iter().copied().collect())
}

/// Fixed game `v(S)`, independent of `x`.
#[derive(Clone, Debug)]
pub struct TableGame {
    table: SetFunctionTable,
}

impl TableGame {
    pub fn new(table: SetFunctionTable) -> Self {
        TableGame { table }
    }
    pub fn table(&self) -> &SetFunctionTable {
        &self.table
    }
}

impl MaskedFunction for TableGame {
    fn dim(&self) -> usize {
        self.table.d()
    }
    fn outputs(&self) -> usize {
        self.table.outputs()
    }
    fn mode(&self) -> RemovalMode {
        RemovalMode::Table
    }
    fn eval_into(&self, _x: &[f64], s: FeatureSet, out: &mut [f64]) {
        out.copy_from_slice(self.table.get(s));
    }
}

/// `f(x, S) = F(x_S, x̄_{−S})`.
pub struct BaselineRemoval<M> {
    model: M,
    baseline: Vec<f64>,
}

impl<M: Model> BaselineRemoval<M> {
    pub fn new(model: M, baseline: Vec<f64>) -> Result<Self> {
        check_dim(model.dim(), baseline.len())?;
        Ok(BaselineRemoval { model, baseline })
    }
}

impl<M: Model> MaskedFunction for BaselineRemoval<M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn outputs(&self) -> usize {
        self.model.outputs()
    }
    fn mode(&self) -> RemovalMode {
        RemovalMode::Baseline
    }
    fn eval_into(&self, x: &[f64], s: FeatureSet, out: &mut [f64]) {
        let z: Vec<f64> = (0..x.len()).map(|i| if s.contains(i) { x[i] } else { self.baseline[i] }).collect();
        self.model.predict_into(&z, out);
    }
}

/// `f(x, S) = mean_k F(x_S, X̄^{(k)}_{−S})` over `m` background draws fixed at construction.
pub struct MarginalRemoval<M> {
    model: M,
    background: Array2<f64>,
    seed: u64,
}

impl<M: Model> MarginalRemoval<M> {
    pub fn new(model: M, sampler: &dyn Sampler, m: usize, seed: u64) -> Result<Self> {
        check_dim(model.dim(), sampler.dim())?;
        if m == 0 {
            return Err(Error::InvalidParameter("marginal removal needs m >= 1".into()));
        }
        let background = sampler.sample(m, seed)?;
        Ok(MarginalRemoval { model, background, seed })
    }

    pub fn samples(&self) -> usize {
        self.background.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mean and Monte-Carlo standard error per output.
    pub fn eval_with_se(&self, x: &[f64], s: FeatureSet) -> (Vec<f64>, Vec<f64>) {
        let c = self.model.outputs();
        let m = self.background.nrows();
        let mut sum = vec![0.0; c];
        let mut sum_sq = vec![0.0; c];
        let mut buf = vec![0.0; c];
        let mut z = vec![0.0; x.len()];
        for row in self.background.rows() {
            for i in 0..x.len() {
                z[i] = if s.contains(i) { x[i] } else { row[i] };
            }
            self.model.predict_into(&z, &mut buf);
            for k in 0..c {
                sum[k] += buf[k];
                sum_sq[k] += buf[k] * buf[k];
            }
        }
        let mean: Vec<f64> = sum.iter().map(|v| v / m as f64).collect();
        let se = (0..c)
            .map(|k| {
                if m < 2 {
                    return 0.0;
                }
                let var = (sum_sq[k] / m as f64 - mean[k] * mean[k]).max(0.0) * m as f64 / (m - 1) as f64;
                (var / m as f64).sqrt()
            })
            .collect();
        (mean, se)
    }
}

impl<M: Model> MaskedFunction for MarginalRemoval<M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn outputs(&self) -> usize {
        self.model.outputs()
    }
    fn mode(&self) -> RemovalMode {
        RemovalMode::Marginal
    }
    fn eval_into(&self, x: &[f64], s: FeatureSet, out: &mut [f64]) {
        if s == FeatureSet::full(x.len()) {
            self.model.predict_into(x, out);
            return;
        }
        out.copy_from_slice(&self.eval_with_se(x, s).0);
    }
}

enum ConditionalSource {
    Multilinear(MultilinearTarget),
    /// Conditional polynomial for every subset, indexed by bitmask.
    Polynomial(Vec<Polynomial>),
}

/// `f(x, S) = E[F(X) | X_S = x_S]` computed in closed form under a pairs world.
pub struct ExactConditional {
    world: PairsGaussian,
    source: ConditionalSource,
}

impl ExactConditional {
    pub fn multilinear(target: MultilinearTarget, world: PairsGaussian) -> Result<Self> {
        check_dim(world.d(), target.d())?;
        Ok(ExactConditional { world, source: ConditionalSource::Multilinear(target) })
    }

    /// Any polynomial target; precomputes all `2^d` conditional polynomials (`d ≤ 12`).
    pub fn polynomial(target: &Polynomial, world: PairsGaussian) -> Result<Self> {
        check_dim(world.d(), target.d())?;
        if world.d() > 12 {
            return Err(Error::DimensionOutOfRange(world.d()));
        }
        let table = (0..(1u32 << world.d()))
            .map(|b| target.conditional_expectation(world.rho(), FeatureSet::from_bits(b)))
            .collect();
        Ok(ExactConditional { world, source: ConditionalSource::Polynomial(table) })
    }

    pub fn world(&self) -> &PairsGaussian {
        &self.world
    }

    pub fn value(&self, x: &[f64], s: FeatureSet) -> f64 {
        match &self.source {
            ConditionalSource::Multilinear(t) => multilinear_conditional(t, self.world.rho(), x, s),
            ConditionalSource::Polynomial(table) => table[s.bits() as usize].eval(x),
        }
    }
}

impl MaskedFunction for ExactConditional {
    fn dim(&self) -> usize {
        self.world.d()
    }
    fn mode(&self) -> RemovalMode {
        RemovalMode::ExactConditional
    }
    fn eval_into(&self, x: &[f64], s: FeatureSet, out: &mut [f64]) {
        out[0] = self.value(x, s);
    }
}

/// Counts evaluations of the wrapped masked function.
pub struct CountingMasked<'a> {
    inner: &'a dyn MaskedFunction,
    calls: AtomicUsize,
}

impl<'a> CountingMasked<'a> {
    pub fn new(inner: &'a dyn MaskedFunction) -> Self {
        CountingMasked { inner, calls: AtomicUsize::new(0) }
    }
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl MaskedFunction for CountingMasked<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn outputs(&self) -> usize {
        self.inner.outputs()
    }
    fn mode(&self) -> RemovalMode {
        self.inner.mode()
    }
    fn eval_into(&self, x: &[f64], s: FeatureSet, out: &mut [f64]) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval_into(x, s, out);
    }
}

/// Draws masks from a per-size weight table: a size, then a uniform subset of that size.
#[derive(Clone, Debug)]
pub struct MaskSampler {
    d: usize,
    cumulative: Vec<f64>,
}

impl MaskSampler {
    pub fn new(table: &WeightTable) -> Self {
        let probs = table.size_probabilities();
        let total: f64 = probs.iter().sum();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        MaskSampler { d: table.d(), cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FeatureSet {
        let u: f64 = rng.random();
        let size = self.cumulative.iter().position(|c| u < *c).unwrap_or(self.d);
        random_subset(self.d, size, rng)
    }
}

/// Uniform subset of `[d]` with exactly `size` members.
pub fn random_subset<R: Rng + ?Sized>(d: usize, size: usize, rng: &mut R) -> FeatureSet {
    sample_indices(rng, d, size).into_iter().fold(FeatureSet::EMPTY, FeatureSet::with)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Masks drawn per training row and epoch.
    pub masks_per_row: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            hidden: vec![128, 128],
            epochs: 40,
            batch_size: 256,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            masks_per_row: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateOutput {
    /// Predictions are `mean + scale · net(·)`.
    Regression { mean: f64, scale: f64 },
    /// Predictions are log-probabilities over classes.
    Classification { classes: usize },
}

/// A network `g(x_S, S)` approximating the conditional removal of the labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub encoder: InputEncoder,
    pub net: Mlp,
    pub output: SurrogateOutput,
    pub config: SurrogateConfig,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_epoch: usize,
}

impl SurrogateModel {
    pub fn predict_rows(&self, xs: ArrayView2<'_, f64>, masks: &[FeatureSet]) -> Array2<f64> {
        let enc = self.encode(xs, masks);
        self.finish(self.net.forward(enc.view()))
    }

    fn encode(&self, xs: ArrayView2<'_, f64>, masks: &[FeatureSet]) -> Array2<f64> {
        let mut enc = Array2::zeros((xs.nrows(), self.encoder.masked_width()));
        let mut buf = vec![0.0; xs.ncols()];
        for ((row, s), mut o) in xs.rows().into_iter().zip(masks).zip(enc.rows_mut()) {
            buf.iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
            self.encoder.encode_masked_into(&buf, *s, o.as_slice_mut().expect("contiguous"));
        }
        enc
    }

    fn finish(&self, raw: Array2<f64>) -> Array2<f64> {
        match self.output {
            SurrogateOutput::Regression { mean, scale } => raw.mapv(|v| mean + scale * v),
            SurrogateOutput::Classification { .. } => log_softmax(&raw),
        }
    }
}

impl MaskedFunction for SurrogateModel {
    fn dim(&self) -> usize {
        self.encoder.d()
    }
    fn outputs(&self) -> usize {
        self.net.output_dim()
    }
    fn mode(&self) -> RemovalMode {
        RemovalMode::Surrogate
    }
    fn eval_into(&self, x: &[f64], s: FeatureSet, out: &mut [f64]) {
        let xs = ArrayView2::from_shape((1, x.len()), x).expect("row");
        let r = self.predict_rows(xs, &[s]);
        out.copy_from_slice(r.row(0).as_slice().expect("contiguous"));
    }
    fn eval_rows(&self, xs: ArrayView2<'_, f64>, masks: &[FeatureSet]) -> Array2<f64> {
        let mut out = Array2::zeros((xs.nrows(), self.outputs()));
        for start in (0..xs.nrows()).step_by(4096) {
            let end = (start + 4096).min(xs.nrows());
            let part = self.predict_rows(xs.slice(ndarray::s![start..end, ..]), &masks[start..end]);
            out.slice_mut(ndarray::s![start..end, ..]).assign(&part);
        }
        out
    }
}

/// Cosine decay from `base` to `base / 100` over `epochs`.
pub(crate) fn cosine_lr(base: f64, epoch: usize, epochs: usize) -> f64 {
    let t = if epochs > 1 { epoch as f64 / (epochs - 1) as f64 } else { 0.0 };
    let floor = base * 0.01;
    floor + 0.5 * (base - floor) * (1.0 + (std::f64::consts::PI * t).cos())
}

/// Trains a masked surrogate; `mask_dist = None` uses the uniform-Shapley distribution.
///
/// The checkpoint with the lowest validation loss is returned.
pub fn train_surrogate(
    x: &Array2<f64>,
    y: &Labels,
    encoder: InputEncoder,
    mask_dist: Option<&WeightTable>,
    config: &SurrogateConfig,
) -> Result<SurrogateModel> {
    let n = x.nrows();
    let d = encoder.d();
    check_dim(d, x.ncols())?;
    if n < 2 || y.len() != n {
        return Err(Error::Data("surrogate training needs at least two labelled rows".into()));
    }
    if config.batch_size == 0 || config.epochs == 0 || config.masks_per_row == 0 {
        return Err(Error::InvalidParameter("batch size, epochs and masks per row must be positive".into()));
    }
    let default_dist;
    let dist = match mask_dist {
        Some(t) => {
            check_dim(d, t.d())?;
            t
        }
        None => {
            default_dist = shap_unif_weights(d)?;
            &default_dist
        }
    };
    let sampler = MaskSampler::new(dist);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let (output, targets) = match y {
        Labels::Regression(v) => {
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            let t = Array2::from_shape_fn((n, 1), |(i, _)| (v[i] - mean) / scale);
            (SurrogateOutput::Regression { mean, scale }, t)
        }
        Labels::Classes { labels, names } => {
            let t = Array2::from_shape_fn((n, names.len()), |(i, k)| if labels[i] == k { 1.0 } else { 0.0 });
            (SurrogateOutput::Classification { classes: names.len() }, t)
        }
    };
    let c = targets.ncols();

    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    // several masks per validation row damp checkpoint-selection noise
    let val_reps = config.masks_per_row.max(4);
    let val_idx: Vec<usize> = val_idx.iter().copied().flat_map(|i| std::iter::repeat_n(i, val_reps)).collect();
    let val_masks: Vec<FeatureSet> = val_idx.iter().map(|_| sampler.sample(&mut rng)).collect();

    let mut sizes = vec![encoder.masked_width()];
    sizes.extend(&config.hidden);
    sizes.push(c);
    let net = Mlp::new(&sizes, config.seed.wrapping_add(1))?;
    let mut model = SurrogateModel {
        encoder,
        net,
        output,
        config: config.clone(),
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
        best_epoch: 0,
    };
    let classification = matches!(y, Labels::Classes { .. });
    let compute_loss = |pred: &Array2<f64>, t: &Array2<f64>| {
        if classification {
            softmax_cross_entropy(pred, t)
        } else {
            mse_loss(pred, t)
        }
    };

    let val_x = x.select(ndarray::Axis(0), &val_idx);
    let val_t = targets.select(ndarray::Axis(0), &val_idx);
    let val_enc = model.encode(val_x.view(), &val_masks);

    let mut opt = Adam::new(config.learning_rate);
    let mut best: Option<(f64, Mlp)> = None;
    let mut train_rows: Vec<usize> = train_idx.iter().copied().flat_map(|i| std::iter::repeat_n(i, config.masks_per_row)).collect();
    for epoch in 0..config.epochs {
        opt.lr = cosine_lr(config.learning_rate, epoch, config.epochs);
        rand::seq::SliceRandom::shuffle(train_rows.as_mut_slice(), &mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in train_rows.chunks(config.batch_size) {
            let bx = x.select(ndarray::Axis(0), chunk);
            let bt = targets.select(ndarray::Axis(0), chunk);
            let masks: Vec<FeatureSet> = chunk.iter().map(|_| sampler.sample(&mut rng)).collect();
            let enc = model.encode(bx.view(), &masks);
            let cache = model.net.forward_cached(enc.view());
            let (loss, grad) = compute_loss(cache.output(), &bt);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, detail: format!("surrogate loss became {loss}") });
            }
            let grads = model.net.backward(&cache, grad);
            opt.step(model.net.params_mut(), &grads);
            epoch_loss += loss;
            batches += 1;
        }
        let (val_loss, _) = compute_loss(&model.net.forward(val_enc.view()), &val_t);
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, detail: format!("validation loss became {val_loss}") });
        }
        model.train_loss.push(epoch_loss / batches as f64);
        model.validation_loss.push(val_loss);
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.net.clone()));
            model.best_epoch = epoch;
        }
    }
    if let Some((_, net)) = best {
        model.net = net;
    }
    Ok(model)
}
