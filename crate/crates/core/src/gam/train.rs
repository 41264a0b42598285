use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::basis::{build_shapes, BasisConfig};
use super::model::{AdditiveModel, Objective};
use crate::data::{FeatureSpec, Labels};
use crate::error::{check_dim, Error, Result};
use crate::masking::{cosine_lr, MaskSampler, MaskedFunction};
use crate::subset::{shap_kernel_weights, FeatureSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Cosine-anneal the learning rate to 1% of its start.
    pub anneal: bool,
    /// Ridge penalty `λ‖θ‖²` on shape coefficients.
    pub ridge: f64,
    pub seed: u64,
    /// Stop after this many epochs without a lower training loss.
    pub patience: Option<usize>,
    /// Probability of substituting `S = [d]` for a kernel draw.
    pub full_mask_prob: f64,
    /// Probability of substituting `S = ∅` for a kernel draw.
    pub empty_mask_prob: f64,
    pub basis: BasisConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 256,
            learning_rate: 1e-2,
            optimizer: Optimizer::Adam,
            anneal: true,
            ridge: 1e-5,
            seed: 0,
            patience: None,
            full_mask_prob: 0.05,
            empty_mask_prob: 0.05,
            basis: BasisConfig::default(),
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || self.ridge < 0.0 {
            return Err(Error::InvalidParameter("batch size and learning rate must be positive, ridge non-negative".into()));
        }
        let anchors = self.full_mask_prob + self.empty_mask_prob;
        if self.full_mask_prob < 0.0 || self.empty_mask_prob < 0.0 || anchors > 1.0 {
            return Err(Error::InvalidParameter("anchor probabilities must be in [0, 1] and sum to at most 1".into()));
        }
        Ok(())
    }
}

/// What the additive model is fitted against.
#[derive(Clone, Copy)]
pub enum GamTarget<'a> {
    /// A masked function `f(x, S)`; required by the masked objective.
    Masked(&'a dyn MaskedFunction),
    /// Labels aligned with the training rows (unmasked objective only).
    Labels(&'a Labels),
}

/// Kernel-distributed masks with endpoint anchors.
pub(crate) struct MaskScheme {
    d: usize,
    kernel: Option<MaskSampler>,
    full_prob: f64,
    empty_prob: f64,
}

impl MaskScheme {
    pub(crate) fn new(d: usize, full_prob: f64, empty_prob: f64) -> Result<Self> {
        let kernel = if d >= 2 { Some(MaskSampler::new(&shap_kernel_weights(d)?)) } else { None };
        Ok(MaskScheme { d, kernel, full_prob, empty_prob })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FeatureSet {
        let u: f64 = rng.random();
        match &self.kernel {
            Some(k) if u >= self.full_prob + self.empty_prob => k.sample(rng),
            _ => {
                // without a kernel (d < 2) only the anchors remain, in their relative proportion
                let anchors = self.full_prob + self.empty_prob;
                let p_full = if anchors > 0.0 { self.full_prob / anchors } else { 0.5 };
                if self.kernel.is_some() {
                    if u < self.full_prob { FeatureSet::full(self.d) } else { FeatureSet::EMPTY }
                } else if rng.random::<f64>() < p_full {
                    FeatureSet::full(self.d)
                } else {
                    FeatureSet::EMPTY
                }
            }
        }
    }
}

/// Update rule for shape coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    /// Plain minibatch gradient descent with heavy-ball momentum 0.9.
    Sgd,
}

/// Per-coefficient optimizer state over the shape blocks.
struct Stepper {
    kind: Optimizer,
    lr: f64,
    ridge: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Stepper {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(kind: Optimizer, lr: f64, ridge: f64, sizes: impl Iterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = sizes.collect();
        Stepper {
            kind,
            lr,
            ridge,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (b, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[b], &mut self.v[b], &grads[b]);
            for i in 0..p.len() {
                match self.kind {
                    Optimizer::Adam => {
                        // the ridge is decoupled: folded into the gradient, Adam would rescale it into
                        // full-size steps toward zero for coefficients whose cells are rarely visited
                        p[i] *= 1.0 - 2.0 * self.lr * self.ridge;
                        m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                        v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                        p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
                    }
                    Optimizer::Sgd => {
                        m[i] = 0.9 * m[i] + g[i] + 2.0 * self.ridge * p[i];
                        p[i] -= self.lr * m[i];
                    }
                }
            }
        }
    }
}

enum Loss {
    Squared,
    /// Softmax cross-entropy against class indices.
    CrossEntropy,
}

/// Trains an additive model over `frontier` on the rows of `x`.
pub fn train_gam(
    target: GamTarget<'_>,
    x: &Array2<f64>,
    features: Option<&[FeatureSpec]>,
    frontier: &[FeatureSet],
    objective: Objective,
    config: &TrainConfig,
) -> Result<AdditiveModel> {
    train_gam_with(target, x, features, frontier, objective, config, &mut |_, _| Ok(()))
}

/// As [`train_gam`], calling `on_epoch(e, model)` before training (`e = 0`) and after each epoch.
pub fn train_gam_with(
    target: GamTarget<'_>,
    x: &Array2<f64>,
    features: Option<&[FeatureSpec]>,
    frontier: &[FeatureSet],
    objective: Objective,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(usize, &AdditiveModel) -> Result<()>,
) -> Result<AdditiveModel> {
    config.validate()?;
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 {
        return Err(Error::Data("no training rows".into()));
    }
    if let Some(f) = features {
        check_dim(d, f.len())?;
    }
    if !frontier.iter().any(|s| !s.is_empty()) {
        return Err(Error::InvalidParameter("frontier has no non-empty sets".into()));
    }
    let (outputs, loss) = match (objective, target) {
        (Objective::Vanilla | Objective::Instashap, GamTarget::Masked(f)) => {
            check_dim(d, f.dim())?;
            (f.outputs(), Loss::Squared)
        }
        (Objective::Vanilla, GamTarget::Labels(y)) => {
            if y.len() != n {
                return Err(Error::Data(format!("{n} rows but {} labels", y.len())));
            }
            match y {
                Labels::Regression(_) => (1, Loss::Squared),
                Labels::Classes { .. } => (y.outputs(), Loss::CrossEntropy),
            }
        }
        (Objective::Instashap, GamTarget::Labels(_)) => {
            return Err(Error::InvalidParameter("the masked objective needs a masked function, not raw labels".into()))
        }
        (other, _) => return Err(Error::InvalidParameter(format!("train_gam does not fit {other:?} models"))),
    };

    let shapes = build_shapes(frontier, x, features, outputs, &config.basis)?;
    let mut model = AdditiveModel::new(d, outputs, shapes, objective)?;
    model.meta.seed = config.seed;
    let masked = objective == Objective::Instashap;

    // intercept: mean empty-mask value (masked) or mean target (unmasked)
    let probe: Vec<usize> = (0..n).step_by((n / 20_000).max(1)).collect();
    model.intercept = match (target, &loss) {
        (GamTarget::Masked(f), _) => {
            let xs = x.select(Axis(0), &probe);
            let mask = if masked { FeatureSet::EMPTY } else { FeatureSet::full(d) };
            let vals = f.eval_rows(xs.view(), &vec![mask; probe.len()]);
            vals.mean_axis(Axis(0)).expect("non-empty").to_vec()
        }
        (GamTarget::Labels(Labels::Regression(v)), _) => vec![v.iter().sum::<f64>() / n as f64],
        (GamTarget::Labels(Labels::Classes { labels, names }), _) => {
            let mut counts = vec![1.0; names.len()];
            labels.iter().for_each(|&l| counts[l] += 1.0);
            let total: f64 = counts.iter().sum();
            counts.iter().map(|c| (c / total).ln()).collect()
        }
    };
    if model.intercept.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { epoch: 0, detail: "non-finite intercept".into() });
    }

    let scheme = MaskScheme::new(d, config.full_mask_prob, config.empty_mask_prob)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Stepper::new(config.optimizer, config.learning_rate, config.ridge, model.shapes.iter().map(|s| s.coefficients.len()));
    let mut grads: Vec<Vec<f64>> = model.shapes.iter().map(|s| vec![0.0; s.coefficients.len()]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let full = FeatureSet::full(d);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut pred = vec![0.0; outputs];
    let mut resid = vec![0.0; outputs];
    on_epoch(0, &model)?;
    for epoch in 0..config.epochs {
        if config.anneal {
            opt.lr = cosine_lr(config.learning_rate, epoch, config.epochs);
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let masks: Vec<FeatureSet> = chunk.iter().map(|_| if masked { scheme.sample(&mut rng) } else { full }).collect();
            let xs = x.select(Axis(0), chunk);
            let targets: Array2<f64> = match target {
                GamTarget::Masked(f) => f.eval_rows(xs.view(), &masks),
                GamTarget::Labels(Labels::Regression(v)) => Array2::from_shape_fn((chunk.len(), 1), |(i, _)| v[chunk[i]]),
                GamTarget::Labels(Labels::Classes { labels, .. }) => {
                    Array2::from_shape_fn((chunk.len(), 1), |(i, _)| labels[chunk[i]] as f64)
                }
            };
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for (r, row) in xs.rows().into_iter().enumerate() {
                let xr = row.as_slice().expect("contiguous row");
                model.predict_masked_into(xr, masks[r], &mut pred);
                match loss {
                    Loss::Squared => {
                        for k in 0..outputs {
                            let e = pred[k] - targets[(r, k)];
                            batch_loss += e * e;
                            resid[k] = 2.0 * e * scale;
                        }
                    }
                    Loss::CrossEntropy => {
                        let label = targets[(r, 0)] as usize;
                        let max = pred.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let lse = max + pred.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                        batch_loss += lse - pred[label];
                        for k in 0..outputs {
                            let p = (pred[k] - lse).exp();
                            resid[k] = (p - if k == label { 1.0 } else { 0.0 }) * scale;
                        }
                    }
                }
                for (b, shape) in model.shapes.iter().enumerate() {
                    if !shape.subset.is_subset_of(masks[r]) {
                        continue;
                    }
                    let g = &mut grads[b];
                    shape.for_each_active(xr, |idx, w| {
                        for k in 0..outputs {
                            g[idx * outputs + k] += w * resid[k];
                        }
                    });
                }
            }
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, detail: format!("training loss became {batch_loss}") });
            }
            let mut params: Vec<&mut [f64]> = model.shapes.iter_mut().map(|s| s.coefficients.as_mut_slice()).collect();
            opt.step(&mut params, &grads);
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
            epoch_loss += batch_loss;
            batches += 1;
        }
        let epoch_loss = epoch_loss / batches as f64;
        model.meta.loss_history.push(epoch_loss);
        model.meta.epochs = epoch + 1;
        on_epoch(epoch + 1, &model)?;
        if epoch_loss < best - 1e-12 {
            best = epoch_loss;
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    Ok(model)
}
