use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::TrainingMeta;
use super::train::MaskScheme;
use crate::data::InputEncoder;
use crate::error::{check_dim, Error, Result};
use crate::indices::{subsets_up_to, AttributionFamily, AttributionResult};
use crate::masking::{cosine_lr, MaskedFunction};
use crate::nn::{Adam, Mlp};
use crate::subset::FeatureSet;

/// Function class of the amortized explainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadArch {
    Mlp { hidden: Vec<usize> },
    /// One attribution vector shared by every input.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastShapConfig {
    /// 1 for Shapley values, `k ≥ 2` for Faith-SHAP-k over all tuples of size ≤ k.
    pub order: usize,
    pub arch: HeadArch,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub anneal: bool,
    pub seed: u64,
}

impl Default for FastShapConfig {
    fn default() -> Self {
        FastShapConfig {
            order: 1,
            arch: HeadArch::Mlp { hidden: vec![128, 128] },
            epochs: 30,
            batch_size: 256,
            learning_rate: 1e-3,
            anneal: true,
            seed: 0,
        }
    }
}

/// Amortized (Faith-)SHAP: a network mapping `x` to one value per tuple and output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmortizedHead {
    pub d: usize,
    pub outputs: usize,
    pub order: usize,
    pub tuples: Vec<FeatureSet>,
    pub arch: HeadArch,
    pub encoder: InputEncoder,
    pub net: Mlp,
    pub meta: TrainingMeta,
}

impl AmortizedHead {
    fn new(encoder: InputEncoder, outputs: usize, config: &FastShapConfig) -> Result<Self> {
        let d = encoder.d();
        if config.order == 0 || config.order > d {
            return Err(Error::InvalidParameter(format!("order must be in 1..={d}, got {}", config.order)));
        }
        let tuples = subsets_up_to(d, config.order);
        let width = tuples.len() * outputs;
        let mut sizes = match &config.arch {
            HeadArch::Mlp { hidden } => std::iter::once(encoder.width()).chain(hidden.iter().copied()).collect(),
            HeadArch::Constant => vec![1],
        };
        sizes.push(width);
        let mut net = Mlp::new(&sizes, config.seed)?;
        net.scale_output(0.1);
        Ok(AmortizedHead {
            d,
            outputs,
            order: config.order,
            tuples,
            arch: config.arch.clone(),
            encoder,
            net,
            meta: TrainingMeta { seed: config.seed, ..Default::default() },
        })
    }

    fn inputs(&self, xs: &Array2<f64>) -> Array2<f64> {
        match self.arch {
            HeadArch::Constant => Array2::zeros((xs.nrows(), 1)),
            HeadArch::Mlp { .. } => self.encoder.encode_rows(xs),
        }
    }

    /// Raw head outputs, `n × (|tuples|·c)` laid out tuple-major.
    pub fn raw(&self, xs: &Array2<f64>) -> Array2<f64> {
        self.net.forward(self.inputs(xs).view())
    }

    /// Normalized values for each row given `f(x,∅)` and `f(x,[d])`.
    fn normalized(&self, xs: &Array2<f64>, empty: &Array2<f64>, full: &Array2<f64>) -> Array2<f64> {
        let mut out = self.raw(xs);
        efficient_shift(&mut out, self.tuples.len(), self.outputs, empty, full);
        out
    }

    /// Attributions at each row of `xs`, shifted to sum to `f(x,[d]) − f(x,∅)`.
    pub fn explain_rows(&self, f: &dyn MaskedFunction, xs: &Array2<f64>) -> Result<Vec<AttributionResult>> {
        check_dim(self.d, xs.ncols())?;
        check_dim(self.d, f.dim())?;
        check_dim(self.outputs, f.outputs())?;
        let n = xs.nrows();
        let empty = f.eval_rows(xs.view(), &vec![FeatureSet::EMPTY; n]);
        let full = f.eval_rows(xs.view(), &vec![FeatureSet::full(self.d); n]);
        let vals = self.normalized(xs, &empty, &full);
        let (family, method) = if self.order == 1 {
            (AttributionFamily::Shapley, "fastshap")
        } else {
            (AttributionFamily::Faith, "fastfaith")
        };
        let c = self.outputs;
        Ok((0..n)
            .map(|r| {
                let x = xs.row(r).to_vec();
                let mut res = AttributionResult::new(family, self.order, &x, empty.row(r).to_vec(), method);
                for (t, &s) in self.tuples.iter().enumerate() {
                    res.values.insert(s, (0..c).map(|k| vals[(r, t * c + k)]).collect());
                }
                res.meta.efficiency_residual = Some(0.0);
                res
            })
            .collect())
    }

    pub fn explain(&self, f: &dyn MaskedFunction, x: &[f64]) -> Result<AttributionResult> {
        check_dim(self.d, x.len())?;
        let xs = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row");
        Ok(self.explain_rows(f, &xs)?.remove(0))
    }
}

/// `φ_T += (gap − Σ_U φ_U)/m` per row and output.
fn efficient_shift(vals: &mut Array2<f64>, m: usize, c: usize, empty: &Array2<f64>, full: &Array2<f64>) {
    for r in 0..vals.nrows() {
        for k in 0..c {
            let sum: f64 = (0..m).map(|t| vals[(r, t * c + k)]).sum();
            let shift = (full[(r, k)] - empty[(r, k)] - sum) / m as f64;
            (0..m).for_each(|t| vals[(r, t * c + k)] += shift);
        }
    }
}

/// Fits the head to `E_{x,S} |f(x,S) − f(x,∅) − Σ_{T⊆S} φ_T(x)|²` under the Shapley kernel.
///
/// Efficiency is imposed by the additive shift during training as well, so the endpoint
/// masks carry no signal and are not drawn.
pub fn train_fastshap(
    target: &dyn MaskedFunction,
    x: &Array2<f64>,
    encoder: InputEncoder,
    config: &FastShapConfig,
    on_epoch: &mut dyn FnMut(usize, &AmortizedHead) -> Result<()>,
) -> Result<AmortizedHead> {
    let n = x.nrows();
    let d = x.ncols();
    check_dim(d, target.dim())?;
    check_dim(d, encoder.d())?;
    if n == 0 {
        return Err(Error::Data("no training rows".into()));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::InvalidParameter("batch size and learning rate must be positive".into()));
    }
    let c = target.outputs();
    let mut head = AmortizedHead::new(encoder, c, config)?;
    let m = head.tuples.len();
    let empty = target.eval_rows(x.view(), &vec![FeatureSet::EMPTY; n]);
    let full = target.eval_rows(x.view(), &vec![FeatureSet::full(d); n]);
    on_epoch(0, &head)?;
    if d < 2 {
        // a single feature is pinned by efficiency alone
        return Ok(head);
    }
    let scheme = MaskScheme::new(d, 0.0, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_fa57);
    let mut opt = Adam::new(config.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        if config.anneal {
            opt.lr = cosine_lr(config.learning_rate, epoch, config.epochs);
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let b = chunk.len();
            let masks: Vec<FeatureSet> = chunk.iter().map(|_| scheme.sample(&mut rng)).collect();
            let xs = x.select(Axis(0), chunk);
            let ys = target.eval_rows(xs.view(), &masks);
            let e = empty.select(Axis(0), chunk);
            let fl = full.select(Axis(0), chunk);
            let cache = head.net.forward_cached(head.inputs(&xs).view());
            let mut vals = cache.output().clone();
            efficient_shift(&mut vals, m, c, &e, &fl);
            let mut grad = Array2::zeros((b, m * c));
            let mut loss = 0.0;
            let mut g = vec![0.0; m];
            for r in 0..b {
                for k in 0..c {
                    let mut pred = e[(r, k)];
                    for (t, s) in head.tuples.iter().enumerate() {
                        if s.is_subset_of(masks[r]) {
                            pred += vals[(r, t * c + k)];
                        }
                    }
                    let resid = pred - ys[(r, k)];
                    loss += resid * resid;
                    for (t, s) in head.tuples.iter().enumerate() {
                        g[t] = if s.is_subset_of(masks[r]) { 2.0 * resid / b as f64 } else { 0.0 };
                    }
                    // back through the projection I − 11ᵀ/m
                    let mean = g.iter().sum::<f64>() / m as f64;
                    for t in 0..m {
                        grad[(r, t * c + k)] = g[t] - mean;
                    }
                }
            }
            loss /= b as f64;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, detail: format!("training loss became {loss}") });
            }
            let grads = head.net.backward(&cache, grad);
            opt.step(head.net.params_mut(), &grads);
            epoch_loss += loss;
            batches += 1;
        }
        head.meta.loss_history.push(epoch_loss / batches as f64);
        head.meta.epochs = epoch + 1;
        on_epoch(epoch + 1, &head)?;
    }
    Ok(head)
}
