//! Small dense ReLU networks with hand-written backprop and Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `inputs × outputs`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Dense {
    fn weights(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.inputs, self.outputs), &self.w).expect("weight shape")
    }
}

/// Fully connected network: ReLU on hidden layers, identity output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Gradients laid out like [`Mlp::params`].
pub type Gradients = Vec<Vec<f64>>;

/// Cached activations of a forward pass, input first.
pub struct ForwardCache {
    acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("non-empty cache")
    }
}

impl Mlp {
    /// `sizes = [inputs, hidden…, outputs]`; weights and biases uniform in `±1/√fan_in`.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!("invalid layer sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (1.0 / w[0] as f64).sqrt();
                Dense {
                    inputs: w[0],
                    outputs: w[1],
                    w: (0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                    b: (0..w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("layers").outputs
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Scales the output layer, e.g. to start near zero.
    pub fn scale_output(&mut self, factor: f64) {
        let last = self.layers.last_mut().expect("layers");
        last.w.iter_mut().for_each(|w| *w *= factor);
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        let n = self.layers.len();
        for (li, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weights()) + &ArrayView2::from_shape((1, layer.outputs), &layer.b).expect("bias");
            if li + 1 < n {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> ForwardCache {
        let mut acts = vec![x.to_owned()];
        let n = self.layers.len();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut h = acts.last().expect("acts").dot(&layer.weights())
                + &ArrayView2::from_shape((1, layer.outputs), &layer.b).expect("bias");
            if li + 1 < n {
                h.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(h);
        }
        ForwardCache { acts }
    }

    /// Backpropagates `d loss / d output` (already averaged over the batch).
    pub fn backward(&self, cache: &ForwardCache, grad_out: Array2<f64>) -> Gradients {
        let n = self.layers.len();
        let mut grads = vec![Vec::new(); 2 * n];
        let mut delta = grad_out;
        for li in (0..n).rev() {
            let input = &cache.acts[li];
            let gw = input.t().dot(&delta);
            let gb: Array1<f64> = delta.sum_axis(Axis(0));
            grads[2 * li] = gw.iter().copied().collect();
            grads[2 * li + 1] = gb.to_vec();
            if li > 0 {
                let mut prev = delta.dot(&self.layers[li].weights().t());
                prev.zip_mut_with(input, |g, a| {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = prev;
            }
        }
        grads
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.w.as_mut_slice());
            out.push(l.b.as_mut_slice());
        }
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.w.as_slice());
            out.push(l.b.as_slice());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

/// Adam with optional L2 weight decay folded into the gradient.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                let gi = g[i] + self.weight_decay * p[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Mean squared error over all entries and its gradient.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let diff = pred - target;
    let n = pred.nrows().max(1) as f64;
    let loss = diff.iter().map(|v| v * v).sum::<f64>() / n;
    (loss, diff * (2.0 / n))
}

/// Row-wise log-softmax.
pub fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Cross-entropy against soft targets (rows of probabilities) and its gradient w.r.t. logits.
pub fn softmax_cross_entropy(logits: &Array2<f64>, target_probs: &Array2<f64>) -> (f64, Array2<f64>) {
    let logp = log_softmax(logits);
    let n = logits.nrows().max(1) as f64;
    let loss = -(&logp * target_probs).sum() / n;
    let grad = (logp.mapv(f64::exp) - target_probs) / n;
    (loss, grad)
}
