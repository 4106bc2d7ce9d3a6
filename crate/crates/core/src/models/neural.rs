use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pairs::{epoch_pairs, TrainingPair};
use super::{ModelError, SequenceModel, TrainingConfig};
use crate::corpus::TokenId;

const INIT_STREAM: u64 = 1 << 62;
const SHUFFLE_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralConfig {
    pub dim: usize,
    pub window: usize,
    pub hidden: usize,
    /// Weights are drawn uniformly from `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self { dim: 32, window: 8, hidden: 64, init_scale: 0.1 }
    }
}

/// Fixed-window feed-forward language model.
///
/// The input is the last `window` tokens of `conditioning ++ [SEP] ++ prefix`
/// (left padded), embedded and concatenated, followed by one tanh layer and
/// a softmax output. Embedding rows `V` and `V + 1` hold the padding and
/// separator symbols. All parameters live in one flat vector:
/// `emb | w1 | b1 | w2 | b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyNeuralModel {
    vocab_size: usize,
    config: NeuralConfig,
    pub params: Vec<f64>,
}

struct Forward {
    x: Vec<f64>,
    h: Vec<f64>,
    logp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub coords_checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

impl TinyNeuralModel {
    pub fn num_params(vocab_size: usize, c: &NeuralConfig) -> usize {
        (vocab_size + 2) * c.dim + c.hidden * c.window * c.dim + c.hidden + vocab_size * c.hidden + vocab_size
    }

    pub fn zeros(vocab_size: usize, config: NeuralConfig) -> Result<Self, ModelError> {
        if vocab_size == 0 || config.dim == 0 || config.window == 0 || config.hidden == 0 {
            return Err(ModelError::Config("neural model dimensions must be positive".into()));
        }
        let n = Self::num_params(vocab_size, &config);
        Ok(Self { vocab_size, config, params: vec![0.0; n] })
    }

    /// Uniform random weights, zero biases.
    pub fn init(vocab_size: usize, config: NeuralConfig, seed: u64) -> Result<Self, ModelError> {
        let mut m = Self::zeros(vocab_size, config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let s = m.config.init_scale;
        let (b1, w2, b2) = (m.b1_offset(), m.w2_offset(), m.b2_offset());
        for (i, p) in m.params.iter_mut().enumerate() {
            let is_bias = (b1..w2).contains(&i) || i >= b2;
            if !is_bias {
                *p = rng.gen_range(-s..=s);
            }
        }
        Ok(m)
    }

    pub(crate) fn from_params(vocab_size: usize, config: NeuralConfig, params: Vec<f64>) -> Result<Self, ModelError> {
        let mut m = Self::zeros(vocab_size, config)?;
        if params.len() != m.params.len() {
            return Err(ModelError::Corrupt(format!(
                "expected {} parameters, found {}",
                m.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::Corrupt("non-finite parameter".into()));
        }
        m.params = params;
        Ok(m)
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    fn pad_row(&self) -> usize {
        self.vocab_size
    }

    fn sep_row(&self) -> usize {
        self.vocab_size + 1
    }

    fn input_len(&self) -> usize {
        self.config.window * self.config.dim
    }

    fn w1_offset(&self) -> usize {
        (self.vocab_size + 2) * self.config.dim
    }

    fn b1_offset(&self) -> usize {
        self.w1_offset() + self.config.hidden * self.input_len()
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.config.hidden
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.vocab_size * self.config.hidden
    }

    /// Embedding row indices feeding the prediction after `prefix`.
    pub fn window(&self, conditioning: &[TokenId], prefix: &[TokenId]) -> Vec<usize> {
        let w = self.config.window;
        let total = conditioning.len() + 1 + prefix.len();
        (0..w)
            .map(|j| {
                let pos = total as isize - w as isize + j as isize;
                if pos < 0 {
                    return self.pad_row();
                }
                let pos = pos as usize;
                match pos.cmp(&conditioning.len()) {
                    std::cmp::Ordering::Less => conditioning[pos] as usize,
                    std::cmp::Ordering::Equal => self.sep_row(),
                    std::cmp::Ordering::Greater => prefix[pos - conditioning.len() - 1] as usize,
                }
            })
            .collect()
    }

    fn forward(&self, window: &[usize]) -> Forward {
        let d = self.config.dim;
        let hid = self.config.hidden;
        let n_in = self.input_len();
        let p = &self.params;

        let mut x = Vec::with_capacity(n_in);
        for &row in window {
            x.extend_from_slice(&p[row * d..(row + 1) * d]);
        }

        let w1 = &p[self.w1_offset()..self.b1_offset()];
        let b1 = &p[self.b1_offset()..self.w2_offset()];
        let h: Vec<f64> = (0..hid)
            .map(|i| {
                let row = &w1[i * n_in..(i + 1) * n_in];
                let a: f64 = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + b1[i];
                a.tanh()
            })
            .collect();

        let w2 = &p[self.w2_offset()..self.b2_offset()];
        let b2 = &p[self.b2_offset()..];
        let mut logp: Vec<f64> = (0..self.vocab_size)
            .map(|v| {
                let row = &w2[v * hid..(v + 1) * hid];
                row.iter().zip(&h).map(|(w, a)| w * a).sum::<f64>() + b2[v]
            })
            .collect();
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logp.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        for z in &mut logp {
            *z -= lse;
        }
        Forward { x, h, logp }
    }

    /// Adds `scale * d(-log p(target))/d(params)` into `grad`; returns the
    /// unscaled loss term.
    fn backward(&self, window: &[usize], target: TokenId, scale: f64, grad: &mut [f64]) -> f64 {
        let f = self.forward(window);
        let d = self.config.dim;
        let hid = self.config.hidden;
        let n_in = self.input_len();
        let (w1o, b1o, w2o, b2o) = (self.w1_offset(), self.b1_offset(), self.w2_offset(), self.b2_offset());

        let mut dh = vec![0.0; hid];
        for v in 0..self.vocab_size {
            let mut dz = f.logp[v].exp();
            if v == target as usize {
                dz -= 1.0;
            }
            dz *= scale;
            grad[b2o + v] += dz;
            let row = w2o + v * hid;
            for i in 0..hid {
                grad[row + i] += dz * f.h[i];
                dh[i] += dz * self.params[row + i];
            }
        }

        let mut dx = vec![0.0; n_in];
        for i in 0..hid {
            let da = dh[i] * (1.0 - f.h[i] * f.h[i]);
            grad[b1o + i] += da;
            let row = w1o + i * n_in;
            for j in 0..n_in {
                grad[row + j] += da * f.x[j];
                dx[j] += da * self.params[row + j];
            }
        }

        for (slot, &r) in window.iter().enumerate() {
            for k in 0..d {
                grad[r * d + k] += dx[slot * d + k];
            }
        }
        -f.logp[target as usize]
    }

    /// Mean per-token cross entropy of `pair` and its gradient.
    pub fn loss_and_gradient(&self, pair: &TrainingPair) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let n = pair.target.len().max(1) as f64;
        let mut loss = 0.0;
        for t in 0..pair.target.len() {
            let w = self.window(&pair.conditioning, &pair.target[..t]);
            loss += self.backward(&w, pair.target[t], 1.0 / n, &mut grad);
        }
        (loss / n, grad)
    }

    pub fn loss(&self, pair: &TrainingPair) -> f64 {
        let n = pair.target.len().max(1) as f64;
        -self.sequence_logprob(&pair.conditioning, &pair.target) / n
    }

    fn mean_loss(&self, pairs: &[TrainingPair]) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for p in pairs {
            total -= self.sequence_logprob(&p.conditioning, &p.target);
            n += p.target.len();
        }
        total / n.max(1) as f64
    }

    /// Mini-batch gradient descent; returns the mean per-token training loss
    /// after each epoch.
    pub fn train(&mut self, pairs: &[TrainingPair], config: &TrainingConfig) -> Result<Vec<f64>, ModelError> {
        config.validate()?;
        if pairs.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SHUFFLE_STREAM);
        let mut losses = Vec::with_capacity(config.epochs);
        let mut grad = vec![0.0; self.params.len()];
        for epoch in 0..config.epochs {
            let data = epoch_pairs(pairs, config, epoch);
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                let n: usize = batch.iter().map(|&i| data[i].target.len()).sum();
                if n == 0 {
                    continue;
                }
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in batch {
                    let p = &data[i];
                    for t in 0..p.target.len() {
                        let w = self.window(&p.conditioning, &p.target[..t]);
                        self.backward(&w, p.target[t], 1.0 / n as f64, &mut grad);
                    }
                }
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= config.learning_rate * g;
                }
            }
            let loss = self.mean_loss(&data);
            if !loss.is_finite() || self.params.iter().any(|p| !p.is_finite()) {
                return Err(ModelError::NonFinite { epoch, loss });
            }
            losses.push(loss);
        }
        Ok(losses)
    }
}

impl SequenceModel for TinyNeuralModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, conditioning: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        self.forward(&self.window(conditioning, prefix)).logp
    }
}

/// Absolute floor on the relative error denominator, so coordinates whose
/// true gradient is essentially zero are judged by absolute agreement.
const REL_FLOOR: f64 = 1e-6;
const CHECK_COORDS: usize = 400;

/// Compares the analytic gradient of the mean cross entropy on `pair` with
/// central finite differences on a seeded sample of coordinates (all of them
/// if the model is small).
pub fn grad_check(model: &TinyNeuralModel, pair: &TrainingPair, epsilon: f64) -> GradCheckReport {
    grad_check_sampled(model, pair, epsilon, CHECK_COORDS, 0)
}

pub fn grad_check_sampled(
    model: &TinyNeuralModel,
    pair: &TrainingPair,
    epsilon: f64,
    coords: usize,
    seed: u64,
) -> GradCheckReport {
    let (_, analytic) = model.loss_and_gradient(pair);
    let n = model.params.len();
    let picked: Vec<usize> = if n <= coords {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, n, coords).into_vec()
    };
    let mut probe = model.clone();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for &i in &picked {
        let orig = probe.params[i];
        probe.params[i] = orig + epsilon;
        let up = probe.loss(pair);
        probe.params[i] = orig - epsilon;
        let down = probe.loss(pair);
        probe.params[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let abs = (numeric - analytic[i]).abs();
        let rel = abs / numeric.abs().max(analytic[i].abs()).max(REL_FLOOR);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    GradCheckReport { epsilon, coords_checked: picked.len(), max_rel_error: max_rel, max_abs_error: max_abs }
}
