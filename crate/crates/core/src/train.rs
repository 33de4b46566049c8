//! Surrogate-gradient training of quantized integrate-and-fire networks.
//!
//! The forward pass runs the exact integer dynamics on the quantized
//! weights, so a trained network behaves identically under
//! [`crate::snn::simulate`]. The backward pass replaces the Heaviside step
//! by an arctan surrogate and passes gradients straight through the
//! quantizer onto full-precision proxy weights. Gradients are propagated
//! through time with the reset multiplier treated as a constant.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mnist::Dataset;
use crate::snn::{classify, simulate, InputSequence, Network, SpikeEncoding, Thresholds, WeightScale};

/// Spike encoding family used for training and evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Poisson,
    Thresholded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub digits: Vec<u8>,
    pub hidden: usize,
    pub weight_scale: WeightScale,
    pub encoding: EncodingKind,
    pub t_end: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Fixed firing threshold of every hidden neuron.
    pub hidden_threshold: i32,
    /// Fixed firing threshold of every output neuron.
    pub output_threshold: i32,
    /// Pixel binarization level for the thresholded encoding.
    pub theta: f64,
    /// Cap on the number of training instances.
    pub train_limit: usize,
    /// Mean of the initial hidden-layer proxy weights.
    pub init_mean: f64,
    /// Standard deviation of the initial proxy weights.
    pub init_std: f64,
    /// Output rates are multiplied by this before the softmax.
    #[serde(default = "default_logit_scale")]
    pub logit_scale: f64,
}

fn default_logit_scale() -> f64 {
    6.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            digits: vec![1, 5, 9],
            hidden: 16,
            weight_scale: WeightScale::Binary,
            encoding: EncodingKind::Thresholded,
            t_end: 1,
            epochs: 30,
            learning_rate: 0.05,
            batch_size: 64,
            seed: 0,
            hidden_threshold: 12,
            output_threshold: 3,
            theta: SpikeEncoding::DEFAULT_THETA,
            train_limit: 12_000,
            init_mean: -0.02,
            init_std: 0.02,
            logit_scale: default_logit_scale(),
        }
    }
}

/// Arctan surrogate slope.
pub const SURROGATE_SLOPE: f64 = 2.0;
pub const MOMENTUM: f64 = 0.9;

impl TrainConfig {
    /// Tuned defaults for an encoding. Rate-coded runs integrate over many
    /// steps, so their hidden neurons need a higher threshold.
    pub fn preset(encoding: EncodingKind, hidden: usize, t_end: usize) -> Self {
        let base = Self { hidden, t_end, ..Self::default() };
        match encoding {
            EncodingKind::Thresholded => base,
            EncodingKind::Poisson => Self {
                encoding,
                epochs: 15,
                hidden_threshold: 16,
                output_threshold: 2,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.hidden == 0 {
            return bad("hidden layer needs k >= 1 neurons");
        }
        if self.t_end == 0 {
            return bad("t_end must be >= 1");
        }
        if self.encoding == EncodingKind::Thresholded && self.t_end != 1 {
            return bad("thresholded encoding uses exactly one time step (t_end = 1)");
        }
        if self.digits.is_empty() || self.digits.iter().any(|&d| d > 9) {
            return bad("digits must be a non-empty subset of 0..=9");
        }
        let mut d = self.digits.clone();
        d.sort_unstable();
        d.dedup();
        if d.len() != self.digits.len() {
            return bad("duplicate digits");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.hidden_threshold < 1 || self.output_threshold < 1 {
            return bad("thresholds must be >= 1");
        }
        Ok(())
    }

    pub fn spike_encoding(&self) -> SpikeEncoding {
        match self.encoding {
            EncodingKind::Poisson => SpikeEncoding::Poisson { t_end: self.t_end },
            EncodingKind::Thresholded => SpikeEncoding::Thresholded { theta: self.theta },
        }
    }

    /// Output classes in ascending digit order.
    pub fn class_labels(&self) -> Vec<u8> {
        let mut d = self.digits.clone();
        d.sort_unstable();
        d
    }
}

/// Full-precision shadow weights behind the deployed network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyWeights {
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
}

impl ProxyWeights {
    pub fn quantize(&self, scale: WeightScale) -> Result<(Vec<Vec<i8>>, Vec<Vec<i8>>)> {
        let q = |m: &[Vec<f64>]| -> Result<Vec<Vec<i8>>> {
            m.iter()
                .map(|row| row.iter().map(|&w| scale.quantize(w)).collect())
                .collect()
        };
        Ok((q(&self.hidden)?, q(&self.output)?))
    }

    fn zeros_like(&self) -> Self {
        Self {
            hidden: self.hidden.iter().map(|r| vec![0.0; r.len()]).collect(),
            output: self.output.iter().map(|r| vec![0.0; r.len()]).collect(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.hidden.iter_mut().zip(&other.hidden).chain(self.output.iter_mut().zip(&other.output)) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn rows_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.hidden.iter_mut().chain(self.output.iter_mut())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub val_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub initial_loss: f64,
    pub history: Vec<EpochStats>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub proxy: ProxyWeights,
    pub metrics: TrainMetrics,
}

/// Derivative of the arctan surrogate `atan(pi a x / 2) / pi + 1/2`.
pub fn surrogate_grad(x: f64, a: f64) -> f64 {
    (a / 2.0) / (1.0 + (PI * a * x / 2.0).powi(2))
}

/// The smooth surrogate itself; only used to check [`surrogate_grad`].
pub fn surrogate(x: f64, a: f64) -> f64 {
    (PI * a * x / 2.0).atan() / PI + 0.5
}

/// Softmax cross-entropy of `logits` against `target`, with its gradient.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = -(exps[target] / sum).ln();
    let grad = exps
        .iter()
        .enumerate()
        .map(|(c, e)| e / sum - if c == target { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

/// Per-sample state of one forward pass, kept for backpropagation.
struct Forward {
    /// Active input indices per time step `1..=t_end`.
    active: Vec<Vec<usize>>,
    hidden_pot: Vec<Vec<i32>>,
    hidden_spk: Vec<Vec<bool>>,
    output_pot: Vec<Vec<i32>>,
    output_spk: Vec<Vec<bool>>,
}

struct Model<'a> {
    hidden_w: &'a [Vec<i8>],
    output_w: &'a [Vec<i8>],
    tau_h: i32,
    tau_o: i32,
    logit_scale: f64,
}

impl Model<'_> {
    fn forward(&self, input: &InputSequence) -> Forward {
        let (nh, no) = (self.hidden_w.len(), self.output_w.len());
        let t_end = input.t_end();
        let mut f = Forward {
            active: Vec::with_capacity(t_end),
            hidden_pot: Vec::with_capacity(t_end),
            hidden_spk: Vec::with_capacity(t_end),
            output_pot: Vec::with_capacity(t_end),
            output_spk: Vec::with_capacity(t_end),
        };
        let mut hp = vec![0i32; nh];
        let mut hs = vec![false; nh];
        let mut op = vec![0i32; no];
        let mut os = vec![false; no];
        for t in 1..=t_end {
            let active: Vec<usize> = input.row(t).iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect();
            for h in 0..nh {
                let carried = if hs[h] { 0 } else { hp[h] };
                let row = &self.hidden_w[h];
                hp[h] = carried + active.iter().map(|&i| i32::from(row[i])).sum::<i32>();
                hs[h] = hp[h] >= self.tau_h;
            }
            for c in 0..no {
                let carried = if os[c] { 0 } else { op[c] };
                let row = &self.output_w[c];
                op[c] = carried + (0..nh).filter(|&h| hs[h]).map(|h| i32::from(row[h])).sum::<i32>();
                os[c] = op[c] >= self.tau_o;
            }
            f.active.push(active);
            f.hidden_pot.push(hp.clone());
            f.hidden_spk.push(hs.clone());
            f.output_pot.push(op.clone());
            f.output_spk.push(os.clone());
        }
        f
    }

    fn logits(&self, f: &Forward) -> Vec<f64> {
        Self::rates(f).into_iter().map(|r| r * self.logit_scale).collect()
    }

    fn rates(f: &Forward) -> Vec<f64> {
        let t_end = f.output_spk.len() as f64;
        let no = f.output_spk.first().map_or(0, Vec::len);
        (0..no)
            .map(|c| f.output_spk.iter().filter(|s| s[c]).count() as f64 / t_end)
            .collect()
    }

    /// Accumulates d(loss)/d(quantized weight) into `grad`; returns the loss.
    fn backward(&self, f: &Forward, target: usize, grad: &mut ProxyWeights) -> f64 {
        let (nh, no) = (self.hidden_w.len(), self.output_w.len());
        let t_end = f.active.len();
        let (loss, dl_dz) = softmax_cross_entropy(&self.logits(f), target);
        let dl_dr: Vec<f64> = dl_dz.iter().map(|g| g * self.logit_scale).collect();
        let norm_h = f64::from(self.tau_h.max(1));
        let norm_o = f64::from(self.tau_o.max(1));
        let mut dv_next = vec![0.0; no];
        let mut du_next = vec![0.0; nh];
        for t in (0..t_end).rev() {
            let mut dv = vec![0.0; no];
            for c in 0..no {
                let keep = if f.output_spk[t][c] { 0.0 } else { 1.0 };
                let x = f64::from(f.output_pot[t][c] - self.tau_o) / norm_o;
                dv[c] = dl_dr[c] / t_end as f64 * surrogate_grad(x, SURROGATE_SLOPE) / norm_o + dv_next[c] * keep;
            }
            let mut ds = vec![0.0; nh];
            for c in 0..no {
                for h in 0..nh {
                    if f.hidden_spk[t][h] {
                        grad.output[c][h] += dv[c];
                    }
                    ds[h] += f64::from(self.output_w[c][h]) * dv[c];
                }
            }
            let mut du = vec![0.0; nh];
            for h in 0..nh {
                let keep = if f.hidden_spk[t][h] { 0.0 } else { 1.0 };
                let x = f64::from(f.hidden_pot[t][h] - self.tau_h) / norm_h;
                du[h] = ds[h] * surrogate_grad(x, SURROGATE_SLOPE) / norm_h + du_next[h] * keep;
                for &i in &f.active[t] {
                    grad.hidden[h][i] += du[h];
                }
            }
            dv_next = dv;
            du_next = du;
        }
        loss
    }
}

fn init_proxy(cfg: &TrainConfig, input_count: usize, output_count: usize, rng: &mut ChaCha8Rng) -> ProxyWeights {
    let hidden_dist = Normal::new(cfg.init_mean, cfg.init_std).expect("finite init parameters");
    let output_dist = Normal::new(0.0, cfg.init_std).expect("finite init parameters");
    ProxyWeights {
        hidden: (0..cfg.hidden)
            .map(|_| (0..input_count).map(|_| hidden_dist.sample(rng)).collect())
            .collect(),
        output: (0..output_count)
            .map(|_| (0..cfg.hidden).map(|_| output_dist.sample(rng)).collect())
            .collect(),
    }
}

const GRAD_CHUNKS: usize = 8;

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64 + 1)
}

/// Builds the deployable network for the given proxy weights.
pub fn deploy(cfg: &TrainConfig, proxy: &ProxyWeights) -> Result<Network> {
    let (hw, ow) = proxy.quantize(cfg.weight_scale)?;
    let mut net = Network::new(
        cfg.weight_scale,
        hw,
        ow,
        Thresholds {
            hidden: vec![cfg.hidden_threshold; cfg.hidden],
            output: vec![cfg.output_threshold; cfg.digits.len()],
        },
    )?;
    net.class_labels = Some(cfg.class_labels());
    Ok(net)
}

fn mean_loss(cfg: &TrainConfig, net: &Network, data: &Dataset, classes: &[usize], seed: u64) -> Result<f64> {
    let model = Model {
        hidden_w: &net.hidden_weights,
        output_w: &net.output_weights,
        tau_h: cfg.hidden_threshold,
        tau_o: cfg.output_threshold,
        logit_scale: cfg.logit_scale,
    };
    let enc = cfg.spike_encoding();
    let losses: Result<Vec<f64>> = (0..data.len())
        .into_par_iter()
        .map(|k| {
            let input = enc.encode(&data.images[k], seed, k as u64)?;
            let f = model.forward(&input);
            Ok(softmax_cross_entropy(&model.logits(&f), classes[k]).0)
        })
        .collect();
    Ok(losses?.iter().sum::<f64>() / data.len().max(1) as f64)
}

pub fn train(cfg: &TrainConfig, train_set: &Dataset, val_set: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    let labels = cfg.class_labels();
    let class_of = |l: u8| {
        labels
            .iter()
            .position(|&d| d == l)
            .ok_or_else(|| Error::InvalidArgument(format!("label {l} not among digits {:?}", cfg.digits)))
    };
    let mut train_set = train_set.clone();
    train_set.truncate(cfg.train_limit);
    let classes: Vec<usize> = train_set.labels.iter().map(|&l| class_of(l)).collect::<Result<_>>()?;
    val_set.labels.iter().try_for_each(|&l| class_of(l).map(|_| ()))?;

    let input_count = train_set.images[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut proxy = init_proxy(cfg, input_count, labels.len(), &mut rng);
    let mut velocity = proxy.zeros_like();
    let enc = cfg.spike_encoding();

    let initial_loss = mean_loss(cfg, &deploy(cfg, &proxy)?, &train_set, &classes, epoch_seed(cfg.seed, 0))?;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let eseed = epoch_seed(cfg.seed, epoch);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (hw, ow) = proxy.quantize(cfg.weight_scale)?;
            let model = Model {
                hidden_w: &hw,
                output_w: &ow,
                tau_h: cfg.hidden_threshold,
                tau_o: cfg.output_threshold,
                logit_scale: cfg.logit_scale,
            };
            let chunk_len = batch.len().div_ceil(GRAD_CHUNKS).max(1);
            // fixed chunk boundaries keep the floating-point summation order
            // independent of the thread pool
            let parts: Vec<Result<(ProxyWeights, f64, usize)>> = batch
                .par_chunks(chunk_len)
                .map(|chunk| {
                    let mut g = proxy.zeros_like();
                    let mut loss = 0.0;
                    let mut hits = 0;
                    for &k in chunk {
                        let input = enc.encode(&train_set.images[k], eseed, k as u64)?;
                        let f = model.forward(&input);
                        if argmax(&Model::rates(&f)) == classes[k] {
                            hits += 1;
                        }
                        loss += model.backward(&f, classes[k], &mut g);
                    }
                    Ok((g, loss, hits))
                })
                .collect();
            let mut grad = proxy.zeros_like();
            let mut batch_loss = 0.0;
            for part in parts {
                let (g, l, h) = part?;
                grad.add_assign(&g);
                batch_loss += l;
                correct += h;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss: batch_loss });
            }
            loss_sum += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            for ((w, v), g) in proxy.rows_mut().zip(velocity.rows_mut()).zip(grad.hidden.iter().chain(&grad.output)) {
                for ((w, v), g) in w.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = MOMENTUM * *v + g * scale;
                    *w -= cfg.learning_rate * *v;
                }
            }
            if proxy.hidden.iter().chain(&proxy.output).flatten().any(|w| !w.is_finite()) {
                return Err(Error::Diverged { epoch, batch: b, loss: batch_loss });
            }
        }
        history.push(EpochStats {
            epoch,
            mean_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
        });
    }

    let network = deploy(cfg, &proxy)?;
    let val_accuracy = evaluate(&network, val_set, &enc, cfg.seed)?;
    Ok(TrainOutcome {
        network,
        proxy,
        metrics: TrainMetrics { val_accuracy, test_accuracy: None, epochs: cfg.epochs, seed: cfg.seed, initial_loss, history },
    })
}

/// Spike-count argmax with lowest-index ties, on rates.
fn argmax(rates: &[f64]) -> usize {
    let mut best = 0;
    for (c, &r) in rates.iter().enumerate() {
        if r > rates[best] {
            best = c;
        }
    }
    best
}

/// Fraction of instances the network classifies as their label.
/// Instance `k` is encoded on Poisson stream `k` of `seed`.
pub fn evaluate(net: &Network, data: &Dataset, encoding: &SpikeEncoding, seed: u64) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let hits: Result<Vec<bool>> = (0..data.len())
        .into_par_iter()
        .map(|k| {
            let class = net
                .class_of_label(data.labels[k])
                .ok_or_else(|| Error::InvalidArgument(format!("label {} has no output class", data.labels[k])))?;
            let input = encoding.encode(&data.images[k], seed, k as u64)?;
            Ok(classify(&simulate(net, &input)?) == class)
        })
        .collect();
    let hits = hits?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::Image;

    #[test]
    fn surrogate_matches_finite_differences() {
        for &x in &[-3.0, -0.7, -0.1, 0.0, 0.05, 0.4, 1.3, 4.0] {
            let h = 1e-6;
            let fd = (surrogate(x + h, SURROGATE_SLOPE) - surrogate(x - h, SURROGATE_SLOPE)) / (2.0 * h);
            let g = surrogate_grad(x, SURROGATE_SLOPE);
            assert!(((fd - g) / g).abs() < 1e-5, "x = {x}: {fd} vs {g}");
        }
    }

    #[test]
    fn softmax_gradient_sums_to_zero() {
        let (loss, g) = softmax_cross_entropy(&[0.2, 0.9, 0.0], 1);
        assert!(loss > 0.0);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        assert!(g[1] < 0.0 && g[0] > 0.0);
    }

    #[test]
    fn config_invariants() {
        let mut cfg = TrainConfig { encoding: EncodingKind::Thresholded, t_end: 4, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.t_end = 1;
        assert!(cfg.validate().is_ok());
        cfg.hidden = 0;
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { digits: vec![1, 1], ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn silent_network_predicts_class_zero() {
        let net = Network::zeroed(WeightScale::Binary, 4, 2, 3, 1);
        let data = Dataset {
            images: (0..9).map(|_| Image::blank(2, 2)).collect(),
            labels: vec![0, 1, 2, 0, 1, 2, 0, 1, 2],
        };
        let acc = evaluate(&net, &data, &SpikeEncoding::thresholded(), 0).unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 1e-12);
    }

    fn toy_images() -> Dataset {
        // two 4x4 patterns: left column vs right column, plus a blob
        let mk = |cols: &[usize]| {
            let mut px = vec![0.0; 16];
            for r in 0..4 {
                for &c in cols {
                    px[r * 4 + c] = 1.0;
                }
            }
            Image::new(4, 4, px).unwrap()
        };
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for k in 0..100 {
            let (img, l) = match k % 3 {
                0 => (mk(&[0]), 1),
                1 => (mk(&[3]), 5),
                _ => (mk(&[1, 2]), 9),
            };
            images.push(img);
            labels.push(l);
        }
        Dataset { images, labels }
    }

    fn toy_cfg() -> TrainConfig {
        TrainConfig {
            hidden: 6,
            epochs: 1,
            batch_size: 10,
            learning_rate: 0.5,
            hidden_threshold: 2,
            output_threshold: 1,
            init_mean: 0.0,
            init_std: 0.1,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn first_epoch_lowers_loss() {
        let data = toy_images();
        let out = train(&toy_cfg(), &data, &data).unwrap();
        let after = mean_loss(&toy_cfg(), &out.network, &data, &classes_of(&data), 0).unwrap();
        assert!(after < out.metrics.initial_loss, "{after} vs {}", out.metrics.initial_loss);
    }

    fn classes_of(data: &Dataset) -> Vec<usize> {
        let labels = toy_cfg().class_labels();
        data.labels.iter().map(|l| labels.iter().position(|d| d == l).unwrap()).collect()
    }

    #[test]
    fn deployed_weights_are_quantized_proxies() {
        let data = toy_images();
        let out = train(&toy_cfg(), &data, &data).unwrap();
        let (hw, ow) = out.proxy.quantize(WeightScale::Binary).unwrap();
        assert_eq!(out.network.hidden_weights, hw);
        assert_eq!(out.network.output_weights, ow);
        assert_eq!(out.network.class_labels, Some(vec![1, 5, 9]));
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_images();
        let a = train(&toy_cfg(), &data, &data).unwrap();
        let b = train(&toy_cfg(), &data, &data).unwrap();
        assert_eq!(a.network.to_json(), b.network.to_json());
        assert_eq!(a.proxy, b.proxy);
    }

    #[test]
    fn overfits_a_single_instance() {
        let mut data = toy_images();
        data.images.truncate(1);
        data.labels = vec![5];
        let cfg = TrainConfig { epochs: 60, batch_size: 1, digits: vec![1, 5, 9], ..toy_cfg() };
        let out = train(&cfg, &data, &data).unwrap();
        let acc = evaluate(&out.network, &data, &cfg.spike_encoding(), 0).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn forward_agrees_with_simulator() {
        let data = toy_images();
        let cfg = TrainConfig { encoding: EncodingKind::Poisson, t_end: 5, ..toy_cfg() };
        let out = train(&cfg, &data, &data).unwrap();
        let net = &out.network;
        let model = Model { hidden_w: &net.hidden_weights, output_w: &net.output_weights, tau_h: 2, tau_o: 1, logit_scale: 1.0 };
        for k in 0..10 {
            let input = cfg.spike_encoding().encode(&data.images[k], 1, k as u64).unwrap();
            let f = model.forward(&input);
            let trace = simulate(net, &input).unwrap();
            for t in 1..=5 {
                assert_eq!(f.hidden_pot[t - 1], trace.hidden_potential[t]);
                assert_eq!(f.output_spk[t - 1], trace.output_firing[t]);
            }
        }
    }

    #[test]
    fn rejects_foreign_labels() {
        let mut data = toy_images();
        data.labels[0] = 7;
        assert!(train(&toy_cfg(), &data, &data).is_err());
    }
}
