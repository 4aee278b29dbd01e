//! Reference 1-D convolutional classifier, trained from scratch.
//!
//! Stride-1 same-padding conv layers with ReLU, a flatten, one hidden
//! fully-connected layer, and a 3-way softmax head. Training is plain
//! mini-batch SGD with momentum, fully sequential and seeded, so identical
//! configuration and data reproduce identical parameters bit for bit.
//! Per-channel standardization statistics are computed on the training set
//! and baked into the model.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Condition, WindowInstance};
use crate::error::{Error, Result};
use crate::model::{softmax, Classifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvNetConfig {
    /// Output channels of each conv layer, applied in order.
    pub channel_sizes: Vec<usize>,
    pub kernel_size: usize,
    /// Width of the hidden fully-connected layer.
    pub fc_size: usize,
    pub window_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// SGD momentum coefficient.
    pub momentum: f64,
    pub seed: u64,
}

impl ConvNetConfig {
    /// Small architecture for laptop-scale experiments.
    pub fn desk(window_size: usize) -> Self {
        ConvNetConfig {
            channel_sizes: vec![8, 8, 16],
            kernel_size: 5,
            fc_size: 64,
            window_size,
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-2,
            momentum: 0.9,
            seed: 0,
        }
    }

    /// Production-scale architecture; validate shapes with
    /// [`ConvNetConfig::validate`] before committing to a training run.
    pub fn full(window_size: usize) -> Self {
        ConvNetConfig {
            channel_sizes: vec![64, 64, 128, 128, 256, 256],
            kernel_size: 5,
            fc_size: 4096,
            window_size,
            ..ConvNetConfig::desk(window_size)
        }
    }

    /// Checks the configuration and reports layer shapes and parameter
    /// counts without allocating any parameters.
    pub fn validate(&self) -> Result<NetShape> {
        if self.channel_sizes.is_empty() || self.channel_sizes.contains(&0) {
            return Err(Error::Config("channel_sizes must be nonempty positives".into()));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!("kernel_size must be odd, got {}", self.kernel_size)));
        }
        if self.fc_size == 0 {
            return Err(Error::Config("fc_size must be >= 1".into()));
        }
        if self.window_size < 2 {
            return Err(Error::Config("window_size must be >= 2".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0, 1)".into()));
        }

        let mut layers = Vec::new();
        let mut total = 0usize;
        let mut in_ch = 2;
        for (i, &out_ch) in self.channel_sizes.iter().enumerate() {
            let params = out_ch * in_ch * self.kernel_size + out_ch;
            total += params;
            layers.push(LayerShape {
                name: format!("conv{}", i + 1),
                output_channels: out_ch,
                output_len: self.window_size,
                params,
            });
            in_ch = out_ch;
        }
        let flat = in_ch * self.window_size;
        let fc1 = self.fc_size * flat + self.fc_size;
        total += fc1;
        layers.push(LayerShape {
            name: "fc1".into(),
            output_channels: self.fc_size,
            output_len: 1,
            params: fc1,
        });
        let fc2 = 3 * self.fc_size + 3;
        total += fc2;
        layers.push(LayerShape {
            name: "fc2".into(),
            output_channels: 3,
            output_len: 1,
            params: fc2,
        });
        Ok(NetShape { layers, total_params: total })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub output_channels: usize,
    pub output_len: usize,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub layers: Vec<LayerShape>,
    pub total_params: usize,
}

/// All learnable tensors; the same layout doubles for gradients and momentum.
#[derive(Debug, Clone, PartialEq)]
struct Params {
    conv_w: Vec<Vec<f64>>, // per layer, [out * in * k]
    conv_b: Vec<Vec<f64>>,
    fc1_w: Vec<f64>,
    fc1_b: Vec<f64>,
    fc2_w: Vec<f64>,
    fc2_b: Vec<f64>,
}

impl Params {
    fn zeros(cfg: &ConvNetConfig) -> Params {
        let mut conv_w = Vec::new();
        let mut conv_b = Vec::new();
        let mut in_ch = 2;
        for &out_ch in &cfg.channel_sizes {
            conv_w.push(vec![0.0; out_ch * in_ch * cfg.kernel_size]);
            conv_b.push(vec![0.0; out_ch]);
            in_ch = out_ch;
        }
        let flat = in_ch * cfg.window_size;
        Params {
            conv_w,
            conv_b,
            fc1_w: vec![0.0; cfg.fc_size * flat],
            fc1_b: vec![0.0; cfg.fc_size],
            fc2_w: vec![0.0; 3 * cfg.fc_size],
            fc2_b: vec![0.0; 3],
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        for t in self.conv_w.iter_mut() {
            out.push(t);
        }
        for t in self.conv_b.iter_mut() {
            out.push(t);
        }
        out.push(&mut self.fc1_w);
        out.push(&mut self.fc1_b);
        out.push(&mut self.fc2_w);
        out.push(&mut self.fc2_b);
        out
    }

    fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out: Vec<&Vec<f64>> = Vec::new();
        for t in self.conv_w.iter() {
            out.push(t);
        }
        for t in self.conv_b.iter() {
            out.push(t);
        }
        out.push(&self.fc1_w);
        out.push(&self.fc1_b);
        out.push(&self.fc2_w);
        out.push(&self.fc2_b);
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let chunks = a.len() / 4;
    let mut acc = [0.0f64; 4];
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in chunks * 4..a.len() {
        sum += a[j] * b[j];
    }
    sum
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

/// Conv layer forward: `out[o][t] = b[o] + sum_i sum_k w[o][i][k] * x[i][t + k - pad]`
/// with zero padding, followed by ReLU (skipped for gradients via `relu`).
fn conv_forward(
    input: &[f64],
    in_ch: usize,
    w: usize,
    weights: &[f64],
    biases: &[f64],
    k: usize,
    output: &mut [f64],
) {
    let out_ch = biases.len();
    let pad = k / 2;
    for o in 0..out_ch {
        let out_row = &mut output[o * w..(o + 1) * w];
        out_row.fill(biases[o]);
        for i in 0..in_ch {
            let x = &input[i * w..(i + 1) * w];
            let w_row = &weights[(o * in_ch + i) * k..(o * in_ch + i + 1) * k];
            for (kk, &coeff) in w_row.iter().enumerate() {
                let shift = kk as isize - pad as isize;
                let t_lo = (-shift).max(0) as usize;
                let t_hi = ((w as isize - shift).min(w as isize)) as usize;
                for t in t_lo..t_hi {
                    out_row[t] += coeff * x[(t as isize + shift) as usize];
                }
            }
        }
    }
}

fn relu(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

struct Activations {
    /// Post-ReLU activations per stage; `stage[0]` is the standardized input.
    stage: Vec<Vec<f64>>,
    hidden: Vec<f64>,
    probs: [f64; 3],
}

/// Trained classifier with baked-in input standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    channel_sizes: Vec<usize>,
    kernel_size: usize,
    fc_size: usize,
    window_size: usize,
    norm_mean: [f64; 2],
    norm_std: [f64; 2],
    params: Params,
}

impl ConvNet {
    fn init(cfg: &ConvNetConfig, norm_mean: [f64; 2], norm_std: [f64; 2]) -> Result<ConvNet> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = Params::zeros(cfg);
        let mut in_ch = 2;
        for (layer, &out_ch) in cfg.channel_sizes.iter().enumerate() {
            let fan_in = (in_ch * cfg.kernel_size) as f64;
            let dist = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
            for v in params.conv_w[layer].iter_mut() {
                *v = dist.sample(&mut rng);
            }
            in_ch = out_ch;
        }
        let flat = in_ch * cfg.window_size;
        let dist = Normal::new(0.0, (2.0 / flat as f64).sqrt()).unwrap();
        for v in params.fc1_w.iter_mut() {
            *v = dist.sample(&mut rng);
        }
        let dist = Normal::new(0.0, (2.0 / cfg.fc_size as f64).sqrt()).unwrap();
        for v in params.fc2_w.iter_mut() {
            *v = dist.sample(&mut rng);
        }
        Ok(ConvNet {
            channel_sizes: cfg.channel_sizes.clone(),
            kernel_size: cfg.kernel_size,
            fc_size: cfg.fc_size,
            window_size: cfg.window_size,
            norm_mean,
            norm_std,
            params,
        })
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn channel_sizes(&self) -> &[usize] {
        &self.channel_sizes
    }

    fn standardize(&self, window: &WindowInstance) -> Result<Vec<f64>> {
        let w = self.window_size;
        if window.time_channel.len() != w || window.metric_channel.len() != w {
            return Err(Error::LengthMismatch {
                expected: w,
                actual: window.metric_channel.len(),
            });
        }
        let mut input = vec![0.0; 2 * w];
        for (t, v) in window.time_channel.iter().enumerate() {
            input[t] = (v - self.norm_mean[0]) / self.norm_std[0];
        }
        for (t, v) in window.metric_channel.iter().enumerate() {
            input[w + t] = (v - self.norm_mean[1]) / self.norm_std[1];
        }
        Ok(input)
    }

    fn forward(&self, input: Vec<f64>) -> Activations {
        let w = self.window_size;
        let mut stage = vec![input];
        let mut in_ch = 2;
        for (layer, &out_ch) in self.channel_sizes.iter().enumerate() {
            let mut out = vec![0.0; out_ch * w];
            conv_forward(
                stage.last().unwrap(),
                in_ch,
                w,
                &self.params.conv_w[layer],
                &self.params.conv_b[layer],
                self.kernel_size,
                &mut out,
            );
            relu(&mut out);
            stage.push(out);
            in_ch = out_ch;
        }
        let flat = stage.last().unwrap();
        let mut hidden = vec![0.0; self.fc_size];
        for (j, h) in hidden.iter_mut().enumerate() {
            *h = self.params.fc1_b[j] + dot(&self.params.fc1_w[j * flat.len()..(j + 1) * flat.len()], flat);
        }
        relu(&mut hidden);
        let mut logits = [0.0; 3];
        for (c, z) in logits.iter_mut().enumerate() {
            *z = self.params.fc2_b[c] + dot(&self.params.fc2_w[c * self.fc_size..(c + 1) * self.fc_size], &hidden);
        }
        let probs_vec = softmax(&logits);
        Activations {
            stage,
            hidden,
            probs: [probs_vec[0], probs_vec[1], probs_vec[2]],
        }
    }

    /// Cross-entropy loss and parameter gradients accumulated into `grads`.
    fn backward(&self, acts: &Activations, label: Condition, grads: &mut Params) -> f64 {
        let w = self.window_size;
        let loss = -acts.probs[label.index()].max(1e-300).ln();

        let mut dlogits = acts.probs;
        dlogits[label.index()] -= 1.0;

        // fc2
        let mut dhidden = vec![0.0; self.fc_size];
        for c in 0..3 {
            grads.fc2_b[c] += dlogits[c];
            axpy(
                &mut grads.fc2_w[c * self.fc_size..(c + 1) * self.fc_size],
                dlogits[c],
                &acts.hidden,
            );
            axpy(
                &mut dhidden,
                dlogits[c],
                &self.params.fc2_w[c * self.fc_size..(c + 1) * self.fc_size],
            );
        }
        for (dh, h) in dhidden.iter_mut().zip(acts.hidden.iter()) {
            if *h <= 0.0 {
                *dh = 0.0;
            }
        }

        // fc1
        let flat = acts.stage.last().unwrap();
        let mut dflat = vec![0.0; flat.len()];
        for (j, &dh) in dhidden.iter().enumerate() {
            if dh == 0.0 {
                continue;
            }
            grads.fc1_b[j] += dh;
            axpy(&mut grads.fc1_w[j * flat.len()..(j + 1) * flat.len()], dh, flat);
            axpy(&mut dflat, dh, &self.params.fc1_w[j * flat.len()..(j + 1) * flat.len()]);
        }

        // conv stack, last to first
        let mut dout = dflat;
        for layer in (0..self.channel_sizes.len()).rev() {
            let out_ch = self.channel_sizes[layer];
            let in_ch = if layer == 0 { 2 } else { self.channel_sizes[layer - 1] };
            let pad = self.kernel_size / 2;
            let prev = &acts.stage[layer];
            let post = &acts.stage[layer + 1];
            // ReLU gate
            for (d, a) in dout.iter_mut().zip(post.iter()) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let mut dprev = vec![0.0; in_ch * w];
            for o in 0..out_ch {
                let dz = &dout[o * w..(o + 1) * w];
                grads.conv_b[layer][o] += dz.iter().sum::<f64>();
                for i in 0..in_ch {
                    let x = &prev[i * w..(i + 1) * w];
                    let dx = &mut dprev[i * w..(i + 1) * w];
                    let base = (o * in_ch + i) * self.kernel_size;
                    for kk in 0..self.kernel_size {
                        let shift = kk as isize - pad as isize;
                        let t_lo = (-shift).max(0) as usize;
                        let t_hi = ((w as isize - shift).min(w as isize)) as usize;
                        let mut dw = 0.0;
                        for t in t_lo..t_hi {
                            dw += dz[t] * x[(t as isize + shift) as usize];
                        }
                        grads.conv_w[layer][base + kk] += dw;
                        let coeff = self.params.conv_w[layer][base + kk];
                        for t in t_lo..t_hi {
                            dx[(t as isize + shift) as usize] += coeff * dz[t];
                        }
                    }
                }
            }
            dout = dprev;
        }
        loss
    }

    /// ReLU activation signs over all stages for every window; used to
    /// detect finite-difference probes that straddle a kink.
    fn activation_pattern(&self, windows: &[WindowInstance]) -> Result<Vec<bool>> {
        let mut pattern = Vec::new();
        for window in windows {
            let acts = self.forward(self.standardize(window)?);
            for stage in acts.stage.iter().skip(1) {
                pattern.extend(stage.iter().map(|v| *v > 0.0));
            }
            pattern.extend(acts.hidden.iter().map(|v| *v > 0.0));
        }
        Ok(pattern)
    }

    /// Mean loss over a window set without updating parameters.
    pub fn loss(&self, windows: &[WindowInstance]) -> Result<f64> {
        let mut total = 0.0;
        for window in windows {
            let acts = self.forward(self.standardize(window)?);
            total += -acts.probs[window.label.index()].max(1e-300).ln();
        }
        Ok(total / windows.len() as f64)
    }

    fn mean_gradients(&self, windows: &[WindowInstance], cfg: &ConvNetConfig) -> Result<(f64, Params)> {
        let mut grads = Params::zeros(cfg);
        let mut total = 0.0;
        for window in windows {
            let acts = self.forward(self.standardize(window)?);
            total += self.backward(&acts, window.label, &mut grads);
        }
        let inv = 1.0 / windows.len() as f64;
        for tensor in grads.tensors_mut() {
            for v in tensor.iter_mut() {
                *v *= inv;
            }
        }
        Ok((total * inv, grads))
    }

    /// Serializes the model: magic, JSON header, then little-endian 64-bit
    /// parameters in a fixed order.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let header = CheckpointHeader {
            schema_version: 1,
            channel_sizes: self.channel_sizes.clone(),
            kernel_size: self.kernel_size,
            fc_size: self.fc_size,
            window_size: self.window_size,
            norm_mean: self.norm_mean,
            norm_std: self.norm_std,
        };
        let header_json = serde_json::to_vec(&header)?;
        let mut file = std::fs::File::create(path)?;
        file.write_all(CHECKPOINT_MAGIC)?;
        file.write_all(&(header_json.len() as u64).to_le_bytes())?;
        file.write_all(&header_json)?;
        let mut buf = Vec::new();
        for tensor in self.params.tensors() {
            for v in tensor {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<ConvNet> {
        let mut file = std::fs::File::open(path)?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Data(format!(
                "{}: not a model checkpoint (bad magic)",
                path.display()
            )));
        }
        let mut len_bytes = [0u8; 8];
        file.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        file.read_exact(&mut header_bytes)?;
        let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
        if header.schema_version != 1 {
            return Err(Error::Data(format!(
                "unsupported checkpoint schema version {}",
                header.schema_version
            )));
        }
        let cfg = ConvNetConfig {
            channel_sizes: header.channel_sizes.clone(),
            kernel_size: header.kernel_size,
            fc_size: header.fc_size,
            window_size: header.window_size,
            ..ConvNetConfig::desk(header.window_size)
        };
        let shape = cfg.validate()?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;
        if raw.len() != shape.total_params * 8 {
            return Err(Error::Data(format!(
                "checkpoint holds {} bytes of parameters, expected {}",
                raw.len(),
                shape.total_params * 8
            )));
        }
        let mut values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut params = Params::zeros(&cfg);
        for tensor in params.tensors_mut() {
            for v in tensor.iter_mut() {
                *v = values.next().unwrap();
            }
        }
        Ok(ConvNet {
            channel_sizes: header.channel_sizes,
            kernel_size: header.kernel_size,
            fc_size: header.fc_size,
            window_size: header.window_size,
            norm_mean: header.norm_mean,
            norm_std: header.norm_std,
            params,
        })
    }

    #[cfg(test)]
    fn zero_output_layer(&mut self) {
        self.params.fc2_w.fill(0.0);
        self.params.fc2_b.fill(0.0);
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CSHAPNET";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    schema_version: u32,
    channel_sizes: Vec<usize>,
    kernel_size: usize,
    fc_size: usize,
    window_size: usize,
    norm_mean: [f64; 2],
    norm_std: [f64; 2],
}

impl Classifier for ConvNet {
    fn predict_proba(&self, window: &WindowInstance) -> Result<[f64; 3]> {
        let input = self.standardize(window)?;
        Ok(self.forward(input).probs)
    }
}

fn channel_stats(train: &[WindowInstance]) -> ([f64; 2], [f64; 2]) {
    let mut mean = [0.0f64; 2];
    let mut count = 0usize;
    for w in train {
        for v in &w.time_channel {
            mean[0] += v;
        }
        for v in &w.metric_channel {
            mean[1] += v;
        }
        count += w.time_channel.len();
    }
    mean[0] /= count as f64;
    mean[1] /= count as f64;
    let mut var = [0.0f64; 2];
    for w in train {
        for v in &w.time_channel {
            var[0] += (v - mean[0]) * (v - mean[0]);
        }
        for v in &w.metric_channel {
            var[1] += (v - mean[1]) * (v - mean[1]);
        }
    }
    var[0] /= count as f64;
    var[1] /= count as f64;
    let std = [
        if var[0].sqrt() > 1e-8 { var[0].sqrt() } else { 1.0 },
        if var[1].sqrt() > 1e-8 { var[1].sqrt() } else { 1.0 },
    ];
    (mean, std)
}

/// Trains the reference network; returns the model and the per-epoch mean
/// training loss.
pub fn train_convnet(train: &[WindowInstance], cfg: &ConvNetConfig) -> Result<(ConvNet, Vec<f64>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    for w in train {
        if w.metric_channel.len() != cfg.window_size || w.time_channel.len() != cfg.window_size {
            return Err(Error::LengthMismatch {
                expected: cfg.window_size,
                actual: w.metric_channel.len(),
            });
        }
    }
    for class in Condition::ALL {
        if !train.iter().any(|w| w.label == class) {
            return Err(Error::Model(format!("class {class} missing from the training set")));
        }
    }

    let (norm_mean, norm_std) = channel_stats(train);
    let mut net = ConvNet::init(cfg, norm_mean, norm_std)?;
    let mut velocity = Params::zeros(cfg);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the seeded stream
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let windows: Vec<WindowInstance> = batch.iter().map(|&i| train[i].clone()).collect();
            let (batch_loss, grads) = net.mean_gradients(&windows, cfg)?;
            if !batch_loss.is_finite() {
                return Err(Error::Model(format!(
                    "non-finite loss {batch_loss} at epoch {epoch}, batch {batch_idx} \
                     (learning_rate {} may be too high)",
                    cfg.learning_rate
                )));
            }
            epoch_loss += batch_loss * batch.len() as f64;
            for (v_t, g_t) in velocity.tensors_mut().into_iter().zip(grads.tensors()) {
                for (v, g) in v_t.iter_mut().zip(g_t.iter()) {
                    *v = cfg.momentum * *v - cfg.learning_rate * g;
                }
            }
            for (p_t, v_t) in net.params.tensors_mut().into_iter().zip(velocity.tensors()) {
                for (p, v) in p_t.iter_mut().zip(v_t.iter()) {
                    *p += v;
                }
            }
        }
        losses.push(epoch_loss / train.len() as f64);
    }
    Ok((net, losses))
}

/// Compares backprop gradients against central finite differences on a
/// freshly initialized network; returns the maximum relative error over the
/// sampled parameters.
///
/// Probes whose perturbation flips any ReLU activation are discarded: the
/// loss has a kink inside the probe interval there, so the central
/// difference does not estimate the derivative. Incorrect backprop still
/// fails on the valid probes.
pub fn gradient_check(
    cfg: &ConvNetConfig,
    windows: &[WindowInstance],
    samples_per_tensor: usize,
    step: f64,
) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Data("gradient check needs at least one window".into()));
    }
    let (norm_mean, norm_std) = channel_stats(windows);
    let net = ConvNet::init(cfg, norm_mean, norm_std)?;
    let (_, grads) = net.mean_gradients(windows, cfg)?;
    let base_pattern = net.activation_pattern(windows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(7));
    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let n_tensors = net.params.tensors().len();
    for tensor_idx in 0..n_tensors {
        let len = net.params.tensors()[tensor_idx].len();
        let mut taken = 0;
        let mut attempts = 0;
        while taken < samples_per_tensor.min(len) && attempts < 10 * samples_per_tensor {
            attempts += 1;
            let i = rng.random_range(0..len);
            let mut plus = net.clone();
            plus.params.tensors_mut()[tensor_idx][i] += step;
            let mut minus = net.clone();
            minus.params.tensors_mut()[tensor_idx][i] -= step;
            if plus.activation_pattern(windows)? != base_pattern
                || minus.activation_pattern(windows)? != base_pattern
            {
                continue;
            }
            taken += 1;
            checked += 1;
            let numerical = (plus.loss(windows)? - minus.loss(windows)?) / (2.0 * step);
            let analytical = grads.tensors()[tensor_idx][i];
            let denom = (numerical.abs() + analytical.abs()).max(1e-8);
            max_rel = max_rel.max((numerical - analytical).abs() / denom);
        }
    }
    if checked == 0 {
        return Err(Error::Verification(
            "gradient check found no kink-free probes".into(),
        ));
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ScenarioMeta, WindowOrigin};
    use crate::model::evaluate;

    fn window(values: Vec<f64>, label: Condition, offset: usize) -> WindowInstance {
        let w = values.len();
        WindowInstance {
            time_channel: (0..w).map(|i| i as f64 * 1e-3).collect(),
            metric_channel: values,
            label,
            scenario: ScenarioMeta {
                workload: "camera".into(),
                core_type: "big".into(),
                condition: label,
                rounds: 1,
            },
            origin: WindowOrigin { trace: "t".into(), phase: 0, offset },
        }
    }

    fn separable_set(w: usize, per_class: usize, noise: f64, seed: u64) -> Vec<WindowInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, noise).unwrap();
        let mut out = Vec::new();
        for (ci, (label, level)) in [
            (Condition::Normal, 0.3),
            (Condition::NoFan, 0.6),
            (Condition::UnderVolt, 0.9),
        ]
        .into_iter()
        .enumerate()
        {
            for k in 0..per_class {
                let values: Vec<f64> = (0..w).map(|_| level + dist.sample(&mut rng)).collect();
                out.push(window(values, label, ci * per_class + k));
            }
        }
        out
    }

    #[test]
    fn zeroed_output_layer_predicts_uniformly() {
        let cfg = ConvNetConfig {
            epochs: 1,
            ..ConvNetConfig::desk(16)
        };
        let set = separable_set(16, 2, 0.01, 1);
        let (mut net, _) = train_convnet(&set, &cfg).unwrap();
        net.zero_output_layer();
        let p = net.predict_proba(&set[0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = ConvNetConfig {
            epochs: 3,
            batch_size: 8,
            ..ConvNetConfig::desk(24)
        };
        let set = separable_set(24, 6, 0.05, 2);
        let (a, la) = train_convnet(&set, &cfg).unwrap();
        let (b, lb) = train_convnet(&set, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let p1 = a.predict_proba(&set[3]).unwrap();
        let p2 = a.predict_proba(&set[3]).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn probabilities_are_normalized() {
        let cfg = ConvNetConfig {
            epochs: 2,
            ..ConvNetConfig::desk(20)
        };
        let set = separable_set(20, 4, 0.05, 3);
        let (net, _) = train_convnet(&set, &cfg).unwrap();
        for w in &set {
            let p = net.predict_proba(w).unwrap();
            assert!(p.iter().all(|v| *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_window_length_mismatch() {
        let cfg = ConvNetConfig {
            epochs: 1,
            ..ConvNetConfig::desk(16)
        };
        let set = separable_set(16, 2, 0.01, 4);
        let (net, _) = train_convnet(&set, &cfg).unwrap();
        let wrong = window(vec![0.5; 20], Condition::Normal, 0);
        assert!(net.predict_proba(&wrong).is_err());
    }

    #[test]
    fn rejects_missing_class() {
        let cfg = ConvNetConfig {
            epochs: 1,
            ..ConvNetConfig::desk(16)
        };
        let set: Vec<WindowInstance> = separable_set(16, 3, 0.01, 5)
            .into_iter()
            .filter(|w| w.label != Condition::NoFan)
            .collect();
        assert!(matches!(train_convnet(&set, &cfg), Err(Error::Model(_))));
    }

    #[test]
    fn learns_separable_levels_within_twenty_epochs() {
        let cfg = ConvNetConfig {
            epochs: 20,
            batch_size: 16,
            ..ConvNetConfig::desk(32)
        };
        let set = separable_set(32, 40, 0.03, 6);
        let (net, losses) = train_convnet(&set, &cfg).unwrap();
        let report = evaluate(&net, &set).unwrap();
        assert!(
            report.metrics.accuracy >= 0.99,
            "training accuracy {} after {} epochs (final loss {})",
            report.metrics.accuracy,
            cfg.epochs,
            losses.last().unwrap()
        );
    }

    #[test]
    fn loss_descends_monotonically_with_plain_gd() {
        let cfg = ConvNetConfig {
            epochs: 15,
            batch_size: 64,
            learning_rate: 1e-3,
            momentum: 0.0,
            ..ConvNetConfig::desk(16)
        };
        // full-batch descent on a fixed small set
        let set = separable_set(16, 4, 0.05, 7);
        let (_, losses) = train_convnet(&set, &cfg).unwrap();
        for pair in losses.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "loss increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let cfg = ConvNetConfig {
            seed: 11,
            ..ConvNetConfig::desk(16)
        };
        let set = separable_set(16, 2, 0.2, 8);
        let max_rel = gradient_check(&cfg, &set[..4], 6, 1e-3).unwrap();
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        let cfg = ConvNetConfig {
            epochs: 3,
            ..ConvNetConfig::desk(20)
        };
        let set = separable_set(20, 4, 0.05, 9);
        let (net, _) = train_convnet(&set, &cfg).unwrap();
        let dir = std::env::temp_dir().join("cshap_test_ckpt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt");
        net.save_checkpoint(&path).unwrap();
        let loaded = ConvNet::load_checkpoint(&path).unwrap();
        assert_eq!(net, loaded);
        for w in &set {
            assert_eq!(net.predict_proba(w).unwrap(), loaded.predict_proba(w).unwrap());
        }
    }

    #[test]
    fn full_scale_config_validates_without_allocation() {
        let shape = ConvNetConfig::full(100).validate().unwrap();
        assert_eq!(shape.layers.len(), 8);
        // six conv layers driven by the channel-size list
        assert_eq!(shape.layers[0].params, 64 * 2 * 5 + 64);
        assert_eq!(shape.layers[5].params, 256 * 256 * 5 + 256);
        assert_eq!(shape.layers[6].params, 4096 * 256 * 100 + 4096);
        assert!(shape.total_params > 100_000_000);

        let desk = ConvNetConfig::desk(100).validate().unwrap();
        assert_eq!(desk.layers.len(), 5);
        assert!(desk.total_params < 200_000);
    }

    #[test]
    fn config_rejects_even_kernels() {
        let cfg = ConvNetConfig {
            kernel_size: 4,
            ..ConvNetConfig::desk(32)
        };
        assert!(cfg.validate().is_err());
    }
}
