//! Feedforward policy network and the scaling wrapper that deploys it.
//!
//! The network approximates the fixed-horizon map from a canonical state
//! `(X, Y, Theta)` to the optimal control there. Architecture is fixed at
//! 3-20-20-1 with tanh hidden activations; inputs and the output are
//! standardized with statistics baked into the saved model. Training is plain
//! minibatch gradient descent with momentum and step decay, implemented here.
//!
//! Deployment relies on the time-scaling invariance of the optimal feedback:
//! `u*(t_g, x, y, theta) = (T/t_g) * N((T/t_g) x, (T/t_g) y, theta)`,
//! so one network trained at horizon `T` serves every time-to-go.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::model::wrap_angle;

/// Fixed layer sizes of the policy network.
pub const ARCH: [usize; 4] = [3, 20, 20, 1];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    #[serde(rename = "W")]
    pub weights: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            weights: vec![vec![0.0; inputs]; outputs],
            bias: vec![0.0; outputs],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputNormalization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OutputNormalization {
    pub shift: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyNetwork {
    pub arch: Vec<usize>,
    pub activation: String,
    /// Reference horizon the training data was sampled at.
    #[serde(rename = "T")]
    pub reference_horizon: f64,
    pub input_norm: InputNormalization,
    pub output_norm: OutputNormalization,
    pub layers: Vec<Layer>,
}

impl PolicyNetwork {
    /// A zero-weight network with identity normalization, mostly for tests
    /// and as the starting point of training.
    pub fn zeros(reference_horizon: f64) -> Self {
        Self {
            arch: ARCH.to_vec(),
            activation: "tanh".into(),
            reference_horizon,
            input_norm: InputNormalization {
                shift: vec![0.0; 3],
                scale: vec![1.0; 3],
            },
            output_norm: OutputNormalization {
                shift: 0.0,
                scale: 1.0,
            },
            layers: vec![
                Layer::zeros(ARCH[1], ARCH[0]),
                Layer::zeros(ARCH[2], ARCH[1]),
                Layer::zeros(ARCH[3], ARCH[2]),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arch != ARCH {
            return Err(Error::SchemaMismatch(format!(
                "expected arch {:?}, found {:?}",
                ARCH, self.arch
            )));
        }
        if self.activation != "tanh" {
            return Err(Error::SchemaMismatch(format!(
                "unsupported activation `{}`",
                self.activation
            )));
        }
        if !(self.reference_horizon > 0.0) {
            return Err(Error::SchemaMismatch(format!(
                "reference horizon must be positive, got {}",
                self.reference_horizon
            )));
        }
        if self.input_norm.shift.len() != 3 || self.input_norm.scale.len() != 3 {
            return Err(Error::SchemaMismatch(
                "input normalization must have 3 entries".into(),
            ));
        }
        if self.layers.len() != 3 {
            return Err(Error::SchemaMismatch(format!(
                "expected 3 layers, found {}",
                self.layers.len()
            )));
        }
        for (idx, layer) in self.layers.iter().enumerate() {
            let (outputs, inputs) = (ARCH[idx + 1], ARCH[idx]);
            if layer.weights.len() != outputs
                || layer.weights.iter().any(|row| row.len() != inputs)
                || layer.bias.len() != outputs
            {
                return Err(Error::SchemaMismatch(format!(
                    "layer {idx} must be {outputs}x{inputs} with {outputs} biases"
                )));
            }
        }
        Ok(())
    }

    /// Normalized forward pass returning the pre-denormalization output and
    /// all layer activations (for backpropagation).
    fn forward_normalized(&self, input: [f64; 3]) -> ([Vec<f64>; 3], f64) {
        let v: Vec<f64> = (0..3)
            .map(|i| (input[i] - self.input_norm.shift[i]) / self.input_norm.scale[i])
            .collect();
        let h1 = affine_tanh(&self.layers[0], &v);
        let h2 = affine_tanh(&self.layers[1], &h1);
        let out = affine(&self.layers[2], &h2);
        ([v, h1, h2], out[0])
    }

    /// Evaluate the network at a canonical state. Deterministic, no state.
    pub fn forward(&self, state: [f64; 3]) -> f64 {
        let wrapped = [state[0], state[1], wrap_angle(state[2])];
        let (_, y) = self.forward_normalized(wrapped);
        y * self.output_norm.scale + self.output_norm.shift
    }

    /// Full feedback law: scale the state to the reference horizon, query
    /// the network, and scale the control back.
    pub fn feedback_control(&self, time_to_go: f64, state: &crate::model::EngagementState) -> Result<f64> {
        if !(time_to_go > 0.0) {
            return Err(Error::ExpiredHorizon(time_to_go));
        }
        let lambda = self.reference_horizon / time_to_go;
        let u = self.forward([lambda * state.x, lambda * state.y, state.theta]);
        Ok(lambda * u)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let net: PolicyNetwork = serde_json::from_str(&text)?;
        net.validate()?;
        Ok(net)
    }

    /// Flatten all weights and biases, layer by layer, row-major.
    pub fn parameter_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for row in &layer.weights {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_parameter_vector(&mut self, params: &[f64]) {
        let mut cursor = 0;
        for layer in &mut self.layers {
            for row in &mut layer.weights {
                let len = row.len();
                row.copy_from_slice(&params[cursor..cursor + len]);
                cursor += len;
            }
            let len = layer.bias.len();
            layer.bias.copy_from_slice(&params[cursor..cursor + len]);
            cursor += len;
        }
        assert_eq!(cursor, params.len(), "parameter vector length mismatch");
    }
}

fn affine(layer: &Layer, input: &[f64]) -> Vec<f64> {
    layer
        .weights
        .iter()
        .zip(&layer.bias)
        .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
        .collect()
}

fn affine_tanh(layer: &Layer, input: &[f64]) -> Vec<f64> {
    affine(layer, input).into_iter().map(f64::tanh).collect()
}

/// Mean squared error over normalized targets, plus its gradient with respect
/// to the flattened parameter vector. This is the quantity training descends.
pub fn batch_mse_and_gradient(
    net: &PolicyNetwork,
    batch: &[([f64; 3], f64)],
) -> (f64, Vec<f64>) {
    let mut grads: Vec<Layer> = net
        .layers
        .iter()
        .map(|l| Layer::zeros(l.weights.len(), l.weights[0].len()))
        .collect();
    let mut loss = 0.0;
    let count = batch.len().max(1) as f64;

    for (input, target) in batch {
        let wrapped = [input[0], input[1], wrap_angle(input[2])];
        let target_norm = (target - net.output_norm.shift) / net.output_norm.scale;
        let (acts, y) = net.forward_normalized(wrapped);
        let err = y - target_norm;
        loss += err * err / count;

        // Output layer (linear).
        let dl_dy = 2.0 * err / count;
        let [v, h1, h2] = acts;
        for (w, x) in grads[2].weights[0].iter_mut().zip(&h2) {
            *w += dl_dy * x;
        }
        grads[2].bias[0] += dl_dy;

        // Hidden layer 2 (tanh).
        let mut dh2: Vec<f64> = net.layers[2].weights[0]
            .iter()
            .map(|w| dl_dy * w)
            .collect();
        for (d, h) in dh2.iter_mut().zip(&h2) {
            *d *= 1.0 - h * h;
        }
        for (row, &d) in grads[1].weights.iter_mut().zip(&dh2) {
            for (w, x) in row.iter_mut().zip(&h1) {
                *w += d * x;
            }
        }
        for (b, &d) in grads[1].bias.iter_mut().zip(&dh2) {
            *b += d;
        }

        // Hidden layer 1 (tanh).
        let mut dh1 = vec![0.0; h1.len()];
        for (j, &d) in dh2.iter().enumerate() {
            for (k, slot) in dh1.iter_mut().enumerate() {
                *slot += d * net.layers[1].weights[j][k];
            }
        }
        for (d, h) in dh1.iter_mut().zip(&h1) {
            *d *= 1.0 - h * h;
        }
        for (row, &d) in grads[0].weights.iter_mut().zip(&dh1) {
            for (w, x) in row.iter_mut().zip(&v) {
                *w += d * x;
            }
        }
        for (b, &d) in grads[0].bias.iter_mut().zip(&dh1) {
            *b += d;
        }
    }

    let mut flat = Vec::new();
    for layer in &grads {
        for row in &layer.weights {
            flat.extend_from_slice(row);
        }
        flat.extend_from_slice(&layer.bias);
    }
    (loss, flat)
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Learning rate is multiplied by `lr_decay` every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            batch_size: 64,
            learning_rate: 0.05,
            momentum: 0.9,
            lr_decay: 0.5,
            decay_every: 80,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::InvalidConfig(
                "learning rate must be positive and momentum in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// One epoch of the loss history.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
}

/// Everything train returns besides the network itself.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    /// Denormalized RMSE of the best epoch on the held-out split.
    pub validation_rmse: f64,
    /// Standard deviation of the control over the full dataset.
    pub control_std: f64,
    pub best_epoch: usize,
    pub train_count: usize,
    pub validation_count: usize,
}

/// FNV-1a over the raw bits of the provenance triple; deterministic across
/// platforms and releases, unlike the std hasher.
fn provenance_hash(params: &crate::extremal::CostateParams, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for bits in [
        params.p_x.to_bits(),
        params.p_y.to_bits(),
        params.c_0.to_bits(),
    ] {
        for byte in bits.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn split_records(
    records: &[DatasetRecord],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let threshold = (fraction * 4096.0) as u64;
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (idx, rec) in records.iter().enumerate() {
        if provenance_hash(&rec.params, seed) % 4096 < threshold {
            val.push(idx);
        } else {
            train.push(idx);
        }
    }
    if train.is_empty() || val.is_empty() {
        // Duplicate provenance can collapse the hash split; fall back to a
        // positional split so tiny or degenerate datasets still train.
        let cut = ((records.len() as f64) * (1.0 - fraction)).ceil() as usize;
        let cut = cut.clamp(1, records.len().saturating_sub(1).max(1));
        train = (0..cut).collect();
        val = (cut..records.len()).collect();
    }
    (train, val)
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut n, mut mean) = (0usize, 0.0);
    for v in values.clone() {
        n += 1;
        mean += v;
    }
    if n == 0 {
        return (0.0, 1.0);
    }
    mean /= n as f64;
    let var: f64 = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

fn safe_scale(std: f64) -> f64 {
    if std > 1e-9 {
        std
    } else {
        1.0
    }
}

fn mse_on(net: &PolicyNetwork, samples: &[([f64; 3], f64)]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for (input, target) in samples {
        let target_norm = (target - net.output_norm.shift) / net.output_norm.scale;
        let wrapped = [input[0], input[1], wrap_angle(input[2])];
        let (_, y) = net.forward_normalized(wrapped);
        acc += (y - target_norm) * (y - target_norm);
    }
    acc / samples.len() as f64
}

/// Train a policy network on dataset records. Returns the weights of the
/// best validation epoch.
pub fn train(
    records: &[DatasetRecord],
    horizon: f64,
    cfg: &TrainConfig,
) -> Result<(PolicyNetwork, TrainReport)> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::InvalidConfig("training dataset is empty".into()));
    }

    let (train_idx, val_idx) = split_records(records, cfg.validation_fraction, cfg.seed);
    if train_idx.len() < cfg.batch_size {
        return Err(Error::InvalidConfig(format!(
            "training split ({} records) is smaller than the batch size ({})",
            train_idx.len(),
            cfg.batch_size
        )));
    }

    let sample = |idx: &usize| -> ([f64; 3], f64) {
        let rec = &records[*idx];
        (
            [rec.state[0], rec.state[1], wrap_angle(rec.state[2])],
            rec.control,
        )
    };
    let train_set: Vec<([f64; 3], f64)> = train_idx.iter().map(sample).collect();
    let val_set: Vec<([f64; 3], f64)> = val_idx.iter().map(sample).collect();

    let mut net = PolicyNetwork::zeros(horizon);
    for feature in 0..3 {
        let (mean, std) = mean_std(train_set.iter().map(move |(z, _)| z[feature]));
        net.input_norm.shift[feature] = mean;
        net.input_norm.scale[feature] = safe_scale(std);
    }
    let (u_mean, u_std) = mean_std(train_set.iter().map(|(_, u)| *u));
    net.output_norm = OutputNormalization {
        shift: u_mean,
        scale: safe_scale(u_std),
    };

    // Uniform Glorot initialization.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for layer in &mut net.layers {
        let (fan_out, fan_in) = (layer.weights.len(), layer.weights[0].len());
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for row in &mut layer.weights {
            for w in row.iter_mut() {
                *w = rng.random_range(-bound..bound);
            }
        }
    }

    let mut params = net.parameter_vector();
    let mut velocity = vec![0.0; params.len()];
    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.lr_decay.powi((epoch / cfg.decay_every.max(1)) as i32);
        // Fisher-Yates shuffle, seeded.
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut train_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<([f64; 3], f64)> = chunk.iter().map(|&i| train_set[i]).collect();
            net.set_parameter_vector(&params);
            let (loss, grad) = batch_mse_and_gradient(&net, &batch);
            train_loss += loss;
            batches += 1;
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - lr * g;
                *p += *v;
            }
        }
        net.set_parameter_vector(&params);
        let val_mse = mse_on(&net, &val_set);
        history.push(EpochStats {
            epoch,
            train_mse: train_loss / batches.max(1) as f64,
            validation_mse: val_mse,
        });
        if val_mse < best_val {
            best_val = val_mse;
            best_params = params.clone();
            best_epoch = epoch;
        }
    }

    net.set_parameter_vector(&best_params);
    let (_, control_std) = mean_std(records.iter().map(|r| r.control));
    let report = TrainReport {
        history,
        validation_rmse: best_val.sqrt() * net.output_norm.scale,
        control_std,
        best_epoch,
        train_count: train_set.len(),
        validation_count: val_set.len(),
    };
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::CostateParams;
    use crate::model::EngagementState;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn straight_record() -> DatasetRecord {
        DatasetRecord {
            state: [0.0, 1.5, -FRAC_PI_2],
            control: 0.0,
            params: CostateParams::new(0.0, 0.0, 0.0),
        }
    }

    #[test]
    fn zero_network_outputs_the_normalization_shift() {
        let mut net = PolicyNetwork::zeros(1.5);
        net.output_norm.shift = 2.5;
        for z in [[0.0, 0.0, 0.0], [1.0, -3.0, 0.7], [-0.4, 1.2, -2.9]] {
            assert_eq!(net.forward(z), 2.5);
        }
    }

    #[test]
    fn feedback_at_reference_horizon_is_plain_forward() {
        let mut net = PolicyNetwork::zeros(1.5);
        net.output_norm.shift = 1.0;
        let z = EngagementState::new(0.3, 0.8, -1.2);
        let u = net.feedback_control(1.5, &z).unwrap();
        assert_relative_eq!(u, net.forward([z.x, z.y, z.theta]));
    }

    #[test]
    fn feedback_rejects_expired_horizon() {
        let net = PolicyNetwork::zeros(1.5);
        let z = EngagementState::new(0.0, 1.0, 0.0);
        assert!(matches!(
            net.feedback_control(0.0, &z),
            Err(Error::ExpiredHorizon(_))
        ));
        assert!(net.feedback_control(-1.0, &z).is_err());
    }

    #[test]
    fn constant_dataset_trains_to_tiny_rmse() {
        let records = vec![straight_record(); 100];
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let (net, report) = train(&records, 1.5, &cfg).unwrap();
        assert!(
            report.validation_rmse < 1e-3,
            "rmse = {}",
            report.validation_rmse
        );
        assert!(net.forward([0.0, 1.5, -FRAC_PI_2]).abs() < 1e-2);
    }

    #[test]
    fn training_is_deterministic() {
        let mut records = Vec::new();
        for i in 0..200 {
            let x = (i as f64) / 200.0 - 0.5;
            records.push(DatasetRecord {
                state: [x, 1.0 + x * x, -FRAC_PI_2 + 0.3 * x],
                control: (3.0 * x).sin(),
                params: CostateParams::new(x, -x, 0.1 * x),
            });
        }
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let (net1, _) = train(&records, 1.5, &cfg).unwrap();
        let (net2, _) = train(&records, 1.5, &cfg).unwrap();
        for (a, b) in net1
            .parameter_vector()
            .iter()
            .zip(net2.parameter_vector().iter())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut records = Vec::new();
        for i in 0..10 {
            let x = i as f64 * 0.13 - 0.6;
            records.push(DatasetRecord {
                state: [x, 1.2 - 0.2 * x, -1.5 + 0.4 * x],
                control: 2.0 * x * x - 1.0,
                params: CostateParams::new(x, 2.0 * x, -x),
            });
        }
        let batch: Vec<([f64; 3], f64)> = records
            .iter()
            .map(|r| ([r.state[0], r.state[1], r.state[2]], r.control))
            .collect();

        let mut net = PolicyNetwork::zeros(1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = net.parameter_vector();
        for p in params.iter_mut() {
            *p = rng.random_range(-0.5..0.5);
        }
        net.set_parameter_vector(&params);
        net.output_norm = OutputNormalization { shift: 0.2, scale: 1.7 };

        let (_, grad) = batch_mse_and_gradient(&net, &batch);
        let eps = 1e-6;
        for k in 0..params.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut pp = params.clone();
            let mut pm = params.clone();
            pp[k] += eps;
            pm[k] -= eps;
            plus.set_parameter_vector(&pp);
            minus.set_parameter_vector(&pm);
            let (lp, _) = batch_mse_and_gradient(&plus, &batch);
            let (lm, _) = batch_mse_and_gradient(&minus, &batch);
            let fd = (lp - lm) / (2.0 * eps);
            let scale = fd.abs().max(1e-6);
            assert!(
                (grad[k] - fd).abs() <= 1e-5 * scale,
                "param {k}: grad = {}, fd = {fd}",
                grad[k]
            );
        }
    }

    #[test]
    fn save_load_round_trip_preserves_forward_pass() {
        let mut net = PolicyNetwork::zeros(1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut params = net.parameter_vector();
        for p in params.iter_mut() {
            *p = rng.random_range(-1.0..1.0);
        }
        net.set_parameter_vector(&params);
        net.input_norm.shift = vec![0.1, -0.2, 0.3];
        net.input_norm.scale = vec![0.9, 1.1, 0.8];
        net.output_norm = OutputNormalization { shift: -0.4, scale: 3.2 };

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.json");
        net.save(&path).unwrap();
        let loaded = PolicyNetwork::load(&path).unwrap();
        for _ in 0..100 {
            let z = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-3.0..3.0),
            ];
            assert_eq!(net.forward(z).to_bits(), loaded.forward(z).to_bits());
        }
    }

    #[test]
    fn tampered_arch_is_rejected_on_load() {
        let net = PolicyNetwork::zeros(1.5);
        let mut value = serde_json::to_value(&net).unwrap();
        value["arch"] = serde_json::json!([3, 21, 20, 1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tampered.json");
        std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        assert!(matches!(
            PolicyNetwork::load(&path),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn config_errors() {
        let records = vec![straight_record(); 5];
        let cfg = TrainConfig {
            batch_size: 64,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&records, 1.5, &cfg),
            Err(Error::InvalidConfig(_))
        ));
        assert!(train(&[], 1.5, &TrainConfig::default()).is_err());
        let bad = TrainConfig {
            validation_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
