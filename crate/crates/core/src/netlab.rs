//! Forward evaluation, Adam training and rank reduction for bias-free nets.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[allow(unused_imports)]
use num_traits::Float;
use crate::dataset::DeerDataset;
use crate::error::{shape_err, Error, Result};
use crate::linalg::Svd;
use crate::matrix::DenseMatrix;
use crate::network::{Activation, FeedForwardNet, Layer};

pub(crate) fn apply_layer(layer: &Layer, signal: &DenseMatrix) -> DenseMatrix {
    let act = layer.activation;
    layer.weights.mul_unchecked(signal).map(|v| act.apply(v))
}

pub fn forward(net: &FeedForwardNet, x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.rows() != net.input_dim() {
        return Err(shape_err!("inputs have {} rows, network takes {}", x.rows(), net.input_dim()));
    }
    let mut signal = x.clone();
    for layer in net.layers() {
        signal = apply_layer(layer, &signal);
    }
    Ok(signal)
}

/// Outputs of every layer, input first.
fn forward_trace(net: &FeedForwardNet, x: &DenseMatrix) -> Vec<DenseMatrix> {
    let mut outs = Vec::with_capacity(net.depth() + 1);
    outs.push(x.clone());
    for layer in net.layers() {
        let next = apply_layer(layer, outs.last().expect("non-empty"));
        outs.push(next);
    }
    outs
}

/// Mean of squared residuals over all entries.
pub fn mse(y: &DenseMatrix, t: &DenseMatrix) -> f64 {
    let n = y.as_slice().len() as f64;
    y.as_slice().iter().zip(t.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

/// Loss and its gradient with respect to every weight matrix.
pub fn mse_gradient(net: &FeedForwardNet, x: &DenseMatrix, t: &DenseMatrix) -> Result<(f64, Vec<DenseMatrix>)> {
    if x.rows() != net.input_dim() || t.rows() != net.output_dim() || x.cols() != t.cols() {
        return Err(shape_err!(
            "inputs {:?} / targets {:?} do not fit a {}→{} network",
            x.shape(),
            t.shape(),
            net.input_dim(),
            net.output_dim()
        ));
    }
    let outs = forward_trace(net, x);
    let y = outs.last().expect("non-empty");
    let loss = mse(y, t);
    let scale = 2.0 / y.as_slice().len() as f64;
    let mut delta = DenseMatrix::from_fn(y.rows(), y.cols(), |i, j| {
        let yij = y.get(i, j);
        scale * (yij - t.get(i, j)) * net.layers()[net.depth() - 1].activation.derivative_from_output(yij)
    });
    let mut grads = alloc::vec![DenseMatrix::zeros(1, 1); net.depth()];
    for k in (0..net.depth()).rev() {
        grads[k] = delta.mul_unchecked(&outs[k].transpose());
        if k > 0 {
            let back = net.layers()[k].weights.transpose().mul_unchecked(&delta);
            let act = net.layers()[k - 1].activation;
            let h = &outs[k];
            delta = DenseMatrix::from_fn(back.rows(), back.cols(), |i, j| {
                back.get(i, j) * act.derivative_from_output(h.get(i, j))
            });
        }
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0 < self.adam_beta1 && self.adam_beta1 < 1.0 && 0.0 < self.adam_beta2 && self.adam_beta2 < 1.0) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config("Adam epsilon must be positive".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return Err(Error::Config(format!(
                "validation fraction {} outside (0, 0.5)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub config: TrainConfig,
    /// Losses before the first epoch.
    pub initial_train_loss: f64,
    pub initial_validation_loss: f64,
    /// Full-set losses after each epoch.
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub n_train: usize,
    pub n_validation: usize,
}

impl TrainReport {
    pub fn final_validation_loss(&self) -> f64 {
        self.validation_loss.last().copied().unwrap_or(self.initial_validation_loss)
    }
}

/// Glorot-uniform weights, drawn layer by layer in row-major order.
pub fn glorot_init(input_dim: usize, topology: &[(usize, Activation)], rng: &mut ChaCha8Rng) -> Result<FeedForwardNet> {
    let mut fan_in = input_dim;
    let mut layers = Vec::with_capacity(topology.len());
    for &(fan_out, act) in topology {
        if fan_out == 0 || fan_in == 0 {
            return Err(Error::Structure("layer dimensions must be positive".into()));
        }
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = DenseMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit));
        layers.push(Layer::new(w, act));
        fan_in = fan_out;
    }
    FeedForwardNet::new(layers)
}

/// Trains on a DEER dataset: traces in, distance distributions out.
/// `topology` lists `(output dim, activation)` per layer.
pub fn train(
    topology: &[(usize, Activation)],
    data: &DeerDataset,
    cfg: &TrainConfig,
) -> Result<(FeedForwardNet, TrainReport)> {
    match topology.last() {
        Some(&(out, _)) if out == data.dist_grid.len() => {}
        _ => {
            return Err(Error::Structure(format!(
                "network output must match the {}-point distance grid",
                data.dist_grid.len()
            )))
        }
    }
    train_on(topology, &data.inputs, &data.targets, cfg)
}

/// Mean-squared-error regression of `targets` (columns) on `inputs`.
pub fn train_on(
    topology: &[(usize, Activation)],
    inputs: &DenseMatrix,
    targets: &DenseMatrix,
    cfg: &TrainConfig,
) -> Result<(FeedForwardNet, TrainReport)> {
    cfg.validate()?;
    if inputs.cols() != targets.cols() {
        return Err(shape_err!("{} inputs but {} targets", inputs.cols(), targets.cols()));
    }
    let n = inputs.cols();
    if n < 2 {
        return Err(Error::Size("training needs at least 2 examples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = glorot_init(inputs.rows(), topology, &mut rng)?;
    if net.output_dim() != targets.rows() {
        return Err(Error::Structure(format!(
            "network outputs {} values, targets have {}",
            net.output_dim(),
            targets.rows()
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let (x_val, t_val) = (inputs.select_cols(val_idx), targets.select_cols(val_idx));
    let (x_tr, t_tr) = (inputs.select_cols(&train_idx), targets.select_cols(&train_idx));

    let full_loss = |net: &FeedForwardNet, x: &DenseMatrix, t: &DenseMatrix| -> Result<f64> {
        Ok(mse(&forward(net, x)?, t))
    };
    let mut report = TrainReport {
        config: *cfg,
        initial_train_loss: full_loss(&net, &x_tr, &t_tr)?,
        initial_validation_loss: full_loss(&net, &x_val, &t_val)?,
        train_loss: Vec::with_capacity(cfg.epochs),
        validation_loss: Vec::with_capacity(cfg.epochs),
        n_train: train_idx.len(),
        n_validation: n_val,
    };

    let mut m: Vec<DenseMatrix> = net.layers().iter().map(|l| DenseMatrix::zeros(l.weights.rows(), l.weights.cols())).collect();
    let mut v = m.clone();
    let mut step = 0i32;
    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(cfg.batch_size) {
            let (loss, grads) = mse_gradient(&net, &inputs.select_cols(batch), &targets.select_cols(batch))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            step += 1;
            let bc1 = 1.0 - cfg.adam_beta1.powi(step);
            let bc2 = 1.0 - cfg.adam_beta2.powi(step);
            for (k, layer) in net.layers_mut().iter_mut().enumerate() {
                let g = grads[k].as_slice();
                let (mk, vk) = (m[k].data_mut(), v[k].data_mut());
                for (i, w) in layer.weights.data_mut().iter_mut().enumerate() {
                    mk[i] = cfg.adam_beta1 * mk[i] + (1.0 - cfg.adam_beta1) * g[i];
                    vk[i] = cfg.adam_beta2 * vk[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
                    *w -= cfg.learning_rate * (mk[i] / bc1) / ((vk[i] / bc2).sqrt() + cfg.adam_eps);
                }
            }
        }
        let tl = full_loss(&net, &x_tr, &t_tr)?;
        let vl = full_loss(&net, &x_val, &t_val)?;
        if !(tl.is_finite() && vl.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        report.train_loss.push(tl);
        report.validation_loss.push(vl);
    }
    Ok((net, report))
}

/// Best rank-`rank` approximation in the Frobenius norm.
pub fn svd_truncate(w: &DenseMatrix, rank: usize) -> Result<DenseMatrix> {
    let max = w.rows().min(w.cols());
    if rank == 0 || rank > max {
        return Err(Error::Size(format!("rank {rank} outside 1..={max}")));
    }
    Ok(Svd::new(w).reconstruct(rank))
}
