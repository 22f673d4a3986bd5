//! MSE loss, reverse-mode gradients through the unrolled network, and ADAM.
//!
//! Gradients are taken with respect to a fixed noise realization; the
//! soft-threshold kink `‖w‖ = λ` and the ReLU kink at 0 both use subgradient 0.

mod adam;
mod grad;
mod gradcheck;

pub use adam::{adam_step, AdamState};
pub use grad::GradientSet;
pub use gradcheck::{finite_difference_gradient, gradient_check, kink_margin, GradCheckReport};

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::complex::ComplexMatrix;
use crate::error::{Error, Result};
use crate::net::{approximation_forward, correction_forward, forward_batch, ForwardTrace, NetworkParams};
use crate::parallel::{map_slice, Execution};
use crate::rng::{split, Purpose, RngStream};
use crate::signal::{gen_noise, Scenario};

/// Denominator of the squared-error loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossNorm {
    /// `1/(N·I)`.
    #[default]
    PerRow,
    /// `1/(N·M·I)`.
    PerEntry,
}

impl LossNorm {
    fn denom(self, n: usize, m: usize, samples: usize) -> f64 {
        match self {
            LossNorm::PerRow => (n * samples) as f64,
            LossNorm::PerEntry => (n * m * samples) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Number of training samples I.
    #[serde(rename = "I")]
    pub samples: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub project_columns: bool,
    /// When false the encoder (and so the pilots) stays fixed.
    pub train_encoder: bool,
    pub fd_epsilon: f64,
    pub seed: u64,
    /// Validation samples scored after every epoch; 0 disables.
    pub eval_samples: usize,
    /// Write a checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    pub loss: LossNorm,
    pub execution: Execution,
    /// Samples per gradient task inside a batch.
    pub chunk: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            samples: 50_000,
            batch_size: 64,
            epochs: 10,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            project_columns: true,
            train_encoder: true,
            fd_epsilon: 1e-6,
            seed: 0,
            eval_samples: 100,
            checkpoint_every: 0,
            loss: LossNorm::PerRow,
            execution: Execution::Parallel,
            chunk: 16,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.beta1) {
            return Err(Error::config("train.beta1", "must lie in (0, 1)"));
        }
        if !open_unit(self.beta2) {
            return Err(Error::config("train.beta2", "must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("train.epsilon", "must be positive"));
        }
        if !(self.fd_epsilon > 0.0 && self.fd_epsilon.is_finite()) {
            return Err(Error::config("train.fd_epsilon", "must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > self.samples {
            return Err(Error::config(
                "train.batch_size",
                format!("{} must be in 1..={}", self.batch_size, self.samples),
            ));
        }
        if self.chunk == 0 {
            return Err(Error::config("train.chunk", "must be positive"));
        }
        Ok(())
    }
}

/// `(1/(N·I)) Σᵢ ‖X⁽ⁱ⁾ − X̂⁽ⁱ⁾‖²_F`.
pub fn mse_loss(x_true: &[ComplexMatrix], x_hat: &[ComplexMatrix]) -> Result<f64> {
    mse_loss_with(x_true, x_hat, LossNorm::PerRow)
}

pub fn mse_loss_with(x_true: &[ComplexMatrix], x_hat: &[ComplexMatrix], norm: LossNorm) -> Result<f64> {
    if x_true.len() != x_hat.len() || x_true.is_empty() {
        return Err(Error::shape("mse_loss batch", (x_true.len(), 0), (x_hat.len(), 0)));
    }
    let (n, m) = x_true[0].dim();
    let mut total = 0.0;
    for (a, b) in x_true.iter().zip(x_hat) {
        if a.dim() != (n, m) {
            return Err(Error::shape("mse_loss", (n, m), a.dim()));
        }
        total += a.sub(b)?.frobenius_norm_sq();
    }
    Ok(total / norm.denom(n, m, x_true.len()))
}

/// Gradient of [`mse_loss`] over the batch of the given forward pass.
pub fn backward(params: &NetworkParams, x_true: &ComplexMatrix, trace: &ForwardTrace) -> Result<GradientSet> {
    backward_with(params, x_true, trace, LossNorm::PerRow)
}

pub fn backward_with(
    params: &NetworkParams,
    x_true: &ComplexMatrix,
    trace: &ForwardTrace,
    norm: LossNorm,
) -> Result<GradientSet> {
    let arch = &params.arch;
    grad::backward_scaled(params, x_true, trace, norm.denom(arch.n, arch.m, trace.batch))
}

/// The encoder weights as a measurement matrix.
pub fn extract_measurement_matrix(params: &NetworkParams) -> ComplexMatrix {
    params.a.clone()
}

/// Network estimates for the given signals and noise realizations, computed
/// in batches of `chunk` samples.
pub fn predict(
    params: &NetworkParams,
    xs: &[ComplexMatrix],
    noises: &[ComplexMatrix],
    exec: Execution,
    chunk: usize,
) -> Result<Vec<ComplexMatrix>> {
    if xs.len() != noises.len() {
        return Err(Error::shape("predict", (xs.len(), 0), (noises.len(), 0)));
    }
    let ys = xs
        .iter()
        .zip(noises)
        .map(|(x, z)| params.a.matmul(x)?.add(z))
        .collect::<Result<Vec<_>>>()?;
    decode(params, &ys, exec, chunk)
}

/// Decoder output (approximation then correction part) for each measurement.
pub fn decode(params: &NetworkParams, ys: &[ComplexMatrix], exec: Execution, chunk: usize) -> Result<Vec<ComplexMatrix>> {
    let m = params.arch.m;
    let ranges = chunk_ranges(ys.len(), chunk.max(1));
    let parts = map_slice(exec, &ranges, |&(lo, hi)| -> Result<Vec<ComplexMatrix>> {
        let y = ComplexMatrix::hstack(&ys[lo..hi])?;
        let state = approximation_forward(params, &y)?;
        let out = correction_forward(params, &state)?;
        Ok((0..hi - lo).map(|b| out.column_block(b * m, m)).collect())
    });
    let mut out = Vec::with_capacity(ys.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

fn chunk_ranges(len: usize, chunk: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(chunk))
        .map(|c| (c * chunk, ((c + 1) * chunk).min(len)))
        .collect()
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's mini-batches, evaluated before each update.
    pub train_loss: f64,
    /// Validation MSE after the epoch, if enabled.
    pub eval_mse: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub params: NetworkParams,
    pub curve: Vec<EpochRecord>,
}

/// Training signal `i`, drawn from the scenario's distribution.
pub fn training_sample(scenario: &Scenario, seed: u64, i: usize) -> Result<ComplexMatrix> {
    scenario.signal(seed, split::TRAIN + i as u64)
}

/// Validation signals with fixed noise draws.
pub fn validation_set(scenario: &Scenario, seed: u64, count: usize) -> Result<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
    let xs = (0..count)
        .map(|i| scenario.signal(seed, split::VALIDATION + i as u64))
        .collect::<Result<Vec<_>>>()?;
    let zs = (0..count)
        .map(|i| scenario.noise_draw(seed, split::VALIDATION + i as u64))
        .collect();
    Ok((xs, zs))
}

pub fn train(params: NetworkParams, scenario: &Scenario, cfg: &TrainingConfig) -> Result<TrainingOutcome> {
    train_observed(params, scenario, cfg, &mut |_, _| Ok(()))
}

/// Mini-batch ADAM over `cfg.samples` signals; `on_epoch` runs after every
/// epoch with the updated parameters.
pub fn train_observed(
    mut params: NetworkParams,
    scenario: &Scenario,
    cfg: &TrainingConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord, &NetworkParams) -> Result<()>,
) -> Result<TrainingOutcome> {
    cfg.validate()?;
    scenario.validate()?;
    let arch = params.arch;
    if (scenario.n(), scenario.l, scenario.m) != (arch.n, arch.l, arch.m) {
        return Err(Error::config(
            "net",
            format!(
                "network is N={} L={} M={} but the scenario is N={} L={} M={}",
                arch.n, arch.l, arch.m, scenario.n(), scenario.l, scenario.m
            ),
        ));
    }
    params.check_shapes()?;
    let validation = if cfg.eval_samples > 0 {
        Some(validation_set(scenario, cfg.seed, cfg.eval_samples)?)
    } else {
        None
    };

    let start = Instant::now();
    let mut adam = AdamState::new(params.num_params());
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..cfg.samples).collect();
    let epoch_denom = cfg.loss.denom(arch.n, arch.m, cfg.samples);

    for epoch in 1..=cfg.epochs {
        let mut rng = RngStream::for_purpose(cfg.seed, Purpose::Shuffle, epoch as u64).rng();
        order.shuffle(&mut rng);
        let mut sq_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let denom = cfg.loss.denom(arch.n, arch.m, batch.len());
            let (sq, grads) = batch_gradient(&params, scenario, cfg, epoch, batch, denom)?;
            if !sq.is_finite() {
                return Err(Error::Numeric {
                    stage: "train",
                    iteration: epoch,
                });
            }
            sq_total += sq;
            adam_step(&mut params, &grads, cfg, &mut adam);
        }
        let train_loss = sq_total / epoch_denom;
        let eval_mse = match &validation {
            Some((xs, zs)) => {
                let est = predict(&params, xs, zs, cfg.execution, cfg.chunk)?;
                Some(mse_loss_with(xs, &est, cfg.loss)?)
            }
            None => None,
        };
        if !train_loss.is_finite() || eval_mse.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                stage: "train",
                iteration: epoch,
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            eval_mse,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record, &params)?;
        curve.push(record);
    }
    Ok(TrainingOutcome { params, curve })
}

/// Summed squared error and loss gradient of one mini-batch, with fresh noise
/// for every sample. Chunks are reduced in a fixed order.
fn batch_gradient(
    params: &NetworkParams,
    scenario: &Scenario,
    cfg: &TrainingConfig,
    epoch: usize,
    batch: &[usize],
    denom: f64,
) -> Result<(f64, GradientSet)> {
    let ranges = chunk_ranges(batch.len(), cfg.chunk);
    let parts = map_slice(cfg.execution, &ranges, |&(lo, hi)| -> Result<(f64, GradientSet)> {
        let idx = &batch[lo..hi];
        let xs = idx
            .iter()
            .map(|&i| training_sample(scenario, cfg.seed, i))
            .collect::<Result<Vec<_>>>()?;
        let zs: Vec<_> = idx
            .iter()
            .map(|&i| {
                let stream = RngStream::for_purpose(
                    cfg.seed,
                    Purpose::TrainNoise,
                    ((epoch - 1) * cfg.samples + i) as u64,
                );
                gen_noise(scenario.l, scenario.m, scenario.noise, stream)
            })
            .collect();
        let x = ComplexMatrix::hstack(&xs)?;
        let z = ComplexMatrix::hstack(&zs)?;
        let trace = forward_batch(params, &x, &z)?;
        let sq = trace.x_hat.sub(&x)?.frobenius_norm_sq();
        let g = grad::backward_scaled(params, &x, &trace, denom)?;
        Ok((sq, g))
    });
    let mut total = GradientSet::zeros_like(params);
    let mut sq = 0.0;
    for part in parts {
        let (s, g) = part?;
        sq += s;
        total.add_assign(&g);
    }
    Ok((sq, total))
}
