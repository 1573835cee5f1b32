use rand::seq::SliceRandom;

use super::network::{argmax, forward, loss_and_grad_into, Sample};
use super::optim::{Optimizer, OptimizerKind};
use super::params::Parameters;
use super::{Precision, SparseVec};
use crate::error::{Error, Result};
use crate::{par, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub class_weights: Vec<f64>,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub precision: Precision,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize, class_weights: Vec<f64>, seed: u64) -> Self {
        Self {
            learning_rate,
            epochs,
            batch_size: 64,
            class_weights,
            seed,
            optimizer: OptimizerKind::Adam,
            precision: Precision::Double,
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.class_weights.len() != classes {
            return Err(Error::Dimension {
                expected: classes,
                got: self.class_weights.len(),
            });
        }
        if self.class_weights.iter().any(|&w| !(w >= 0.0)) || self.class_weights.iter().all(|&w| w == 0.0) {
            return Err(Error::Config("class weights must be >= 0 and not all zero".into()));
        }
        Ok(())
    }
}

/// Minibatch training; returns the parameters after `config.epochs` epochs.
pub fn train(params: &Parameters, data: &[Sample], config: &TrainConfig) -> Result<Parameters> {
    let mut out = train_snapshots(params, data, config, &[config.epochs])?;
    Ok(out.pop().expect("one snapshot"))
}

/// Trains for the largest requested epoch count and returns the parameters
/// as they were after each entry of `epochs` (in the order given).
///
/// Each epoch reshuffles with the same seeded stream, so the snapshot after
/// `e` epochs is identical to a separate run with `config.epochs = e`.
pub fn train_snapshots(
    params: &Parameters,
    data: &[Sample],
    config: &TrainConfig,
    epochs: &[usize],
) -> Result<Vec<Parameters>> {
    let mut snaps: Vec<Option<Parameters>> = vec![None; epochs.len()];
    let max_epochs = epochs.iter().copied().max().unwrap_or(0);
    train_with(params, data, config, max_epochs, |e, p| {
        for (slot, &want) in snaps.iter_mut().zip(epochs) {
            if want == e {
                *slot = Some(p.clone());
            }
        }
        Ok(())
    })?;
    Ok(snaps.into_iter().map(|s| s.expect("every snapshot taken")).collect())
}

/// Runs `epochs` epochs (ignoring `config.epochs`), calling `on_epoch(e, &p)`
/// for `e = 0` (the initial parameters) and after every epoch.
pub fn train_with<F>(
    params: &Parameters,
    data: &[Sample],
    config: &TrainConfig,
    epochs: usize,
    mut on_epoch: F,
) -> Result<Parameters>
where
    F: FnMut(usize, &Parameters) -> Result<()>,
{
    config.validate(params.dims().classes)?;
    let mut p = params.clone();
    on_epoch(0, &p)?;
    if epochs == 0 {
        return Ok(p);
    }
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let mut r = rng::rng(config.seed);
    let mut opt = Optimizer::new(config.optimizer, p.dims().len());
    let mut grad = vec![0.0; p.dims().len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    for e in 1..=epochs {
        order.shuffle(&mut r);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i]));
            // Batches whose examples all carry zero weight contribute nothing.
            if batch.iter().all(|s| s.weight * config.class_weights[s.label] == 0.0) {
                continue;
            }
            loss_and_grad_into(&p, &batch, &config.class_weights, &mut grad)?;
            opt.step(p.values_mut(), &grad, config.learning_rate);
            if config.precision == Precision::Single {
                p.quantize_f32();
            }
        }
        if !p.is_finite() {
            return Err(Error::NonFinite("parameters"));
        }
        on_epoch(e, &p)?;
    }
    Ok(p)
}

/// Argmax label per input (lowest index on ties).
pub fn predict(params: &Parameters, features: &[SparseVec]) -> Result<Vec<usize>> {
    par::try_map(features, |x| forward(params, x).map(|p| argmax(&p)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
    /// Classes with no examples; their weight is 0.
    pub absent: Vec<usize>,
}

/// Inverse-frequency class weights normalized to mean 1 over present classes.
pub fn class_weights_from(counts: &[usize]) -> ClassWeights {
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    let absent: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] == 0).collect();
    let mut weights = vec![0.0; counts.len()];
    if present.is_empty() {
        return ClassWeights { weights, absent };
    }
    let inv_mean = present.iter().map(|&c| 1.0 / counts[c] as f64).sum::<f64>() / present.len() as f64;
    for &c in &present {
        weights[c] = (1.0 / counts[c] as f64) / inv_mean;
    }
    if !absent.is_empty() {
        log::warn!("classes {absent:?} have no examples; their weight is 0");
    }
    ClassWeights { weights, absent }
}
