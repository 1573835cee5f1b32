//! First-order meta-training over analogy tasks.
//!
//! Each meta-iteration draws a batch of tasks, adapts a copy of the
//! meta-parameters to every task with a few optimizer steps, and moves the
//! meta-parameters toward the mean of the adapted copies:
//!
//! ```text
//! θ ← θ + β · mean_i(θ_i − θ)
//! ```

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cluster::LabelSubsets;
use crate::error::{Error, Result};
use crate::model::{
    loss_and_grad_into, Featurized, Optimizer, OptimizerKind, Parameters, Precision, Sample,
};
use crate::tasks::{materialize, meta_sample_weights, SamplerConfig, SourceIndex, TaskSampler};
use crate::{par, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReptileConfig {
    /// Inner-loop learning rate.
    pub alpha: f64,
    /// Outer-loop interpolation rate.
    pub beta: f64,
    /// Inner optimizer steps per task.
    pub inner_steps: usize,
    pub tasks_per_step: usize,
    pub epochs: usize,
    /// Overrides the epoch-derived number of meta-iterations when set.
    pub iterations: Option<usize>,
    pub batch_size: usize,
    pub inner_optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for ReptileConfig {
    fn default() -> Self {
        Self {
            alpha: 5e-3,
            beta: 0.1,
            inner_steps: 3,
            tasks_per_step: 8,
            epochs: 4,
            iterations: None,
            batch_size: 64,
            inner_optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

impl ReptileConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::Config("alpha and beta must be > 0".into()));
        }
        if self.inner_steps < 1 || self.tasks_per_step < 1 || self.batch_size < 1 {
            return Err(Error::Config("inner_steps, tasks_per_step and batch_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Meta-iterations for `clustered` instances: one epoch is the number of
    /// iterations whose inner loops consume as many samples as there are
    /// clustered instances.
    pub fn meta_iterations(&self, clustered: usize) -> usize {
        if let Some(n) = self.iterations {
            return n;
        }
        let per_iter = self.tasks_per_step * self.inner_steps * self.batch_size;
        self.epochs * clustered.div_ceil(per_iter).max(1)
    }
}

/// Something that yields a loss and gradient at given parameters, one
/// (mini)batch per call.
pub trait Objective {
    fn loss_and_grad(&mut self, params: &Parameters, grad: &mut [f64]) -> Result<f64>;
}

/// Cycles through a task's samples in a seeded shuffled order, `batch_size`
/// at a time, reshuffling after every full pass.
pub struct TaskObjective<'a> {
    samples: Vec<Sample<'a>>,
    class_weights: Vec<f64>,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: rng::Rng,
    batch: Vec<Sample<'a>>,
}

impl<'a> TaskObjective<'a> {
    pub fn new(samples: Vec<Sample<'a>>, classes: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("task"));
        }
        let mut rng = rng::rng(seed);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        Ok(Self {
            samples,
            class_weights: vec![1.0; classes],
            batch_size,
            order,
            cursor: 0,
            rng,
            batch: Vec::with_capacity(batch_size),
        })
    }
}

impl Objective for TaskObjective<'_> {
    fn loss_and_grad(&mut self, params: &Parameters, grad: &mut [f64]) -> Result<f64> {
        self.batch.clear();
        while self.batch.len() < self.batch_size.min(self.samples.len()) {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            self.batch.push(self.samples[self.order[self.cursor]]);
            self.cursor += 1;
        }
        loss_and_grad_into(params, &self.batch, &self.class_weights, grad)
    }
}

/// `steps` optimizer steps from `theta` with a fresh optimizer state.
/// `theta` itself is left untouched.
pub fn inner_adapt(
    theta: &Parameters,
    objective: &mut impl Objective,
    alpha: f64,
    steps: usize,
    optimizer: OptimizerKind,
    precision: Precision,
) -> Result<Parameters> {
    if steps == 0 {
        return Err(Error::Config("inner steps must be >= 1".into()));
    }
    let mut p = theta.clone();
    let mut opt = Optimizer::new(optimizer, p.dims().len());
    let mut grad = vec![0.0; p.dims().len()];
    for _ in 0..steps {
        objective.loss_and_grad(&p, &mut grad)?;
        opt.step(p.values_mut(), &grad, alpha);
        if precision == Precision::Single {
            p.quantize_f32();
        }
    }
    if !p.is_finite() {
        return Err(Error::NonFinite("adapted parameters"));
    }
    Ok(p)
}

/// `θ + β · mean_i(θ_i − θ)`, coordinate-wise.
pub fn outer_update(theta: &Parameters, adapted: &[Parameters], beta: f64) -> Result<Parameters> {
    if adapted.is_empty() {
        return Err(Error::Empty("adapted parameters"));
    }
    let n = theta.dims().len();
    for a in adapted {
        if a.dims() != theta.dims() {
            return Err(Error::Dimension {
                expected: n,
                got: a.dims().len(),
            });
        }
    }
    let inv = 1.0 / adapted.len() as f64;
    let mut out = theta.clone();
    for (k, v) in out.values_mut().iter_mut().enumerate() {
        let base = theta.values()[k];
        let delta: f64 = adapted.iter().map(|a| a.values()[k] - base).sum();
        *v = base + beta * (delta * inv);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReptileStats {
    pub iterations: usize,
    pub tasks_seen: usize,
    /// Number of times each clustered source label was part of a sampled task.
    pub label_draws: Vec<usize>,
}

/// Meta-trains `theta0` (whose head must have `M` outputs) on analogy tasks
/// built from `subsets` over the featurized source corpus.
pub fn reptile_train(
    theta0: &Parameters,
    subsets: &LabelSubsets,
    source: &Featurized,
    sampler: &SamplerConfig,
    config: &ReptileConfig,
    precision: Precision,
) -> Result<(Parameters, ReptileStats)> {
    config.validate()?;
    if theta0.dims().classes != subsets.m() {
        return Err(Error::Dimension {
            expected: subsets.m(),
            got: theta0.dims().classes,
        });
    }
    let (source_features, source_labels, n_source_labels) =
        (&source.features[..], &source.labels[..], source.n_labels);
    let index = SourceIndex::new(source_labels, n_source_labels);
    let counts = index.counts();
    let weights = meta_sample_weights(subsets, &counts);
    let clustered: usize = subsets.subsets().iter().flatten().map(|&z| counts[z]).sum();
    let iterations = config.meta_iterations(clustered);
    let mut tasks = TaskSampler::new(subsets.clone(), counts.clone(), sampler)?;
    let m = subsets.m();

    let mut theta = theta0.clone();
    let mut stats = ReptileStats {
        label_draws: vec![0; n_source_labels],
        ..Default::default()
    };
    for it in 0..iterations {
        let batch: Vec<_> = (0..config.tasks_per_step).map(|_| tasks.next_task()).collect();
        for t in &batch {
            for &z in &t.chosen {
                stats.label_draws[z] += 1;
            }
        }
        let adapted = par::map_range(batch.len(), |t| {
            let view = materialize(&batch[t], &index);
            let samples = view
                .items
                .iter()
                .map(|&(i, j)| Sample {
                    features: &source_features[i],
                    label: j,
                    weight: weights[source_labels[i]].expect("task labels are clustered"),
                })
                .collect();
            let seed = rng::derive(config.seed, &[it as u64, t as u64]);
            let mut obj = TaskObjective::new(samples, m, config.batch_size, seed)?;
            inner_adapt(&theta, &mut obj, config.alpha, config.inner_steps, config.inner_optimizer, precision)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        theta = outer_update(&theta, &adapted, config.beta)?;
        stats.tasks_seen += batch.len();
    }
    stats.iterations = iterations;
    Ok((theta, stats))
}
