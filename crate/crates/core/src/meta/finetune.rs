use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{class_weights_from, loss, train_with, Featurized, Parameters, Precision, TrainConfig};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneGrid {
    pub learning_rates: Vec<f64>,
    pub epoch_choices: Vec<usize>,
}

impl FinetuneGrid {
    /// The BERT-scale reference grid. Far too small for a from-scratch encoder.
    pub fn reference() -> Self {
        Self {
            learning_rates: vec![5e-6, 1e-5, 2e-5, 3e-5],
            epoch_choices: vec![1, 3, 5, 10],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.epoch_choices.is_empty() {
            return Err(Error::Config("fine-tuning grid must be non-empty".into()));
        }
        if self.learning_rates.iter().any(|&lr| !(lr > 0.0)) {
            return Err(Error::Config("grid learning rates must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for FinetuneGrid {
    fn default() -> Self {
        Self {
            learning_rates: vec![3e-3, 1e-2, 3e-2, 1e-1],
            epoch_choices: vec![1, 3, 10, 30],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub grid: FinetuneGrid,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            grid: FinetuneGrid::default(),
            batch_size: 64,
            seed: 0,
        }
    }
}

/// What happens to the classification head before fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadPolicy {
    Keep,
    /// Replace with a freshly initialized head.
    Fresh { seed: u64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneChoice {
    pub learning_rate: f64,
    pub epochs: usize,
    pub val_loss: f64,
}

/// Grid search over `(learning rate, epochs)`. Every cell trains from
/// `theta` with inverse-frequency class weights from `train`; the cell with
/// the lowest class-balanced validation loss wins, ties going to the lower
/// learning rate and then to fewer epochs.
pub fn finetune(
    theta: &Parameters,
    train: &Featurized,
    val: &Featurized,
    config: &FinetuneConfig,
    head: HeadPolicy,
    precision: Precision,
) -> Result<(Parameters, FinetuneChoice)> {
    config.grid.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("fine-tuning training set"));
    }
    if val.is_empty() {
        return Err(Error::Empty("fine-tuning validation set"));
    }
    let theta = match head {
        HeadPolicy::Keep => theta.clone(),
        HeadPolicy::Fresh { seed, scale } => theta.with_new_head(theta.dims().classes, scale, seed),
    };
    let train_cw = class_weights_from(&train.label_counts()).weights;
    let val_cw = class_weights_from(&val.label_counts()).weights;
    let train_samples = train.samples();
    let val_samples = val.samples();

    let mut lrs = config.grid.learning_rates.clone();
    lrs.sort_by(f64::total_cmp);
    let mut epoch_choices = config.grid.epoch_choices.clone();
    epoch_choices.sort_unstable();
    epoch_choices.dedup();
    let max_epochs = *epoch_choices.last().expect("non-empty");

    // Best cell per learning rate; each lr trains once and is scored at every
    // requested epoch count along the way.
    let per_lr = par::map(&lrs, |&lr| -> Result<(Parameters, FinetuneChoice)> {
        let mut tc = TrainConfig::new(lr, max_epochs, train_cw.clone(), config.seed);
        tc.batch_size = config.batch_size;
        tc.precision = precision;
        let mut best: Option<(Parameters, FinetuneChoice)> = None;
        train_with(&theta, &train_samples, &tc, max_epochs, |e, p| {
            if epoch_choices.binary_search(&e).is_ok() {
                let l = loss(p, &val_samples, &val_cw)?;
                if best.as_ref().is_none_or(|b| l < b.1.val_loss) {
                    best = Some((
                        p.clone(),
                        FinetuneChoice {
                            learning_rate: lr,
                            epochs: e,
                            val_loss: l,
                        },
                    ));
                }
            }
            Ok(())
        })?;
        Ok(best.expect("at least one epoch choice"))
    });
    let mut best: Option<(Parameters, FinetuneChoice)> = None;
    for cell in per_lr {
        let cell = cell?;
        if best.as_ref().is_none_or(|b| cell.1.val_loss < b.1.val_loss) {
            best = Some(cell);
        }
    }
    Ok(best.expect("non-empty grid"))
}
