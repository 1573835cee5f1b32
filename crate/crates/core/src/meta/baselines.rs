//! Supervised intermediate-training recipes on the source corpus.

use serde::{Deserialize, Serialize};

use super::TagMap;
use crate::cluster::LabelSubsets;
use crate::corpus::LabelSpace;
use crate::error::{Error, Result};
use crate::model::{train, EncoderConfig, Featurized, Parameters, Sample, TrainConfig};
use crate::tasks::meta_sample_weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            epochs: 4,
            batch_size: 64,
        }
    }
}

/// N-way (or coarse-tag) classification over the whole source corpus.
/// The returned parameters carry the source head; callers replace it before
/// fine-tuning on the target.
pub fn pretrain_multiclass(
    encoder: &EncoderConfig,
    source: &Featurized,
    source_labels: &LabelSpace,
    tag_map: Option<&TagMap>,
    config: &PretrainConfig,
    seed: u64,
) -> Result<Parameters> {
    let (classes, labels): (usize, Vec<usize>) = match tag_map {
        Some(map) => {
            let (coarse, table) = map.project(source_labels)?;
            (coarse.len(), source.labels.iter().map(|&z| table[z]).collect())
        }
        None => (source_labels.len(), source.labels.clone()),
    };
    if classes < 2 {
        return Err(Error::TagMap("pre-training head needs at least 2 classes".into()));
    }
    let enc = encoder.with_classes(classes);
    let samples: Vec<Sample> = source
        .features
        .iter()
        .zip(&labels)
        .map(|(x, &label)| Sample {
            features: x,
            label,
            weight: 1.0,
        })
        .collect();
    let mut tc = TrainConfig::new(config.learning_rate, config.epochs, vec![1.0; classes], seed);
    tc.batch_size = config.batch_size;
    tc.precision = encoder.precision;
    train(&enc.init(seed), &samples, &tc)
}

/// M-way classification of clustered source samples into their label
/// subsets. Unclustered samples are skipped. With `shared_head = false` the
/// trained head is replaced by a fresh one drawn from `head_seed`.
pub fn pretrain_lc(
    encoder: &EncoderConfig,
    subsets: &LabelSubsets,
    source: &Featurized,
    config: &PretrainConfig,
    shared_head: bool,
    seed: u64,
    head_seed: u64,
) -> Result<Parameters> {
    let m = subsets.m();
    let enc = encoder.with_classes(m);
    let owner = subsets.owner_table(source.n_labels);
    let weights = meta_sample_weights(subsets, &source.label_counts());
    let samples: Vec<Sample> = source
        .features
        .iter()
        .zip(&source.labels)
        .filter_map(|(x, &z)| {
            owner[z].map(|j| Sample {
                features: x,
                label: j,
                weight: weights[z].expect("clustered"),
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::Empty("clustered source samples"));
    }
    let mut tc = TrainConfig::new(config.learning_rate, config.epochs, vec![1.0; m], seed);
    tc.batch_size = config.batch_size;
    tc.precision = encoder.precision;
    let trained = train(&enc.init(seed), &samples, &tc)?;
    Ok(if shared_head {
        trained
    } else {
        trained.with_new_head(m, encoder.init_scale, head_seed)
    })
}
