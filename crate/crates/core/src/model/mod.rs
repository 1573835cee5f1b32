//! A small hashed bag-of-n-grams classifier trained from scratch.
//!
//! Text is mapped to an L2-normalized sparse vector of hashed n-gram counts,
//! projected to one ReLU hidden layer and classified by a softmax head. The
//! head occupies a separate, contiguous slice of the parameter vector so it
//! can be shared across tasks or swapped out independently.

mod checkpoint;
mod features;
mod network;
mod optim;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::par;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use features::{featurize, fnv1a, tokenize, SparseVec};
pub use network::{argmax, forward, logits, loss, loss_and_grad, loss_and_grad_into, Sample};
pub use optim::{adam_step, AdamHyper, AdamState, Optimizer, OptimizerKind};
pub use params::{Dims, Parameters};
pub use train::{class_weights_from, predict, train, train_snapshots, train_with, ClassWeights, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Parameters are rounded through `f32` after every update.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub hash_buckets: usize,
    pub ngram_orders: Vec<usize>,
    pub hidden_dim: usize,
    pub num_classes: usize,
    /// Multiplier on the `1/sqrt(fan_in)` init range.
    pub init_scale: f64,
    pub precision: Precision,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hash_buckets: 1 << 15,
            ngram_orders: vec![1, 2],
            hidden_dim: 64,
            num_classes: 2,
            init_scale: 1.0,
            precision: Precision::Double,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hash_buckets < 1 || self.hidden_dim < 1 {
            return Err(Error::Config("hash_buckets and hidden_dim must be >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(Error::Config("ngram_orders must be non-empty and positive".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::Config("init_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn with_classes(&self, num_classes: usize) -> Self {
        Self {
            num_classes,
            ..self.clone()
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            buckets: self.hash_buckets,
            hidden: self.hidden_dim,
            classes: self.num_classes,
        }
    }

    pub fn featurize(&self, text: &str) -> SparseVec {
        featurize(text, self.hash_buckets, &self.ngram_orders)
    }

    pub fn init(&self, seed: u64) -> Parameters {
        Parameters::init(self.dims(), self.init_scale, seed)
    }
}

/// Features and labels of a corpus, in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    pub features: Vec<SparseVec>,
    pub labels: Vec<usize>,
    pub n_labels: usize,
}

impl Featurized {
    pub fn new(corpus: &Corpus, config: &EncoderConfig) -> Self {
        Self {
            features: featurize_corpus(corpus, config),
            labels: corpus.gold(),
            n_labels: corpus.labels().len(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_labels];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    /// Unit-weight samples with the stored labels.
    pub fn samples(&self) -> Vec<Sample<'_>> {
        self.features
            .iter()
            .zip(&self.labels)
            .map(|(x, &label)| Sample {
                features: x,
                label,
                weight: 1.0,
            })
            .collect()
    }
}

/// Featurizes every utterance, in corpus order.
pub fn featurize_corpus(corpus: &Corpus, config: &EncoderConfig) -> Vec<SparseVec> {
    par::map(corpus.utterances(), |u| config.featurize(&u.text))
}

/// Samples with unit weight and the corpus labels.
pub fn labeled_samples<'a>(corpus: &Corpus, features: &'a [SparseVec]) -> Vec<Sample<'a>> {
    corpus
        .utterances()
        .iter()
        .zip(features)
        .map(|(u, x)| Sample {
            features: x,
            label: u.label_id,
            weight: 1.0,
        })
        .collect()
}
