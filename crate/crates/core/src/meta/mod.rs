//! Intermediate training: first-order meta-learning on analogy tasks and the
//! supervised baselines it is compared against, followed by grid-searched
//! fine-tuning on the target data.

mod baselines;
mod finetune;
mod reptile;
mod tagmap;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::{pretrain_lc, pretrain_multiclass, PretrainConfig};
pub use finetune::{finetune, FinetuneChoice, FinetuneConfig, FinetuneGrid, HeadPolicy};
pub use reptile::{
    inner_adapt, outer_update, reptile_train, Objective, ReptileConfig, ReptileStats, TaskObjective,
};
pub use tagmap::{TagMap, SWDA_SEVEN_TAGS};

use crate::cluster::LabelSubsets;
use crate::corpus::LabelSpace;
use crate::error::{Error, Result};
use crate::model::{EncoderConfig, Featurized, Parameters};
use crate::rng;
use crate::tasks::{SamplerConfig, Strategy};

/// Every training recipe the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Fine-tune a freshly initialized model on the target data only.
    Direct,
    /// Pre-train on all source tags, then fine-tune with a new head.
    PretrainFullTags,
    /// Pre-train on coarse source tags, then fine-tune with a new head.
    PretrainCoarseTags,
    /// Pre-train on label-subset membership and keep that head.
    PretrainLcShared,
    /// Pre-train on label-subset membership, then re-initialize the head.
    PretrainLcUnshared,
    ReptileUniform,
    ReptilePpts,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Direct,
        Method::PretrainFullTags,
        Method::PretrainCoarseTags,
        Method::PretrainLcShared,
        Method::PretrainLcUnshared,
        Method::ReptileUniform,
        Method::ReptilePpts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::PretrainFullTags => "pretrain-full",
            Method::PretrainCoarseTags => "pretrain-coarse",
            Method::PretrainLcShared => "pretrain-lc-shared",
            Method::PretrainLcUnshared => "pretrain-lc-unshared",
            Method::ReptileUniform => "reptile-uniform",
            Method::ReptilePpts => "reptile-ppts",
        }
    }

    /// Whether the recipe depends on label clustering.
    pub fn needs_subsets(self) -> bool {
        matches!(
            self,
            Method::PretrainLcShared | Method::PretrainLcUnshared | Method::ReptileUniform | Method::ReptilePpts
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {s:?}; expected one of {}",
                    Method::ALL.map(|m| m.name()).join(", ")
                ))
            })
    }
}

/// Hyperparameters shared by every recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeConfig {
    pub encoder: EncoderConfig,
    pub pretrain: PretrainConfig,
    pub reptile: ReptileConfig,
    pub enumeration_cap: u64,
    /// Coarse scheme for [`Method::PretrainCoarseTags`].
    pub tag_map: Option<TagMap>,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            pretrain: PretrainConfig::default(),
            reptile: ReptileConfig::default(),
            enumeration_cap: 100_000,
            tag_map: None,
        }
    }
}

/// Source-side inputs to a recipe.
pub struct SourceData<'a> {
    pub labels: &'a LabelSpace,
    pub featurized: &'a Featurized,
}

/// Produces the `m`-way initialization handed to fine-tuning. Recipes whose
/// pre-training head cannot (or should not) be reused come back with a fresh
/// `m`-way head already in place.
pub fn initialize(
    method: Method,
    m: usize,
    source: &SourceData,
    subsets: Option<&LabelSubsets>,
    config: &RecipeConfig,
    seed: u64,
) -> Result<Parameters> {
    let enc = config.encoder.with_classes(m);
    enc.validate()?;
    let need = || subsets.ok_or_else(|| Error::Config(format!("method {method} needs label subsets")));
    let init_seed = rng::derive(seed, &[1]);
    let head_seed = rng::derive(seed, &[4]);
    Ok(match method {
        Method::Direct => enc.init(init_seed),
        Method::PretrainFullTags | Method::PretrainCoarseTags => {
            let map = if method == Method::PretrainCoarseTags {
                Some(
                    config
                        .tag_map
                        .as_ref()
                        .ok_or_else(|| Error::Config("pretrain-coarse needs a tag map".into()))?,
                )
            } else {
                None
            };
            let p = pretrain_multiclass(&enc, source.featurized, source.labels, map, &config.pretrain, init_seed)?;
            p.with_new_head(m, enc.init_scale, head_seed)
        }
        Method::PretrainLcShared | Method::PretrainLcUnshared => {
            let shared = method == Method::PretrainLcShared;
            pretrain_lc(&enc, need()?, source.featurized, &config.pretrain, shared, init_seed, head_seed)?
        }
        Method::ReptileUniform | Method::ReptilePpts => {
            let strategy = if method == Method::ReptilePpts {
                Strategy::Ppts
            } else {
                Strategy::Uniform
            };
            let sampler = SamplerConfig {
                strategy,
                seed: rng::derive(seed, &[2]),
                enumeration_cap: config.enumeration_cap,
            };
            let rc = ReptileConfig {
                seed: rng::derive(seed, &[3]),
                ..config.reptile.clone()
            };
            reptile_train(&enc.init(init_seed), need()?, source.featurized, &sampler, &rc, enc.precision)?.0
        }
    })
}
