#![allow(dead_code)]

use analogy_meta::corpus::{generate_synthetic, SynthCorpora, SynthSpec};
use analogy_meta::harness::{ProtocolConfig, ProtocolData};
use analogy_meta::meta::{Method, ReptileConfig};
use analogy_meta::model::EncoderConfig;

/// The shipped synthetic benchmark, data seed 0.
pub fn benchmark() -> SynthCorpora {
    generate_synthetic(&SynthSpec::benchmark(), 0).expect("benchmark generates")
}

pub fn small_encoder() -> EncoderConfig {
    EncoderConfig {
        hash_buckets: 4096,
        hidden_dim: 32,
        ..EncoderConfig::default()
    }
}

pub fn data(c: &SynthCorpora) -> ProtocolData<'_> {
    ProtocolData {
        target: &c.target,
        test: &c.test,
        source: &c.source,
    }
}

/// Meta-training budget for the small synthetic source corpus; the library
/// defaults assume a much larger one.
pub fn synthetic_reptile() -> ReptileConfig {
    ReptileConfig {
        beta: 0.5,
        inner_steps: 5,
        tasks_per_step: 4,
        epochs: 20,
        batch_size: 16,
        ..ReptileConfig::default()
    }
}

/// Level 2, 10 repeats, K = 3, the three methods compared in the trend check.
pub fn trend_config() -> ProtocolConfig {
    let mut cfg = ProtocolConfig {
        sparsity_levels: vec![2],
        repeats: 10,
        methods: vec![Method::Direct, Method::ReptileUniform, Method::ReptilePpts],
        k_values: vec![3],
        master_seed: 0,
        ..ProtocolConfig::default()
    };
    cfg.recipe.encoder = small_encoder();
    cfg.recipe.reptile = synthetic_reptile();
    cfg
}
