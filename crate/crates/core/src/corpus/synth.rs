//! Synthetic source/target corpora with a planted label hierarchy.
//!
//! Every source class owns a disjoint vocabulary. Each target class is
//! assigned `k_true` source classes ("children"); a target utterance picks one
//! child with probability proportional to that child's source size and draws
//! its tokens from the child's vocabulary. With probability `noise` a token is
//! replaced by a draw from the global vocabulary. Source classes that are not
//! planted under any target act as distractors.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, LabelSpace, Utterance};
use crate::error::{Error, Result};
use crate::meta::TagMap;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Target class count.
    pub m: usize,
    /// Source class count.
    pub n: usize,
    /// Planted children per target class.
    pub k_true: usize,
    pub vocab_per_class: usize,
    pub noise: f64,
    /// Mean source class size; actual sizes spread by `size_skew`.
    pub utterances_per_source_class: usize,
    /// Target sessions available for train/validation sampling.
    pub sessions: usize,
    /// Total utterances across the `sessions` target sessions.
    pub target_utterances: usize,
    /// Held-out target sessions, same distribution.
    pub test_sessions: usize,
    /// Source class sizes are drawn uniformly from `mean * [1 - skew, 1 + skew]`.
    pub size_skew: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::benchmark()
    }
}

impl SynthSpec {
    /// The reference benchmark: 4 target classes, 24 source classes of which
    /// 12 are planted (3 per target) and 12 are distractors, 20% token noise.
    pub fn benchmark() -> Self {
        Self {
            m: 4,
            n: 24,
            k_true: 3,
            vocab_per_class: 24,
            noise: 0.2,
            utterances_per_source_class: 150,
            sessions: 60,
            target_utterances: 720,
            test_sessions: 20,
            size_skew: 0.8,
            min_tokens: 4,
            max_tokens: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.m < 2 {
            return bad(format!("m must be >= 2, got {}", self.m));
        }
        if self.k_true < 1 {
            return bad("k_true must be >= 1".into());
        }
        if self.n < self.m * self.k_true {
            return bad(format!(
                "n ({}) must be >= m * k_true ({})",
                self.n,
                self.m * self.k_true
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1], got {}", self.noise));
        }
        if !(0.0..1.0).contains(&self.size_skew) {
            return bad(format!("size_skew must lie in [0, 1), got {}", self.size_skew));
        }
        if self.vocab_per_class == 0 || self.utterances_per_source_class == 0 {
            return bad("vocab_per_class and utterances_per_source_class must be positive".into());
        }
        if self.sessions == 0 || self.test_sessions == 0 || self.target_utterances < self.sessions {
            return bad("need at least one target utterance per session and one test session".into());
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad("token length range must satisfy 1 <= min_tokens <= max_tokens".into());
        }
        Ok(())
    }

    pub fn word(class: usize, k: usize) -> String {
        format!("s{class}w{k}")
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpora {
    pub source: Corpus,
    /// Pool of target sessions for train/validation draws.
    pub target: Corpus,
    /// Held-out target sessions.
    pub test: Corpus,
    /// `planted[t]` lists the source label ids planted under target label `t`, ascending.
    pub planted: Vec<Vec<usize>>,
    /// A coarse grouping of the source labels (groups of about four),
    /// unrelated to the planted structure.
    pub coarse: TagMap,
}

fn padded_names(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

struct Sampler<'a> {
    spec: &'a SynthSpec,
    rng: rng::Rng,
}

impl Sampler<'_> {
    fn text(&mut self, class: usize) -> String {
        let spec = self.spec;
        let len = self.rng.random_range(spec.min_tokens..=spec.max_tokens);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let w = if spec.noise > 0.0 && self.rng.random_bool(spec.noise) {
                let c = self.rng.random_range(0..spec.n);
                SynthSpec::word(c, self.rng.random_range(0..spec.vocab_per_class))
            } else {
                SynthSpec::word(class, self.rng.random_range(0..spec.vocab_per_class))
            };
            words.push(w);
        }
        words.join(" ")
    }
}

pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<SynthCorpora> {
    spec.validate()?;
    let mut s = Sampler {
        spec,
        rng: rng::rng(seed),
    };

    let source_labels = LabelSpace::new(padded_names("src", spec.n))?;
    let target_labels = LabelSpace::new(padded_names("tgt", spec.m))?;

    let mut perm: Vec<usize> = (0..spec.n).collect();
    perm.shuffle(&mut s.rng);
    let planted: Vec<Vec<usize>> = perm[..spec.m * spec.k_true]
        .chunks(spec.k_true)
        .map(|c| {
            let mut c = c.to_vec();
            c.sort_unstable();
            c
        })
        .collect();

    let mean = spec.utterances_per_source_class as f64;
    let sizes: Vec<usize> = (0..spec.n)
        .map(|_| {
            let f = 1.0 + spec.size_skew * (2.0 * s.rng.random::<f64>() - 1.0);
            ((mean * f).round() as usize).max(1)
        })
        .collect();

    let mut source_rows: Vec<(usize, String)> = Vec::new();
    for (class, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let t = s.text(class);
            source_rows.push((class, t));
        }
    }
    source_rows.shuffle(&mut s.rng);
    let source_utts = source_rows
        .into_iter()
        .enumerate()
        .map(|(i, (label_id, text))| Utterance {
            session_id: format!("conv{:04}", i / 20),
            speaker: if i % 2 == 0 { "A" } else { "B" }.to_string(),
            text,
            label_id,
        })
        .collect();
    let source = Corpus::new(source_utts, source_labels)?;

    // Target class prior follows the planted children's total source mass.
    let mass: Vec<usize> = planted
        .iter()
        .map(|ch| ch.iter().map(|&c| sizes[c]).sum())
        .collect();
    let class_dist = WeightedIndex::new(&mass).expect("positive masses");
    let child_dists: Vec<WeightedIndex<usize>> = planted
        .iter()
        .map(|ch| WeightedIndex::new(ch.iter().map(|&c| sizes[c])).expect("positive sizes"))
        .collect();

    let per_session = spec.target_utterances / spec.sessions;
    let make_target = |prefix: &str, n_sessions: usize, s: &mut Sampler| -> Result<Corpus> {
        let mut utts = Vec::with_capacity(n_sessions * per_session);
        for sess in 0..n_sessions {
            for _ in 0..per_session {
                let t = class_dist.sample(&mut s.rng);
                let child = planted[t][child_dists[t].sample(&mut s.rng)];
                utts.push(Utterance {
                    session_id: format!("{prefix}{sess:03}"),
                    speaker: "T".into(),
                    text: s.text(child),
                    label_id: t,
                });
            }
        }
        Corpus::new(utts, target_labels.clone())
    };
    let target = make_target("train", spec.sessions, &mut s)?;
    let test = make_target("test", spec.test_sessions, &mut s)?;

    let groups = (spec.n / 4).max(2);
    let mut order: Vec<usize> = (0..spec.n).collect();
    order.shuffle(&mut s.rng);
    let coarse_names = padded_names("coarse", groups);
    let pairs = order
        .iter()
        .enumerate()
        .map(|(pos, &src)| {
            (
                source.labels().name(src).to_string(),
                coarse_names[pos % groups].clone(),
            )
        })
        .collect();
    let coarse = TagMap::new(pairs)?;

    Ok(SynthCorpora {
        source,
        target,
        test,
        planted,
        coarse,
    })
}
