//! Source-to-target label clustering.
//!
//! A dummy classifier trained on the scarce target data labels every source
//! utterance. `Sim(y, z)` is the fraction of source class `z` predicted as
//! target class `y`. Label subsets are then grown greedily: in each of `K`
//! rounds every target label, in ascending index order, takes the remaining
//! source label it is most similar to.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::{Corpus, LabelSpace};
use crate::error::{Error, Result};
use crate::model::{
    class_weights_from, featurize_corpus, labeled_samples, predict, train, EncoderConfig, Parameters,
    TrainConfig,
};

/// A trained classifier together with the encoder that produced its features.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub encoder: EncoderConfig,
    pub params: Parameters,
}

impl Classifier {
    pub fn predict_corpus(&self, corpus: &Corpus) -> Result<Vec<usize>> {
        let xs = featurize_corpus(corpus, &self.encoder);
        predict(&self.params, &xs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DummyConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DummyConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Trains the in-domain classifier `f` on the target training sessions with
/// inverse-frequency class weights.
pub fn fit_dummy_classifier(target_train: &Corpus, encoder: &EncoderConfig, cfg: &DummyConfig) -> Result<Classifier> {
    if target_train.is_empty() {
        return Err(Error::Empty("target training corpus"));
    }
    let encoder = encoder.with_classes(target_train.labels().len());
    encoder.validate()?;
    let cw = class_weights_from(&target_train.label_counts());
    if !cw.absent.is_empty() {
        log::warn!(
            "dummy classifier: target classes {:?} absent from training data",
            cw.absent.iter().map(|&c| target_train.labels().name(c)).collect::<Vec<_>>()
        );
    }
    let xs = featurize_corpus(target_train, &encoder);
    let data = labeled_samples(target_train, &xs);
    let mut tc = TrainConfig::new(cfg.learning_rate, cfg.epochs, cw.weights, cfg.seed);
    tc.batch_size = cfg.batch_size;
    tc.precision = encoder.precision;
    let params = train(&encoder.init(cfg.seed), &data, &tc)?;
    Ok(Classifier { encoder, params })
}

/// `M x N` similarity between target labels (rows) and source labels (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    m: usize,
    n: usize,
    values: Vec<f64>,
    source_counts: Vec<usize>,
}

impl SimMatrix {
    /// Builds the matrix from raw values (row-major) and per-column sample counts.
    pub fn from_values(m: usize, n: usize, values: Vec<f64>, source_counts: Vec<usize>) -> Result<Self> {
        if values.len() != m * n {
            return Err(Error::Dimension {
                expected: m * n,
                got: values.len(),
            });
        }
        if source_counts.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: source_counts.len(),
            });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("similarities must lie in [0, 1]".into()));
        }
        Ok(Self {
            m,
            n,
            values,
            source_counts,
        })
    }

    /// Exact count ratios from predictions on the source corpus.
    pub fn from_predictions(predictions: &[usize], source_labels: &[usize], m: usize, n: usize) -> Result<Self> {
        if predictions.len() != source_labels.len() {
            return Err(Error::Dimension {
                expected: source_labels.len(),
                got: predictions.len(),
            });
        }
        let mut hits = vec![0usize; m * n];
        let mut counts = vec![0usize; n];
        for (&y, &z) in predictions.iter().zip(source_labels) {
            if y >= m || z >= n {
                return Err(Error::Dimension {
                    expected: if y >= m { m } else { n },
                    got: if y >= m { y + 1 } else { z + 1 },
                });
            }
            hits[y * n + z] += 1;
            counts[z] += 1;
        }
        let values = hits
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let c = counts[i % n];
                if c == 0 {
                    0.0
                } else {
                    h as f64 / c as f64
                }
            })
            .collect();
        Ok(Self {
            m,
            n,
            values,
            source_counts: counts,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, y: usize, z: usize) -> f64 {
        self.values[y * self.n + z]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.n..(y + 1) * self.n]
    }

    pub fn source_counts(&self) -> &[usize] {
        &self.source_counts
    }

    /// Source labels with no samples; their columns are all zero.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.n).filter(|&z| self.source_counts[z] == 0).collect()
    }

    pub fn column_sum(&self, z: usize) -> f64 {
        (0..self.m).map(|y| self.get(y, z)).sum()
    }
}

/// Runs `f` over the source corpus and tabulates the similarity matrix.
pub fn compute_sim(f: &Classifier, source: &Corpus) -> Result<SimMatrix> {
    if source.is_empty() {
        return Err(Error::Empty("source corpus"));
    }
    let preds = f.predict_corpus(source)?;
    SimMatrix::from_predictions(&preds, &source.gold(), f.params.dims().classes, source.labels().len())
}

/// `M` pairwise-disjoint lists of exactly `K` source label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSubsets {
    subsets: Vec<Vec<usize>>,
    k: usize,
}

impl LabelSubsets {
    pub fn new(subsets: Vec<Vec<usize>>) -> Result<Self> {
        let k = subsets.first().map(Vec::len).unwrap_or(0);
        if subsets.is_empty() || k == 0 {
            return Err(Error::Config("label subsets must be non-empty".into()));
        }
        if subsets.iter().any(|s| s.len() != k) {
            return Err(Error::Config("label subsets must all have the same size".into()));
        }
        let mut seen = HashSet::new();
        for &z in subsets.iter().flatten() {
            if !seen.insert(z) {
                return Err(Error::Config(format!("source label {z} appears in two subsets")));
            }
        }
        Ok(Self { subsets, k })
    }

    pub fn m(&self) -> usize {
        self.subsets.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn subset(&self, j: usize) -> &[usize] {
        &self.subsets[j]
    }

    /// Subset index containing source label `z`.
    pub fn owner(&self, z: usize) -> Option<usize> {
        self.subsets.iter().position(|s| s.contains(&z))
    }

    /// Lookup table from source label id to owning subset.
    pub fn owner_table(&self, n: usize) -> Vec<Option<usize>> {
        let mut t = vec![None; n];
        for (j, s) in self.subsets.iter().enumerate() {
            for &z in s {
                if z < n {
                    t[z] = Some(j);
                }
            }
        }
        t
    }

    /// `target<TAB>source_1,...,source_K`, one line per target label.
    pub fn to_text(&self, target: &LabelSpace, source: &LabelSpace) -> String {
        let mut out = String::new();
        for (j, s) in self.subsets.iter().enumerate() {
            let names: Vec<&str> = s.iter().map(|&z| source.name(z)).collect();
            let _ = writeln!(out, "{}\t{}", target.name(j), names.join(","));
        }
        out
    }

    pub fn parse(text: &str, target: &LabelSpace, source: &LabelSpace) -> Result<Self> {
        let mut subsets: Vec<Option<Vec<usize>>> = vec![None; target.len()];
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |m: String| Error::Config(format!("subsets line {}: {m}", n + 1));
            let (t, rest) = line.split_once('\t').ok_or_else(|| bad("missing tab".into()))?;
            let j = target.id(t).ok_or_else(|| bad(format!("unknown target label {t:?}")))?;
            let members = rest
                .split(',')
                .map(|s| source.id(s).ok_or_else(|| bad(format!("unknown source label {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            subsets[j] = Some(members);
        }
        let subsets = subsets
            .into_iter()
            .enumerate()
            .map(|(j, s)| s.ok_or_else(|| Error::Config(format!("no subset for target label {:?}", target.name(j)))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(subsets)
    }

    pub fn save(&self, path: &Path, target: &LabelSpace, source: &LabelSpace) -> Result<()> {
        fs::write(path, self.to_text(target, source))?;
        Ok(())
    }

    pub fn load(path: &Path, target: &LabelSpace, source: &LabelSpace) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, target, source)
    }
}

/// Greedy construction of `M` subsets of size `K` from `sim`.
///
/// Ties on similarity go to the source label with more samples, then to the
/// lower label index. Source labels without samples are never candidates.
pub fn build_subsets(sim: &SimMatrix, k: usize) -> Result<LabelSubsets> {
    let m = sim.m();
    if k == 0 || m == 0 {
        return Err(Error::Config("K and M must be >= 1".into()));
    }
    let counts = sim.source_counts();
    let mut pool: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    let available = pool.iter().filter(|&&a| a).count();
    if available < m * k {
        return Err(Error::PoolExhausted {
            m,
            k,
            needed: m * k,
            available,
        });
    }
    let mut subsets = vec![Vec::with_capacity(k); m];
    for _round in 0..k {
        for (j, subset) in subsets.iter_mut().enumerate() {
            let row = sim.row(j);
            let mut best: Option<usize> = None;
            for z in (0..sim.n()).filter(|&z| pool[z]) {
                best = match best {
                    None => Some(z),
                    Some(b) if row[z] > row[b] || (row[z] == row[b] && counts[z] > counts[b]) => Some(z),
                    keep => keep,
                };
            }
            let z = best.expect("pool holds at least M*K labels");
            pool[z] = false;
            subset.push(z);
        }
    }
    LabelSubsets::new(subsets)
}
