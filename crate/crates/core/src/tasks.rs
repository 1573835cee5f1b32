//! Analogy tasks: one source label drawn from each label subset, relabeled
//! to the index of its subset so every task is an `M`-way problem over the
//! same output space as the target task.

use num_bigint::BigUint;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::LabelSubsets;
use crate::corpus::LabelSpace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnalogyTask {
    /// `chosen[j]` is the source label taken from subset `j`.
    pub chosen: Vec<usize>,
    /// Total source samples across the chosen labels.
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Uniform,
    /// Probability proportional to task size.
    Ppts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub enumeration_cap: u64,
}

impl SamplerConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            seed,
            enumeration_cap: 100_000,
        }
    }
}

/// `K^M` as an exact integer.
pub fn task_count_exact(m: usize, k: usize) -> BigUint {
    BigUint::from(k).pow(m as u32)
}

/// Number of distinct analogy tasks, `K^M`.
pub fn task_count(m: usize, k: usize) -> Result<u64> {
    if m == 0 || k == 0 {
        return Err(Error::Config("M and K must be >= 1".into()));
    }
    let mut acc: u64 = 1;
    for _ in 0..m {
        acc = match acc.checked_mul(k as u64) {
            Some(v) => v,
            None => {
                return Err(Error::EnumerationCap {
                    count: task_count_exact(m, k).to_string(),
                    cap: u64::MAX,
                })
            }
        };
    }
    Ok(acc)
}

fn check_counts(subsets: &LabelSubsets, counts: &[usize]) -> Result<()> {
    for &z in subsets.subsets().iter().flatten() {
        match counts.get(z) {
            Some(&c) if c > 0 => {}
            Some(_) => return Err(Error::ZeroCount(format!("#{z}"))),
            None => {
                return Err(Error::Dimension {
                    expected: z + 1,
                    got: counts.len(),
                })
            }
        }
    }
    Ok(())
}

fn make_task(chosen: Vec<usize>, counts: &[usize]) -> AnalogyTask {
    let size = chosen.iter().map(|&z| counts[z]).sum();
    AnalogyTask { chosen, size }
}

/// Every task, in lexicographic order of per-subset member positions.
pub fn enumerate_tasks(subsets: &LabelSubsets, counts: &[usize], cap: u64) -> Result<Vec<AnalogyTask>> {
    let (m, k) = (subsets.m(), subsets.k());
    let total = task_count(m, k).map_err(|_| Error::EnumerationCap {
        count: task_count_exact(m, k).to_string(),
        cap,
    })?;
    if total > cap {
        return Err(Error::EnumerationCap {
            count: total.to_string(),
            cap,
        });
    }
    check_counts(subsets, counts)?;
    let mut out = Vec::with_capacity(total as usize);
    let mut pos = vec![0usize; m];
    loop {
        let chosen = (0..m).map(|j| subsets.subset(j)[pos[j]]).collect();
        out.push(make_task(chosen, counts));
        // odometer, last subset fastest
        let mut j = m;
        loop {
            if j == 0 {
                return Ok(out);
            }
            j -= 1;
            pos[j] += 1;
            if pos[j] < k {
                break;
            }
            pos[j] = 0;
        }
    }
}

/// One label per subset, each uniformly and independently.
pub fn sample_task_uniform<R: Rng + ?Sized>(subsets: &LabelSubsets, counts: &[usize], rng: &mut R) -> AnalogyTask {
    let chosen = subsets
        .subsets()
        .iter()
        .map(|s| s[rng.random_range(0..s.len())])
        .collect();
    make_task(chosen, counts)
}

/// Task sampler with probability proportional to task size.
///
/// Drawing one instance uniformly from all clustered instances fixes the label
/// of its own subset; every other subset is then filled uniformly. A task `T`
/// arises from each of its `|T|` instances with probability
/// `1/Total · (1/K)^(M−1)`, giving `P(T) = |T| / (K^(M−1) · Total)`, which is
/// `|T| / Σ|T'|` because every label is in exactly `K^(M−1)` tasks.
#[derive(Debug, Clone)]
pub struct PptsSampler {
    /// (subset, label) per clustered label, aligned with `index` weights.
    slots: Vec<(usize, usize)>,
    index: WeightedIndex<usize>,
}

impl PptsSampler {
    pub fn new(subsets: &LabelSubsets, counts: &[usize]) -> Result<Self> {
        check_counts(subsets, counts)?;
        let slots: Vec<(usize, usize)> = subsets
            .subsets()
            .iter()
            .enumerate()
            .flat_map(|(j, s)| s.iter().map(move |&z| (j, z)))
            .collect();
        let index = WeightedIndex::new(slots.iter().map(|&(_, z)| counts[z]))
            .map_err(|e| Error::Config(format!("ppts weights: {e}")))?;
        Ok(Self { slots, index })
    }

    pub fn sample<R: Rng + ?Sized>(&self, subsets: &LabelSubsets, counts: &[usize], rng: &mut R) -> AnalogyTask {
        let (fixed, label) = self.slots[self.index.sample(rng)];
        let chosen = subsets
            .subsets()
            .iter()
            .enumerate()
            .map(|(j, s)| if j == fixed { label } else { s[rng.random_range(0..s.len())] })
            .collect();
        make_task(chosen, counts)
    }
}

pub fn sample_task_ppts<R: Rng + ?Sized>(subsets: &LabelSubsets, counts: &[usize], rng: &mut R) -> Result<AnalogyTask> {
    Ok(PptsSampler::new(subsets, counts)?.sample(subsets, counts, rng))
}

/// A seeded stream of analogy tasks under one strategy.
#[derive(Debug, Clone)]
pub struct TaskSampler {
    subsets: LabelSubsets,
    counts: Vec<usize>,
    ppts: Option<PptsSampler>,
    rng: crate::rng::Rng,
}

impl TaskSampler {
    pub fn new(subsets: LabelSubsets, counts: Vec<usize>, config: &SamplerConfig) -> Result<Self> {
        check_counts(&subsets, &counts)?;
        let ppts = match config.strategy {
            Strategy::Ppts => Some(PptsSampler::new(&subsets, &counts)?),
            Strategy::Uniform => None,
        };
        Ok(Self {
            subsets,
            counts,
            ppts,
            rng: crate::rng::rng(config.seed),
        })
    }

    pub fn next_task(&mut self) -> AnalogyTask {
        match &self.ppts {
            Some(p) => p.sample(&self.subsets, &self.counts, &mut self.rng),
            None => sample_task_uniform(&self.subsets, &self.counts, &mut self.rng),
        }
    }
}

/// Source utterance indices grouped by label.
#[derive(Debug, Clone)]
pub struct SourceIndex {
    by_label: Vec<Vec<usize>>,
}

impl SourceIndex {
    pub fn new(labels: &[usize], n_labels: usize) -> Self {
        let mut by_label = vec![Vec::new(); n_labels];
        for (i, &z) in labels.iter().enumerate() {
            by_label[z].push(i);
        }
        Self { by_label }
    }

    pub fn counts(&self) -> Vec<usize> {
        self.by_label.iter().map(Vec::len).collect()
    }

    pub fn of(&self, z: usize) -> &[usize] {
        &self.by_label[z]
    }
}

/// Index view of a materialized task: source utterance positions with their
/// `M`-way labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskView {
    pub items: Vec<(usize, usize)>,
}

impl TaskView {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Every source utterance whose label is `chosen[j]`, relabeled to `j`.
pub fn materialize(task: &AnalogyTask, source: &SourceIndex) -> TaskView {
    let items = task
        .chosen
        .iter()
        .enumerate()
        .flat_map(|(j, &z)| source.of(z).iter().map(move |&i| (i, j)))
        .collect();
    TaskView { items }
}

/// Meta-stage sample weight per source label: `Total / (M · |C_i|)` for
/// members of subset `C_i` (so the clustered population averages to 1),
/// `None` for unclustered labels.
pub fn meta_sample_weights(subsets: &LabelSubsets, counts: &[usize]) -> Vec<Option<f64>> {
    let totals: Vec<usize> = subsets
        .subsets()
        .iter()
        .map(|s| s.iter().map(|&z| counts[z]).sum())
        .collect();
    let total: usize = totals.iter().sum();
    let m = subsets.m() as f64;
    let mut out = vec![None; counts.len()];
    for (j, s) in subsets.subsets().iter().enumerate() {
        for &z in s {
            out[z] = Some(if totals[j] == 0 { 0.0 } else { total as f64 / (m * totals[j] as f64) });
        }
    }
    out
}

pub fn meta_sample_weight(label: usize, subsets: &LabelSubsets, counts: &[usize]) -> Result<f64> {
    meta_sample_weights(subsets, counts)
        .get(label)
        .copied()
        .flatten()
        .ok_or_else(|| Error::Unclustered(format!("#{label}")))
}

/// One line per task, source label names comma-separated in subset order.
pub fn tasks_to_text(tasks: &[AnalogyTask], source: &LabelSpace) -> String {
    tasks
        .iter()
        .map(|t| {
            let names: Vec<&str> = t.chosen.iter().map(|&z| source.name(z)).collect();
            names.join(",") + "\n"
        })
        .collect()
}

pub fn tasks_from_text(text: &str, source: &LabelSpace, counts: &[usize]) -> Result<Vec<AnalogyTask>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let chosen = l
                .split(',')
                .map(|n| source.id(n).ok_or_else(|| Error::Config(format!("unknown source label {n:?}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(make_task(chosen, counts))
        })
        .collect()
}
