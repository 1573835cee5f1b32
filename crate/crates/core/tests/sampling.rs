use std::collections::HashMap;

use analogy_meta::cluster::LabelSubsets;
use analogy_meta::tasks::{enumerate_tasks, SamplerConfig, Strategy, TaskSampler};

/// C1 = {a: 2 samples, b: 1}, C2 = {c: 1, d: 1}.
fn fixture() -> (LabelSubsets, Vec<usize>) {
    (LabelSubsets::new(vec![vec![0, 1], vec![2, 3]]).unwrap(), vec![2, 1, 1, 1])
}

fn frequencies(strategy: Strategy, draws: usize) -> HashMap<Vec<usize>, f64> {
    let (subsets, counts) = fixture();
    let mut s = TaskSampler::new(subsets, counts, &SamplerConfig::new(strategy, 11)).unwrap();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..draws {
        *seen.entry(s.next_task().chosen).or_default() += 1;
    }
    seen.into_iter().map(|(k, v)| (k, v as f64 / draws as f64)).collect()
}

#[test]
fn size_proportional_distribution_by_enumeration() {
    let (subsets, counts) = fixture();
    let tasks = enumerate_tasks(&subsets, &counts, 100).unwrap();
    let sizes: Vec<usize> = tasks.iter().map(|t| t.size).collect();
    assert_eq!(sizes, vec![3, 3, 2, 2]);
    let total: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 / total as f64).collect();
    assert_eq!(exact, vec![0.3, 0.3, 0.2, 0.2]);

    let freq = frequencies(Strategy::Ppts, 100_000);
    for (t, p) in tasks.iter().zip(&exact) {
        let f = freq[&t.chosen];
        assert!((f - p).abs() < 0.01, "{:?}: {f} vs {p}", t.chosen);
    }
}

#[test]
fn uniform_distribution_monte_carlo() {
    let freq = frequencies(Strategy::Uniform, 100_000);
    assert_eq!(freq.len(), 4);
    for (t, f) in &freq {
        assert!((f - 0.25).abs() < 0.01, "{t:?}: {f}");
    }
}

#[test]
fn single_task_when_k_is_one() {
    let subsets = LabelSubsets::new(vec![vec![2], vec![0], vec![1]]).unwrap();
    for strategy in [Strategy::Uniform, Strategy::Ppts] {
        let mut s = TaskSampler::new(subsets.clone(), vec![4, 1, 2], &SamplerConfig::new(strategy, 3)).unwrap();
        for _ in 0..100 {
            assert_eq!(s.next_task().chosen, vec![2, 0, 1]);
        }
    }
}

#[test]
fn zero_count_member_rejected() {
    let (subsets, _) = fixture();
    assert!(TaskSampler::new(subsets, vec![2, 0, 1, 1], &SamplerConfig::new(Strategy::Ppts, 0)).is_err());
}
