//! End-to-end checks on generated corpora whose label structure is known.

mod common;

use analogy_meta::cluster::{build_subsets, fit_dummy_classifier, DummyConfig};
use analogy_meta::corpus::{generate_synthetic, SynthSpec};
use analogy_meta::harness::{similarity, uar};
use analogy_meta::meta::{finetune, initialize, FinetuneConfig, HeadPolicy, Method, RecipeConfig, SourceData};
use analogy_meta::model::{predict, Featurized};

fn noiseless() -> SynthSpec {
    SynthSpec {
        noise: 0.0,
        ..SynthSpec::benchmark()
    }
}

#[test]
fn noiseless_classifier_maps_children_to_parents() {
    let c = generate_synthetic(&noiseless(), 0).unwrap();
    let enc = common::small_encoder();
    let f = fit_dummy_classifier(&c.target, &enc, &DummyConfig::default()).unwrap();

    let tgt = Featurized::new(&c.target, &enc);
    let train_preds = predict(&f.params, &tgt.features).unwrap();
    let train_acc = train_preds.iter().zip(&tgt.labels).filter(|(p, g)| p == g).count() as f64 / tgt.len() as f64;
    assert!(train_acc >= 0.95, "training accuracy {train_acc}");

    let src = Featurized::new(&c.source, &enc);
    let preds = predict(&f.params, &src.features).unwrap();
    let (mut ok, mut total) = (0usize, 0usize);
    for (i, &z) in src.labels.iter().enumerate() {
        if let Some(parent) = c.planted.iter().position(|p| p.contains(&z)) {
            total += 1;
            ok += usize::from(preds[i] == parent);
        }
    }
    let acc = ok as f64 / total as f64;
    assert!(acc >= 0.95, "planted children assigned to parents with accuracy {acc}");
}

#[test]
fn noiseless_clustering_recovers_planted_subsets() {
    let mut recovered = Vec::new();
    for seed in 0..10 {
        let c = generate_synthetic(&noiseless(), seed).unwrap();
        let enc = common::small_encoder();
        let f = fit_dummy_classifier(&c.target, &enc, &DummyConfig::default()).unwrap();
        let sim = similarity(&f, &Featurized::new(&c.source, &enc)).unwrap();
        let subsets = build_subsets(&sim, c.planted[0].len()).unwrap();
        let hits: usize = c
            .planted
            .iter()
            .enumerate()
            .map(|(j, p)| subsets.subset(j).iter().filter(|z| p.contains(z)).count())
            .sum();
        recovered.push(hits as f64 / (c.planted.len() * c.planted[0].len()) as f64);
    }
    assert!(recovered.iter().all(|&r| r >= 0.9), "per-seed recovery {recovered:?}");
}

/// Reptile initialization vs. random initialization, both fine-tuned on the
/// same two-session draw with the same grid and scored on the held-out test
/// sessions (the validation draw is tiny and already used for selection).
#[test]
fn meta_init_beats_random_init() {
    let mut wins = 0;
    let mut scores = Vec::new();
    for seed in 0..10u64 {
        let c = generate_synthetic(&noiseless(), 100 + seed).unwrap();
        let enc = common::small_encoder();
        let (train, val) = c.target.select_sessions(2, 2, seed).unwrap();
        let f = fit_dummy_classifier(&train, &enc, &DummyConfig { seed, ..DummyConfig::default() }).unwrap();
        let src = Featurized::new(&c.source, &enc);
        let subsets = build_subsets(&similarity(&f, &src).unwrap(), 3).unwrap();
        let recipe = RecipeConfig {
            encoder: enc.clone(),
            reptile: common::synthetic_reptile(),
            ..RecipeConfig::default()
        };
        let source = SourceData {
            labels: c.source.labels(),
            featurized: &src,
        };
        let (train_f, val_f) = (Featurized::new(&train, &enc), Featurized::new(&val, &enc));
        let test_f = Featurized::new(&c.test, &enc);
        let ft = FinetuneConfig {
            seed,
            ..FinetuneConfig::default()
        };
        let score = |method| {
            let theta = initialize(method, 4, &source, Some(&subsets), &recipe, seed).unwrap();
            let (p, _) = finetune(&theta, &train_f, &val_f, &ft, HeadPolicy::Keep, enc.precision).unwrap();
            uar(&predict(&p, &test_f.features).unwrap(), &test_f.labels).unwrap()
        };
        let (meta, random) = (score(Method::ReptilePpts), score(Method::Direct));
        wins += usize::from(meta > random);
        scores.push((meta, random));
    }
    assert!(wins >= 8, "meta init won {wins}/10: {scores:?}");
}
