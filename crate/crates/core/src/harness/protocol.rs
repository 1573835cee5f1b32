use crate::cluster::{build_subsets, Classifier, DummyConfig, LabelSubsets, SimMatrix};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::meta::{finetune, initialize, FinetuneConfig, HeadPolicy, Method, RecipeConfig, SourceData};
use crate::model::{predict, Featurized};
use crate::par;
use crate::rng;

use super::metrics::recalls;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Number of training sessions per draw; the validation draw has the
    /// same size.
    pub sparsity_levels: Vec<usize>,
    pub repeats: usize,
    pub methods: Vec<Method>,
    pub k_values: Vec<usize>,
    pub master_seed: u64,
    pub recipe: RecipeConfig,
    /// `seed` is replaced by a per-repeat seed.
    pub dummy: DummyConfig,
    /// `seed` is replaced by a per-repeat seed.
    pub finetune: FinetuneConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            sparsity_levels: vec![1, 5, 25],
            repeats: 15,
            methods: Method::ALL.into_iter().filter(|m| *m != Method::PretrainCoarseTags).collect(),
            k_values: vec![3],
            master_seed: 0,
            recipe: RecipeConfig::default(),
            dummy: DummyConfig::default(),
            finetune: FinetuneConfig::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.sparsity_levels.is_empty() || self.sparsity_levels.contains(&0) {
            return bad("sparsity levels must be non-empty and positive");
        }
        if self.repeats == 0 {
            return bad("repeats must be positive");
        }
        if self.methods.is_empty() {
            return bad("no methods selected");
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return bad("K values must be non-empty and positive");
        }
        if self.dummy.epochs == 0 || !(self.dummy.learning_rate > 0.0) || self.dummy.batch_size == 0 {
            return bad("dummy classifier needs positive learning rate, epochs and batch size");
        }
        if self.methods.contains(&Method::PretrainCoarseTags) && self.recipe.tag_map.is_none() {
            return bad("method pretrain-coarse needs a tag map");
        }
        self.recipe.encoder.validate()?;
        self.recipe.reptile.validate()?;
        self.finetune.grid.validate()
    }
}

/// Target pool the sparse sessions are drawn from, held-out test set, and the
/// labelled source corpus.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolData<'a> {
    pub target: &'a Corpus,
    pub test: &'a Corpus,
    pub source: &'a Corpus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: Method,
    pub level: usize,
    pub repeat: usize,
    pub k: usize,
    pub uar: f64,
    pub recalls: Vec<Option<f64>>,
    pub chosen_lr: f64,
    pub chosen_epochs: usize,
}

/// A (method, K) combination that could not run for a draw, e.g. because the
/// source label pool is too small for `M * K` distinct labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub method: Method,
    pub level: usize,
    pub repeat: usize,
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProtocolOutcome {
    pub results: Vec<RunResult>,
    pub skipped: Vec<Skipped>,
}

/// Seed shared by every method and K within one (level, repeat) draw.
pub fn draw_seed(master: u64, level: usize, repeat: usize) -> u64 {
    rng::derive(master, &[level as u64, repeat as u64])
}

fn infeasible(e: &Error) -> bool {
    match e {
        Error::PoolExhausted { .. } | Error::EnumerationCap { .. } => true,
        Error::Run { source, .. } => infeasible(source),
        _ => false,
    }
}

/// Runs every (level, repeat) draw; within a draw all methods and K values
/// share the same sessions, dummy classifier and seeds. Output order is
/// level, repeat, K, method regardless of scheduling.
pub fn run_protocol(data: ProtocolData, config: &ProtocolConfig) -> Result<ProtocolOutcome> {
    config.validate()?;
    let m = data.target.labels().len();
    if data.test.labels() != data.target.labels() {
        return Err(Error::LabelSpace("test and target corpora use different label spaces".into()));
    }
    let enc = &config.recipe.encoder;
    let source_f = Featurized::new(data.source, enc);
    let test_f = Featurized::new(data.test, enc);
    if test_f.is_empty() {
        return Err(Error::Empty("test corpus"));
    }
    let source = SourceData {
        labels: data.source.labels(),
        featurized: &source_f,
    };
    let cells: Vec<(usize, usize)> = config
        .sparsity_levels
        .iter()
        .flat_map(|&l| (0..config.repeats).map(move |r| (l, r)))
        .collect();
    log::info!("protocol: {} draws x {} methods x {} K values", cells.len(), config.methods.len(), config.k_values.len());
    let parts = par::try_map(&cells, |&(level, repeat)| {
        run_draw(data, &source, &test_f, m, level, repeat, config)
    })?;
    let mut out = ProtocolOutcome::default();
    for p in parts {
        out.results.extend(p.results);
        out.skipped.extend(p.skipped);
    }
    Ok(out)
}

fn run_draw(
    data: ProtocolData,
    source: &SourceData,
    test: &Featurized,
    m: usize,
    level: usize,
    repeat: usize,
    config: &ProtocolConfig,
) -> Result<ProtocolOutcome> {
    let tag = |what: &str| format!("{what} (level {level}, repeat {repeat})");
    let seed = draw_seed(config.master_seed, level, repeat);
    let (train, val) = data
        .target
        .select_sessions(level, level, seed)
        .map_err(|e| e.context(tag("session draw")))?;
    let enc = &config.recipe.encoder;
    let train_f = Featurized::new(&train, enc);
    let val_f = Featurized::new(&val, enc);

    let sim = if config.methods.iter().any(|m| m.needs_subsets()) {
        let dummy = DummyConfig {
            seed: rng::derive(seed, &[10]),
            ..config.dummy.clone()
        };
        let f = crate::cluster::fit_dummy_classifier(&train, enc, &dummy).map_err(|e| e.context(tag("dummy classifier")))?;
        Some(similarity(&f, source.featurized)?)
    } else {
        None
    };

    let mut out = ProtocolOutcome::default();
    for &k in &config.k_values {
        // infeasible K is recorded per method; any other failure aborts
        let subsets: Option<std::result::Result<LabelSubsets, String>> = match sim.as_ref().map(|s| build_subsets(s, k)) {
            None => None,
            Some(Ok(s)) => Some(Ok(s)),
            Some(Err(e)) if infeasible(&e) => Some(Err(e.to_string())),
            Some(Err(e)) => return Err(e.context(format!("label subsets, K={k} (level {level}, repeat {repeat})"))),
        };
        for &method in &config.methods {
            let ctx = |what: &str| format!("{method}, K={k}, level {level}, repeat {repeat}: {what}");
            let subs = match (&subsets, method.needs_subsets()) {
                (Some(Err(reason)), true) => {
                    log::warn!("{}", ctx(reason));
                    out.skipped.push(Skipped {
                        method,
                        level,
                        repeat,
                        k,
                        reason: reason.clone(),
                    });
                    continue;
                }
                (Some(Ok(s)), true) => Some(s),
                _ => None,
            };
            let theta = match initialize(method, m, source, subs, &config.recipe, rng::derive(seed, &[20])) {
                Ok(t) => t,
                Err(e) if infeasible(&e) => {
                    out.skipped.push(Skipped {
                        method,
                        level,
                        repeat,
                        k,
                        reason: e.to_string(),
                    });
                    continue;
                }
                Err(e) => return Err(e.context(ctx("initialization"))),
            };
            let ft = FinetuneConfig {
                seed: rng::derive(seed, &[30]),
                ..config.finetune.clone()
            };
            let (params, choice) =
                finetune(&theta, &train_f, &val_f, &ft, HeadPolicy::Keep, enc.precision).map_err(|e| e.context(ctx("fine-tuning")))?;
            let preds = predict(&params, &test.features)?;
            let (uar, per_class) = recalls(&preds, &test.labels, m)?;
            out.results.push(RunResult {
                method,
                level,
                repeat,
                k,
                uar,
                recalls: per_class,
                chosen_lr: choice.learning_rate,
                chosen_epochs: choice.epochs,
            });
        }
    }
    Ok(out)
}

/// Similarity of `f` over an already featurized source corpus.
pub fn similarity(f: &Classifier, source: &Featurized) -> Result<SimMatrix> {
    let preds = predict(&f.params, &source.features)?;
    SimMatrix::from_predictions(&preds, &source.labels, f.params.dims().classes, source.n_labels)
}
