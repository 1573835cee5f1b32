use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use analogy_meta::cluster::{build_subsets, compute_sim, fit_dummy_classifier, DummyConfig, LabelSubsets};
use analogy_meta::corpus::{generate_synthetic, Corpus, SynthSpec};
use analogy_meta::harness::{emit_report, k_sweep, recalls, run_protocol, ProtocolData, RunFile, TableAxis};
use analogy_meta::meta::{finetune, initialize, FinetuneConfig, HeadPolicy, Method, SourceData};
use analogy_meta::model::{load_checkpoint, predict, save_checkpoint, Checkpoint, Featurized};
use analogy_meta::{rng, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "analogy", version, about = "Label-clustering task augmentation and meta-learning for sparse utterance classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic source/target/test triple with planted label structure.
    Synth(SynthArgs),
    /// Fit the in-domain classifier and build K source labels per target label.
    Cluster(ClusterArgs),
    /// Initialize with one method, fine-tune on target data, save a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a labelled corpus.
    Eval(EvalArgs),
    /// Run the repeated sparse-data protocol described by a config file.
    Protocol(ProtocolArgs),
    /// Run the protocol for each K in a list.
    Sweep(SweepArgs),
}

/// Unset fields keep the reference benchmark values.
#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k_true: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    sessions: Option<usize>,
    #[arg(long)]
    target_utterances: Option<usize>,
    #[arg(long)]
    test_sessions: Option<usize>,
    /// Relative spread of source class sizes, in [0, 1).
    #[arg(long)]
    size_skew: Option<f64>,
}

/// Hyperparameters shared by `cluster` and `train`: an optional config file
/// plus `key=value` overrides.
#[derive(Args, Debug)]
struct Hyper {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subsets file to write (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    hyper: Hyper,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    method: Method,
    /// Target training sessions.
    #[arg(long)]
    target: PathBuf,
    /// Target validation sessions (fine-tuning model selection).
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: Hyper,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args, Debug)]
struct ProtocolArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: ProtocolArgs,
    /// Comma-separated K values.
    #[arg(long, value_delimiter = ',', required = true)]
    k_list: Vec<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Cluster(a) => cluster(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Protocol(a) => protocol(a, None),
        Command::Sweep(a) => protocol(a.run, Some(a.k_list)),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let b = SynthSpec::benchmark();
    let spec = SynthSpec {
        m: a.m.unwrap_or(b.m),
        n: a.n.unwrap_or(b.n),
        k_true: a.k_true.unwrap_or(b.k_true),
        vocab_per_class: a.vocab.unwrap_or(b.vocab_per_class),
        noise: a.noise.unwrap_or(b.noise),
        utterances_per_source_class: a.per_class.unwrap_or(b.utterances_per_source_class),
        sessions: a.sessions.unwrap_or(b.sessions),
        target_utterances: a.target_utterances.unwrap_or(b.target_utterances),
        test_sessions: a.test_sessions.unwrap_or(b.test_sessions),
        size_skew: a.size_skew.unwrap_or(b.size_skew),
        ..b
    };
    let c = generate_synthetic(&spec, a.seed)?;
    std::fs::create_dir_all(&a.out)?;
    c.source.save(&a.out.join("source.jsonl"))?;
    c.target.save(&a.out.join("target.jsonl"))?;
    c.test.save(&a.out.join("test.jsonl"))?;
    c.target.labels().save(&a.out.join("target.labels"))?;
    c.source.labels().save(&a.out.join("source.labels"))?;
    LabelSubsets::new(c.planted.clone())?.save(&a.out.join("planted.tsv"), c.target.labels(), c.source.labels())?;
    c.coarse.save(&a.out.join("coarse.tsv"))?;
    std::fs::write(a.out.join("spec.json"), serde_json::to_string_pretty(&(&spec, a.seed))?)?;
    std::fs::write(a.out.join("protocol.conf"), SYNTH_PROTOCOL)?;
    println!(
        "wrote {} source, {} target, {} test utterances to {}",
        c.source.len(),
        c.target.len(),
        c.test.len(),
        a.out.display()
    );
    Ok(())
}

/// Reference protocol over the files `synth` writes.
const SYNTH_PROTOCOL: &str = "\
target = target.jsonl
test = test.jsonl
source = source.jsonl
tag_map = coarse.tsv
out = report
levels = 1,5,25
repeats = 10
k = 3
methods = all
seed = 0
hash_buckets = 4096
hidden_dim = 32
beta = 0.5
inner_steps = 5
tasks_per_step = 4
meta_epochs = 20
meta_batch = 16
";

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn run_file(config: Option<&Path>, set: &[String]) -> Result<RunFile> {
    let mut rf = match config {
        Some(p) => RunFile::load(p).map_err(|e| match e {
            Error::Io(io) => usage(format!("cannot read config {}: {io}", p.display())),
            e => e,
        })?,
        None => RunFile::parse("", Path::new("."))?,
    };
    for s in set {
        let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        rf.set(k, v, Path::new(".")).map_err(|m| usage(format!("--set {k}: {m}")))?;
        rf.entries.push((k.to_string(), v.to_string()));
    }
    Ok(rf)
}

/// Target label space: `<name>.labels` next to the corpus when present,
/// otherwise inferred from the corpus itself.
fn load_target(path: &Path) -> Result<Corpus> {
    let labels = path.with_extension("labels");
    let space = if labels.exists() {
        Some(analogy_meta::corpus::LabelSpace::load(&labels)?)
    } else {
        None
    };
    Corpus::load(path, space)
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let rf = run_file(a.hyper.config.as_deref(), &a.hyper.set)?;
    let target = load_target(&a.target)?;
    let source = load_target(&a.source)?;
    let dummy = DummyConfig {
        seed: a.seed,
        ..rf.protocol.dummy.clone()
    };
    let f = fit_dummy_classifier(&target, &rf.protocol.recipe.encoder, &dummy)?;
    let sim = compute_sim(&f, &source)?;
    let subsets = build_subsets(&sim, a.k)?;
    let text = subsets.to_text(target.labels(), source.labels());
    match a.out {
        Some(p) => {
            std::fs::write(&p, &text)?;
            eprintln!("wrote {} subsets of {} labels to {}", subsets.m(), subsets.k(), p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let rf = run_file(a.hyper.config.as_deref(), &a.hyper.set)?;
    let recipe = &rf.protocol.recipe;
    let enc = &recipe.encoder;
    let train_c = load_target(&a.target)?;
    let val_c = Corpus::load(&a.val, Some(train_c.labels().clone()))?;
    let m = train_c.labels().len();
    let source_c = match (&a.source, a.method) {
        (Some(p), _) => Some(load_target(p)?),
        (None, Method::Direct) => None,
        (None, m) => return Err(usage(format!("method {m} needs --source"))),
    };
    let source_f = source_c.as_ref().map(|c| Featurized::new(c, enc));
    let subsets = match (&source_c, a.method.needs_subsets()) {
        (Some(s), true) => {
            let dummy = DummyConfig {
                seed: rng::derive(a.seed, &[10]),
                ..rf.protocol.dummy.clone()
            };
            let f = fit_dummy_classifier(&train_c, enc, &dummy)?;
            Some(build_subsets(&compute_sim(&f, s)?, a.k)?)
        }
        _ => None,
    };
    let theta = match (&source_c, &source_f) {
        (Some(c), Some(f)) => {
            let sd = SourceData {
                labels: c.labels(),
                featurized: f,
            };
            initialize(a.method, m, &sd, subsets.as_ref(), recipe, rng::derive(a.seed, &[20]))?
        }
        _ => enc.with_classes(m).init(rng::derive(rng::derive(a.seed, &[20]), &[1])),
    };
    let ft = FinetuneConfig {
        seed: rng::derive(a.seed, &[30]),
        ..rf.protocol.finetune.clone()
    };
    let (params, choice) = finetune(
        &theta,
        &Featurized::new(&train_c, enc),
        &Featurized::new(&val_c, enc),
        &ft,
        HeadPolicy::Keep,
        enc.precision,
    )?;
    let info = serde_json::json!({
        "method": a.method.name(),
        "target": a.target.display().to_string(),
        "val": a.val.display().to_string(),
        "source": a.source.as_ref().map(|p| p.display().to_string()),
        "k": a.k,
        "seed": a.seed,
        "settings": rf.entries,
        "chosen_lr": choice.learning_rate,
        "chosen_epochs": choice.epochs,
        "val_loss": choice.val_loss,
    });
    save_checkpoint(
        &a.out,
        &Checkpoint {
            encoder: enc.with_classes(m),
            labels: train_c.labels().names().to_vec(),
            info,
            params,
        },
    )?;
    println!(
        "method={} lr={} epochs={} val_loss={:.6} -> {}",
        a.method,
        choice.learning_rate,
        choice.epochs,
        choice.val_loss,
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let labels = analogy_meta::corpus::LabelSpace::new(ck.labels.clone())?;
    let test = Corpus::load(&a.test, Some(labels))?;
    let f = Featurized::new(&test, &ck.encoder);
    let preds = predict(&ck.params, &f.features)?;
    let (uar, per) = recalls(&preds, &f.labels, ck.labels.len())?;
    println!("# checkpoint: {}", a.checkpoint.display());
    println!("# test: {}", a.test.display());
    println!("# trained with: {}", ck.info);
    for (name, r) in ck.labels.iter().zip(&per) {
        match r {
            Some(r) => println!("recall\t{name}\t{r:.4}"),
            None => println!("recall\t{name}\tn/a"),
        }
    }
    println!("uar\t{uar:.4}");
    Ok(())
}

fn protocol(a: ProtocolArgs, k_list: Option<Vec<usize>>) -> Result<()> {
    let rf = run_file(Some(&a.config), &a.set)?;
    let need = |p: &Option<PathBuf>, k: &str| p.clone().ok_or_else(|| usage(format!("config must set `{k}`")));
    let target = load_target(&need(&rf.target, "target")?)?;
    let test = Corpus::load(&need(&rf.test, "test")?, Some(target.labels().clone()))?;
    let source = load_target(&need(&rf.source, "source")?)?;
    let out_dir = a.out.clone().or(rf.out.clone()).ok_or_else(|| usage("no output directory: pass --out or set `out`"))?;
    let data = ProtocolData {
        target: &target,
        test: &test,
        source: &source,
    };
    let mut header: Vec<(String, String)> = vec![("config".into(), a.config.display().to_string())];
    header.extend(rf.entries.iter().cloned());
    header.push(("out_dir".into(), out_dir.display().to_string()));
    let (outcome, axis) = match &k_list {
        Some(ks) => {
            header.push(("k_list".into(), ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")));
            (k_sweep(data, &rf.protocol, ks)?, TableAxis::K)
        }
        None => (run_protocol(data, &rf.protocol)?, TableAxis::Level),
    };
    emit_report(&out_dir, &outcome, &rf.protocol.methods, axis, &header)?;
    println!(
        "{} runs, {} skipped; wrote {}",
        outcome.results.len(),
        outcome.skipped.len(),
        out_dir.display()
    );
    Ok(())
}
