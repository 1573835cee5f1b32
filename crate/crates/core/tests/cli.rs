use std::path::Path;
use std::process::{Command, Output};

fn analogy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_analogy"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: [&str; 6] = ["--set", "hash_buckets=1024", "--set", "hidden_dim=16", "--set", "meta_iterations=5"];

fn synth(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data");
    let o = analogy(&["synth", "--out", s(&data), "--seed", "4", "--per-class", "40"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    data
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&analogy(&[])), 1);
    assert_eq!(code(&analogy(&["frobnicate"])), 1);
    assert_eq!(code(&analogy(&["synth"])), 1);
    assert_eq!(code(&analogy(&["eval", "--checkpoint"])), 1);
    assert_eq!(code(&analogy(&["--help"])), 0);
    assert_eq!(code(&analogy(&["sweep", "--config", "x.conf"])), 1);
}

#[test]
fn synth_cluster_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    for f in ["source.jsonl", "target.jsonl", "test.jsonl", "planted.tsv", "coarse.tsv", "protocol.conf"] {
        assert!(data.join(f).exists(), "{f} missing");
    }

    let (target, source, test) = (data.join("target.jsonl"), data.join("source.jsonl"), data.join("test.jsonl"));
    let subsets = dir.path().join("subsets.tsv");
    let mut args = vec![
        "cluster",
        "--target",
        s(&target),
        "--source",
        s(&source),
        "--k",
        "3",
        "--out",
        s(&subsets),
    ];
    args.extend(SMALL);
    let o = analogy(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&subsets).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.split('\t').nth(1).unwrap().split(',').count() == 3));

    let ckpt = dir.path().join("model.ckpt");
    let mut args = vec![
        "train",
        "--method",
        "reptile-ppts",
        "--target",
        s(&target),
        "--val",
        s(&test),
        "--source",
        s(&source),
        "--seed",
        "3",
        "--out",
        s(&ckpt),
    ];
    args.extend(SMALL);
    let o = analogy(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = analogy(&["eval", "--checkpoint", s(&ckpt), "--test", s(&test)]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    let uar: f64 = out.lines().find_map(|l| l.strip_prefix("uar\t")).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&uar));
    assert!(out.contains("reptile-ppts"), "training flags echoed: {out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("recall\t")).count(), 4);
}

#[test]
fn train_flag_validation() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let base = |method: &'static str| {
        vec![
            "train".to_string(),
            "--method".into(),
            method.into(),
            "--target".into(),
            s(&data.join("target.jsonl")).into(),
            "--val".into(),
            s(&data.join("test.jsonl")).into(),
            "--out".into(),
            s(&dir.path().join("m.ckpt")).into(),
        ]
    };
    let run = |v: Vec<String>| code(&analogy(&v.iter().map(String::as_str).collect::<Vec<_>>()));
    assert_eq!(run(base("direct")), 0);
    assert_eq!(run(base("reptile-uniform")), 1, "source required");
    assert_eq!(run(base("no-such-method")), 1);
    let mut bad = base("direct");
    bad.extend(["--set".into(), "bogus=1".into()]);
    assert_eq!(run(bad), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ckpt");
    assert_eq!(code(&analogy(&["eval", "--checkpoint", s(&missing), "--test", "x.jsonl"])), 2);

    let garbage = dir.path().join("garbage.ckpt");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    assert_eq!(code(&analogy(&["eval", "--checkpoint", s(&garbage), "--test", "x.jsonl"])), 2);

    let data = synth(dir.path());
    std::fs::write(data.join("target.jsonl"), "{\"session\": \"a\"\n").unwrap();
    let o = analogy(&["protocol", "--config", s(&data.join("protocol.conf"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&analogy(&["protocol", "--config", s(&dir.path().join("none.conf"))])), 1);
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "levels = 1\nunknown_key = 3\n").unwrap();
    let o = analogy(&["protocol", "--config", s(&conf)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn protocol_and_sweep_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let conf = data.join("protocol.conf");
    let out = dir.path().join("p");
    let mut args = vec![
        "protocol",
        "--config",
        s(&conf),
        "--out",
        s(&out),
        "--set",
        "levels=1",
        "--set",
        "repeats=2",
        "--set",
        "methods=direct,reptile-ppts",
    ];
    args.extend(SMALL);
    let o = analogy(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("- repeats: `2`"), "{md}");
    assert!(md.contains("- meta_iterations: `5`"), "{md}");
    assert!(md.contains("| sessions=1 |"));

    let out = dir.path().join("s");
    let mut args = vec![
        "sweep",
        "--config",
        s(&conf),
        "--out",
        s(&out),
        "--k-list",
        "2,7",
        "--set",
        "levels=1",
        "--set",
        "repeats=1",
        "--set",
        "methods=reptile-uniform",
    ];
    args.extend(SMALL);
    let o = analogy(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("- k_list: `2,7`"));
    assert!(md.contains("| K=2 |"));
    assert!(md.contains("## Skipped") && md.contains("K=7"), "{md}");
}
