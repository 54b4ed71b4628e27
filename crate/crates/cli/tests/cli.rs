use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_maskvec");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MASKVEC_THREADS").output().expect("spawn maskvec")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Contents of every file under `dir`, skipping `skip`.
fn snapshot(dir: &Path, skip: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path == skip {
            continue;
        }
        if path.is_dir() {
            out.extend(snapshot(&path, skip));
        } else {
            out.insert(path.clone(), std::fs::read(&path).unwrap());
        }
    }
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    ok(&["synth", "--output-dir", p(dir)]);
}

/// Exit code and the single stderr line of a failing run.
fn failure(args: &[&str]) -> (i32, String) {
    let out = run(args);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    (out.status.code().unwrap(), err)
}

#[test]
fn help_succeeds_for_every_command() {
    let commands = [
        vec![],
        vec!["vocab"],
        vec!["pretrain"],
        vec!["analyze-anisotropy"],
        vec!["analyze-bias"],
        vec!["pca-export"],
        vec!["encode"],
        vec!["template-search"],
        vec!["train"],
        vec!["train-template"],
        vec!["eval"],
        vec!["experiment"],
        vec!["experiment", "objectives"],
        vec!["synth"],
    ];
    for mut args in commands {
        args.push("--help");
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{args:?}");
    }
}

#[test]
fn errors_are_one_classified_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.emb");

    let out = run(&["analyze-bias", "--embeddings"]);
    assert_eq!(out.status.code(), Some(2));

    let (code, err) = failure(&["pca-export", "--embeddings", p(&missing)]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error[data]: reading embeddings"), "{err}");

    let bad = dir.path().join("bad.emb");
    std::fs::write(&bad, b"NOPE").unwrap();
    let (code, err) = failure(&["pca-export", "--embeddings", p(&bad)]);
    assert_eq!(code, 3, "{err}");

    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "[model]\nlayerz = 2\n").unwrap();
    let (code, err) = failure(&["pretrain", "--config", p(&conf)]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown key \"layerz\""), "{err}");

    let out = Command::new(BIN).args(["synth", "--output-dir", p(dir.path())]).env("MASKVEC_THREADS", "0").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bias_ladder_is_monotone_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let args = |out: &Path| {
        [
            "analyze-bias",
            "--no-timestamp",
            "--embeddings",
            p(&dir.path().join("biased/biased.emb")),
            "--sts-dir",
            p(&dir.path().join("biased/sts")),
            "--output",
            p(out),
        ]
        .map(str::to_string)
    };
    let (a, b) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
    ok(&args(&a).each_ref().map(String::as_str));
    ok(&args(&b).each_ref().map(String::as_str));
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());

    let averages: Vec<f64> =
        text.lines().skip(1).map(|l| l.rsplit('\t').next().unwrap().parse().unwrap()).collect();
    assert_eq!(averages.len(), 5, "{text}");
    assert!(averages.windows(2).all(|w| w[1] > w[0]), "{text}");
}

#[test]
fn timestamp_header_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let emb = dir.path().join("biased/biased.emb");
    let stamped = ok(&["pca-export", "--embeddings", p(&emb)]);
    let plain = ok(&["pca-export", "--no-timestamp", "--embeddings", p(&emb)]);
    assert!(stamped.starts_with("# generated by maskvec"));
    assert_eq!(stamped.split_once('\n').unwrap().1, plain);
    assert!(plain.starts_with("id\ttoken\tx\ty\t"));
}

#[test]
fn full_pipeline_on_synthetic_data() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path();
    synth(data);
    let conf = data.join("desk.conf");
    let vocab = data.join("vocab.tsv");
    let runs = data.join("runs");
    let inputs = snapshot(data, &runs);

    ok(&["vocab", p(&data.join("corpus.txt")), "--output", p(&data.join("corpus-vocab.tsv"))]);
    ok(&["pretrain", "--no-timestamp", "--config", p(&conf)]);
    ok(&["train", "--no-timestamp", "--config", p(&conf)]);
    assert!(runs.join("trained.mlm1").is_file());
    let trace = std::fs::read_to_string(runs.join("train_trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 1001, "header plus one row per step");

    let eval = |checkpoint: &str| {
        let text = ok(&[
            "eval",
            "--no-timestamp",
            "--checkpoint",
            p(&runs.join(checkpoint)),
            "--vocab",
            p(&vocab),
            "--sts-dir",
            p(&data.join("sts-test")),
        ]);
        let row = text.lines().find(|l| l.starts_with("prompt-mask\t")).unwrap().to_string();
        (text, row.rsplit('\t').next().unwrap().parse::<f64>().unwrap())
    };
    let (_, before) = eval("pretrained.mlm1");
    let (text, after) = eval("trained.mlm1");
    assert!(after - before >= 0.2, "prompt-mask {before} -> {after}");
    assert_eq!(text, eval("trained.mlm1").0);

    let tpl = runs.join("continuous.tpl1");
    ok(&["train-template", "--config", p(&conf)]);
    let encoded = ok(&[
        "encode",
        "--no-timestamp",
        "--checkpoint",
        p(&runs.join("trained.mlm1")),
        "--vocab",
        p(&vocab),
        "--template-file",
        p(&tpl),
        "--input",
        p(&data.join("corpus.txt")),
    ]);
    assert_eq!(encoded.lines().count(), 4000);
    assert_eq!(encoded.lines().next().unwrap().split('\t').count(), 64);

    let best = ok(&[
        "template-search",
        "--checkpoint",
        p(&runs.join("trained.mlm1")),
        "--vocab",
        p(&vocab),
        "--rel-file",
        p(&data.join("relationships.txt")),
        "--prefix-file",
        p(&data.join("prefixes.txt")),
        "--dev",
        p(&data.join("sts-dev.tsv")),
    ]);
    assert!(best.contains("[X]") && best.contains("[MASK]"), "{best}");

    ok(&["analyze-bias", "--embeddings", p(&data.join("biased/biased.emb")), "--sts-dir", p(&data.join("biased/sts"))]);
    let mut after = snapshot(data, &runs);
    after.remove(&data.join("corpus-vocab.tsv")).unwrap();
    assert!(after == inputs, "a command modified its inputs");

    assert!(start.elapsed() < Duration::from_secs(300), "pipeline took {:?}", start.elapsed());
}
