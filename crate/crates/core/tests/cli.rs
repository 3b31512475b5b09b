//! End-to-end CLI checks: exit codes, file outputs, and the
//! synth -> build-dict -> eval loop.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eigenwords")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Fixture {
    _tmp: tempfile::TempDir,
    corpus: PathBuf,
    labels: PathBuf,
    dir: PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    let corpus = dir.join("corpus.txt");
    let labels = dir.join("labels.tsv");
    ok(&[
        "synth", "--states", "5", "--vocab", "60", "--tokens", "8000", "--seed", "3",
        "--out-corpus", corpus.to_str().unwrap(),
        "--out-labels", labels.to_str().unwrap(),
    ]);
    Fixture { _tmp: tmp, corpus, labels, dir }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let f = fixture();
    let out_dict = f.dir.join("d.tsv");
    // k1 below k
    let out = run(&[
        "build-dict", s(&f.corpus), "--k", "10", "--k1", "5", "--seed", "0",
        "--out", s(&out_dict),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // unknown method
    let out = run(&[
        "build-dict", s(&f.corpus), "--method", "lsa", "--seed", "0",
        "--out", s(&out_dict),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // bad train fraction
    let out = run(&[
        "eval", s(&out_dict), s(&f.labels), "--train-frac", "1.5",
        "--out", s(&f.dir.join("r.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let f = fixture();
    // missing corpus file
    let out = run(&[
        "build-dict", s(&f.dir.join("nope.txt")), "--seed", "0",
        "--out", s(&f.dir.join("d.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    // unknown query word
    let dict = f.dir.join("d.tsv");
    ok(&[
        "build-dict", s(&f.corpus), "--method", "oscca", "--k", "5", "--seed", "0",
        "--out", s(&dict),
    ]);
    let out = run(&["neighbors", s(&dict), "zzz-not-a-word"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_build_eval_loop() {
    let f = fixture();
    let dict = f.dir.join("d.tsv");
    let report = f.dir.join("r.csv");
    ok(&[
        "build-dict", s(&f.corpus), "--method", "tscca", "--k", "8", "--ridge", "1.0",
        "--ridge1", "0.3", "--seed", "7", "--normalize", "--out", s(&dict),
    ]);
    assert!(f.dir.join("d.normalized.tsv").exists());
    assert!(f.dir.join("d.tsv.manifest").exists());
    let manifest = std::fs::read_to_string(f.dir.join("d.tsv.manifest")).unwrap();
    assert!(manifest.contains("method=tscca"));
    assert!(manifest.contains("k=8"));
    assert!(manifest.contains("ridge1="));

    ok(&["eval", s(&dict), s(&f.labels), "--out", s(&report)]);
    let csv = std::fs::read_to_string(&report).unwrap();
    let mean: f64 = csv
        .lines()
        .find(|l| l.starts_with("mean,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    // five balanced classes: anything clearly above chance
    assert!(mean > 0.3, "eval accuracy {mean}");

    let nn = ok(&["neighbors", s(&dict), "w00", "--m", "4"]);
    let lines: Vec<&str> = std::str::from_utf8(&nn.stdout).unwrap().lines().collect();
    assert_eq!(lines.len(), 4);
    for line in lines {
        let (word, sim) = line.split_once('\t').unwrap();
        assert_ne!(word, "w00");
        let sim: f64 = sim.parse().unwrap();
        assert!((-1.0..=1.0).contains(&sim), "cosine {sim}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let f = fixture();
    let conf = f.dir.join("run.conf");
    std::fs::write(&conf, "method=oscca\nk=4\nridge=0.5\nscaling=raw\n").unwrap();
    let dict = f.dir.join("d.tsv");
    // --k overrides the file's k; method comes from the file
    ok(&[
        "build-dict", s(&f.corpus), "--config", s(&conf), "--k", "6", "--seed", "1",
        "--out", s(&dict),
    ]);
    let header = std::fs::read_to_string(&dict).unwrap();
    let header = header.lines().next().unwrap().to_string();
    assert!(header.contains("method=oscca"), "{header}");
    assert!(header.contains(" k=6 "), "{header}");
}
