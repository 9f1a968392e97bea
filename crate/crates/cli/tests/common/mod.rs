#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn lemaug<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_lemaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the command and panics with its stderr unless it exits with 0.
pub fn ok<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = lemaug(args);
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn latvian_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/latvian_nouns.tsv")
}

/// Small synthetic configuration that trains in a few seconds.
pub const SYNTH_CONFIG: &str =
    "n_stems=40\nn_slots=4\nn_classes=2\nhomography_rate=0.2\ncorpus_size=600\n\
train_sentences=200\ndev_sentences=60\ntest_sentences=60\n";

pub const TRAIN_CONFIG: &str =
    "embed_dim=8\nhidden_dim=12\nmax_target_len=14\nmax_epochs=4\nburn_in=0\n\
validation_interval=1\npatience=2\nbatch_size=16\n";

/// Every stage end to end in `dir`. Returns the files it wrote.
pub fn run_pipeline(dir: &Path) -> Vec<PathBuf> {
    let p = |name: &str| dir.join(name);
    let s = |path: PathBuf| path.to_string_lossy().into_owned();
    fs::write(p("synth.cfg"), SYNTH_CONFIG).unwrap();
    fs::write(p("train.cfg"), TRAIN_CONFIG).unwrap();

    ok([
        "synth",
        "--config",
        &s(p("synth.cfg")),
        "--seed",
        "7",
        "--out-dir",
        &s(p("lang")),
    ]);
    ok([
        "extract",
        "--um",
        &s(p("lang/lexicon.tsv")),
        "--out",
        &s(p("pairs.tsv")),
        "--report",
        &s(p("ambiguity.json")),
        "--treebank",
        &s(p("lang/train.conllu")),
    ]);
    ok([
        "prepare",
        "--input",
        &s(p("lang/raw.txt")),
        "--out",
        &s(p("raw.tok")),
        "--seed",
        "3",
    ]);
    ok([
        "sample",
        "--conllu",
        &s(p("lang/train.conllu")),
        "--n",
        "80",
        "--out",
        &s(p("base.ex")),
    ]);
    ok([
        "sample",
        "--conllu",
        &s(p("lang/dev.conllu")),
        "--n",
        "40",
        "--unit",
        "tokens",
        "--out",
        &s(p("dev.ex")),
    ]);
    ok([
        "sample",
        "--conllu",
        &s(p("lang/test.conllu")),
        "--n",
        "150",
        "--unit",
        "tokens",
        "--out",
        &s(p("test.ex")),
    ]);
    ok([
        "harvest",
        "--corpus",
        &s(p("raw.tok")),
        "--pairs",
        &s(p("pairs.tsv")),
        "--n",
        "60",
        "--seed",
        "1",
        "--out",
        &s(p("harvest.ex")),
        "--summary",
        &s(p("harvest.json")),
    ]);
    ok([
        "harvest",
        "--corpus",
        &s(p("raw.tok")),
        "--pairs",
        &s(p("pairs.tsv")),
        "--n",
        "20",
        "--j",
        "2",
        "--seed",
        "1",
        "--out",
        &s(p("harvest_j2.ex")),
        "--summary",
        &s(p("harvest_j2.json")),
    ]);
    ok([
        "encode",
        "--examples",
        &s(p("base.ex")),
        "--N",
        "10",
        "--out-prefix",
        &s(p("base")),
    ]);
    ok([
        "encode",
        "--examples",
        &s(p("harvest.ex")),
        "--N",
        "0",
        "--ae",
        "--out-prefix",
        &s(p("ae")),
    ]);
    ok([
        "encode",
        "--examples",
        &s(p("dev.ex")),
        "--N",
        "10",
        "--out-prefix",
        &s(p("dev")),
    ]);
    ok([
        "encode",
        "--examples",
        &s(p("test.ex")),
        "--N",
        "10",
        "--out-prefix",
        &s(p("test")),
    ]);
    ok([
        "train",
        "--src",
        &s(p("base.src")),
        "--trg",
        &s(p("base.trg")),
        "--dev-src",
        &s(p("dev.src")),
        "--dev-trg",
        &s(p("dev.trg")),
        "--config",
        &s(p("train.cfg")),
        "--seed",
        "11",
        "--out",
        &s(p("model.json")),
        "--log",
        &s(p("train.log")),
    ]);
    ok([
        "predict",
        "--model",
        &s(p("model.json")),
        "--input",
        &s(p("test.ex")),
        "--format",
        "examples",
        "--out",
        &s(p("test.pred")),
    ]);
    ok([
        "predict",
        "--model",
        &s(p("model.json")),
        "--input",
        &s(p("test.src")),
        "--beam",
        "3",
        "--out",
        &s(p("test.beam.pred")),
    ]);
    ok([
        "baseline",
        "--train",
        &s(p("base.ex")),
        &s(p("harvest.ex")),
        "--input",
        &s(p("test.ex")),
        "--seed",
        "5",
        "--out",
        &s(p("test.mfl")),
        "--table",
        &s(p("mfl.tsv")),
    ]);
    ok([
        "eval",
        "--pred",
        &s(p("test.pred")),
        "--gold",
        &s(p("test.ex")),
        "--train-sets",
        &s(p("base.ex")),
        "--reference-corpus",
        &s(p("lang/train.conllu")),
        "--out",
        &s(p("report.json")),
    ]);
    ok([
        "eval",
        "--pred",
        &s(p("test.mfl")),
        "--gold",
        &s(p("test.ex")),
        "--train-sets",
        &s(p("base.ex")),
        &s(p("harvest.ex")),
        "--reference-corpus",
        &s(p("lang/train.conllu")),
        "--grouping",
        "first-token",
        "--out",
        &s(p("report_mfl.json")),
    ]);

    let mut files: Vec<PathBuf> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    files.sort();
    files
}
