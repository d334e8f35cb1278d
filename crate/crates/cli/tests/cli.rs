use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TRAIN: &str = "le B-D\nchat B-N\ndort B-V\n\nun B-D\nchien B-N\nmange B-V\n\nle B-D\nchien B-N\ndort B-V\n\nun B-D\nchat B-N\nmange B-V\n";
const DEV: &str = "un B-D\nchat B-N\ndort B-V\n\nle B-D\nchien B-N\nmange B-V\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seq2biseq"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Setup {
    dir: tempfile::TempDir,
}

impl Setup {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train.txt"), TRAIN).unwrap();
        std::fs::write(dir.path().join("dev.txt"), DEV).unwrap();
        std::fs::write(
            dir.path().join("small.cfg"),
            "word_emb = 8\nchar_emb = 4\nlabel_emb = 4\nchar_layer = 8\nword_layer = 8\ndecoder_hidden = 8\nbatch_size = 2\nsegment_len = 3\n",
        )
        .unwrap();
        Setup { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, epochs: &str, extra: &[&str]) -> Output {
        let (train, dev, model, log, cfg) = (
            self.path("train.txt"),
            self.path("dev.txt"),
            self.path("model.s2b"),
            self.path("log.tsv"),
            self.path("small.cfg"),
        );
        let mut args = vec![
            "train",
            "--train",
            s(&train),
            "--dev",
            s(&dev),
            "--model",
            s(&model),
            "--log",
            s(&log),
            "--config",
            s(&cfg),
            "--epochs",
            epochs,
        ];
        args.extend_from_slice(extra);
        run(&args)
    }
}

#[test]
fn zero_epochs_writes_an_initialized_model() {
    let st = Setup::new();
    let out = st.train("0", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(st.path("model.s2b").exists());
    assert_eq!(std::fs::read_to_string(st.path("log.tsv")).unwrap(), "");
}

#[test]
fn missing_train_file_fails_with_a_diagnostic() {
    let st = Setup::new();
    let out = run(&["train", "--train", "/no/such/file", "--dev", s(&st.path("dev.txt")), "--model", s(&st.path("m"))]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/no/such/file"), "{err}");
}

#[test]
fn log_has_one_line_per_epoch() {
    let st = Setup::new();
    let out = st.train("3", &["--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(st.path("log.tsv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.lines().all(|l| l.split('\t').count() == 6));
}

#[test]
fn training_is_reproducible_and_tagging_is_byte_identical() {
    let st = Setup::new();
    assert!(st.train("2", &["--regime", "two-opt", "--batching", "clusters"]).status.success());
    let log1 = std::fs::read(st.path("log.tsv")).unwrap();
    let model1 = std::fs::read(st.path("model.s2b")).unwrap();
    assert!(st.train("2", &["--regime", "two-opt", "--batching", "clusters"]).status.success());
    assert_eq!(std::fs::read(st.path("log.tsv")).unwrap(), log1);
    assert_eq!(std::fs::read(st.path("model.s2b")).unwrap(), model1);

    std::fs::write(st.path("input.txt"), "le\nchat\ninconnu\n\nun\n").unwrap();
    let tag = || run(&["tag", "--model", s(&st.path("model.s2b")), "--input", s(&st.path("input.txt"))]);
    let (a, b) = (tag(), tag());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let blocks: Vec<&str> = text.split("\n\n").filter(|b| !b.is_empty()).collect();
    assert_eq!(blocks.len(), 2);
    assert!(text.starts_with("le\t") && text.contains("\ninconnu\t"));
}

#[test]
fn empty_tag_input_gives_empty_output() {
    let st = Setup::new();
    assert!(st.train("0", &[]).status.success());
    std::fs::write(st.path("empty.txt"), "").unwrap();
    let out = run(&["tag", "--model", s(&st.path("model.s2b")), "--input", s(&st.path("empty.txt"))]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn fw_only_with_two_opt_is_rejected() {
    let st = Setup::new();
    let out = st.train("1", &["--fw-only", "--regime", "two-opt"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_config_key_is_an_error() {
    let st = Setup::new();
    std::fs::write(st.path("bad.cfg"), "epochs = 1\nhidden = 3\n").unwrap();
    let out = run(&["train", "--config", s(&st.path("bad.cfg")), "--param-count", "--num-words", "5", "--num-labels", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("hidden"));
}

#[test]
fn eval_of_gold_against_itself() {
    let st = Setup::new();
    let train = st.path("train.txt");
    let out = run(&["eval", "--gold", s(&train), "--pred", s(&train)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("accuracy: 100.00%; precision: 100.00%; recall: 100.00%; FB1: 100.00"), "{text}");
    assert!(text.lines().last().unwrap().starts_with("100.00\t100.00\t100.00\t100.00\t0.00\t12\t"));
    let three: String = TRAIN
        .lines()
        .map(|l| match l.split_once(' ') {
            Some((_, lab)) => format!("{l} {lab}\n"),
            None => "\n".into(),
        })
        .collect();
    std::fs::write(st.path("three.txt"), three).unwrap();
    let out = run(&["eval", "--gold", s(&st.path("three.txt"))]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("FB1: 100.00"));
}

#[test]
fn eval_rejects_misaligned_files() {
    let st = Setup::new();
    let out = run(&["eval", "--gold", s(&st.path("train.txt")), "--pred", s(&st.path("dev.txt"))]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn sigtest_of_identical_systems() {
    let st = Setup::new();
    let g = st.path("train.txt");
    let out = run(&["sigtest", "--gold", s(&g), "--a", s(&g), "--b", s(&g), "--rounds", "100", "--seed", "9"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.contains("p=1\t") && l.contains("rounds=100\tseed=9")), "{text}");
}

#[test]
fn param_count_with_the_reference_sizes() {
    let out = run(&["train", "--param-count", "--num-words", "2210", "--num-labels", "99"]);
    assert!(out.status.success());
    let n: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((n - 2_139_950.0).abs() / 2_139_950.0 <= 0.25, "{n}");
}
