mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use seq2biseq::data::{
    build_vocab, load_model, parse_conll, read_blocks, save_model, ColumnPolicy, Corpus, ModelBundle,
};
use seq2biseq::decoders::tag_sentence;
use seq2biseq::metrics::{approx_randomization_test, evaluate, CerMode, Metric};
use seq2biseq::model::{count_params, VocabSizes};
use seq2biseq::training::{evaluate_corpus, fit};

#[derive(Parser)]
#[command(name = "seq2biseq", version, about = "Train, apply and score sequence labellers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write the snapshot with the best dev accuracy.
    Train(TrainArgs),
    /// Label a file of tokens (first column) with a trained model.
    Tag(TagArgs),
    /// Score predicted labels against gold labels.
    Eval(EvalArgs),
    /// Approximate randomization test between two systems.
    Sigtest(SigtestArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Scored with the best snapshot after training.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Epoch log (tab-separated); stdout when absent.
    #[arg(long)]
    log: Option<PathBuf>,
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// media or wsj.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    segment_len: Option<usize>,
    /// segments or clusters.
    #[arg(long)]
    batching: Option<String>,
    /// single or two-opt.
    #[arg(long)]
    regime: Option<String>,
    /// Drop the backward decoder.
    #[arg(long)]
    fw_only: bool,
    /// Any configuration key, e.g. `--set lr=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the parameter count and exit.
    #[arg(long)]
    param_count: bool,
    /// Vocabulary sizes for --param-count without a training file.
    #[arg(long)]
    num_words: Option<usize>,
    #[arg(long)]
    num_labels: Option<usize>,
    #[arg(long, default_value_t = 100)]
    num_chars: usize,
}

#[derive(Args)]
struct TagArgs {
    #[arg(long)]
    model: PathBuf,
    /// Tokens in the first column, blank line between sentences.
    #[arg(long, alias = "test")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CerArg {
    Pooled,
    Sentence,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold labels in the last column; with no --pred, gold and predicted
    /// labels are the last two columns of this file.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pooled")]
    cer: CerArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SigtestArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// acc, f1, cer or all.
    #[arg(long, default_value = "all")]
    metric: String,
    #[arg(long, default_value_t = 10_000)]
    rounds: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_labelled(path: &Path) -> Result<Corpus> {
    parse_conll(path, ColumnPolicy::TokenLabel).with_context(|| format!("reading {}", path.display()))
}

type LabelRows = Vec<Vec<String>>;

fn labels(c: &Corpus) -> LabelRows {
    c.sentences.iter().map(|s| s.labels.clone()).collect()
}

fn train(args: TrainArgs) -> Result<()> {
    let mut overrides = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((k.to_string(), v));
        }
    };
    push("train", args.train.map(|p| p.display().to_string()));
    push("dev", args.dev.map(|p| p.display().to_string()));
    push("test", args.test.map(|p| p.display().to_string()));
    push("model", args.model.map(|p| p.display().to_string()));
    push("log", args.log.map(|p| p.display().to_string()));
    push("epochs", args.epochs.map(|v| v.to_string()));
    push("seed", args.seed.map(|v| v.to_string()));
    push("segment_len", args.segment_len.map(|v| v.to_string()));
    push("batching", args.batching);
    push("regime", args.regime);
    if args.fw_only {
        push("fw_only", Some("true".into()));
    }
    for kv in &args.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        overrides.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    let cfg = config::resolve(args.config.as_deref(), args.profile.as_deref(), &overrides)?;
    cfg.arch.validate()?;
    cfg.train.validate()?;

    if args.param_count {
        let sizes = match (&cfg.train_path, args.num_words, args.num_labels) {
            (_, Some(words), Some(labels)) => VocabSizes {
                words: words + 3,
                chars: args.num_chars + 2,
                labels,
            },
            (Some(p), _, _) => build_vocab(&read_labelled(p)?, cfg.train.min_count).sizes(),
            _ => bail!("--param-count needs --train or both --num-words and --num-labels"),
        };
        println!("{}", count_params(&cfg.arch, sizes)?);
        return Ok(());
    }

    let Some(train_path) = &cfg.train_path else { bail!("no training file (--train)") };
    let Some(dev_path) = &cfg.dev_path else { bail!("no development file (--dev)") };
    let Some(model_path) = &cfg.model_path else { bail!("no model output path (--model)") };
    let train = read_labelled(train_path)?;
    let dev = read_labelled(dev_path)?;
    let test = cfg.test_path.as_deref().map(read_labelled).transpose()?;

    let mut log = output(cfg.log_path.as_deref())?;
    let mut log_err = None;
    let result = fit(&cfg.train, &cfg.arch, &train, &dev, &mut |e| {
        if log_err.is_none() {
            if let Err(err) = writeln!(log, "{}", e.tsv_line()).and_then(|_| log.flush()) {
                log_err = Some(err);
            }
        }
    })?;
    if let Some(err) = log_err {
        return Err(err).context("writing the epoch log");
    }
    save_model(&result.best, model_path).with_context(|| format!("writing {}", model_path.display()))?;
    eprintln!(
        "saved epoch {} of {} to {}",
        result.best_epoch,
        cfg.train.epochs,
        model_path.display()
    );
    if let Some(test) = test {
        let (report, _) = evaluate_corpus(&result.best, &test)?;
        println!("{report}");
        println!("{}", report.tsv_line());
    }
    Ok(())
}

fn tag(args: TagArgs) -> Result<()> {
    let bundle: ModelBundle =
        load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let corpus = parse_conll(&args.input, ColumnPolicy::TokensOnly)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut out = output(args.out.as_deref())?;
    for s in &corpus.sentences {
        let labels = tag_sentence(&bundle, &s.tokens)?;
        for (t, l) in s.tokens.iter().zip(&labels) {
            writeln!(out, "{t}\t{l}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Gold and predicted label sequences from one three-column file or a pair of
/// labelled files.
fn read_pair(gold: &Path, pred: Option<&Path>) -> Result<(LabelRows, LabelRows)> {
    match pred {
        Some(path) => {
            let (g, p) = (read_labelled(gold)?, read_labelled(path)?);
            if g.len() != p.len() {
                bail!("{} has {} sentences, {} has {}", gold.display(), g.len(), path.display(), p.len());
            }
            Ok((labels(&g), labels(&p)))
        }
        None => {
            let text = fs::read_to_string(gold).with_context(|| format!("reading {}", gold.display()))?;
            let blocks = read_blocks(&text, gold)?;
            if blocks.is_empty() {
                bail!("{}: no sentences", gold.display());
            }
            let (mut g, mut p) = (Vec::new(), Vec::new());
            for (line, rows) in blocks {
                let n = rows[0].len();
                if n < 3 {
                    bail!("{}:{line}: expected token, gold and predicted columns", gold.display());
                }
                g.push(rows.iter().map(|r| r[n - 2].clone()).collect());
                p.push(rows.iter().map(|r| r[n - 1].clone()).collect());
            }
            Ok((g, p))
        }
    }
}

fn eval(args: EvalArgs) -> Result<()> {
    let (gold, pred) = read_pair(&args.gold, args.pred.as_deref())?;
    let mode = match args.cer {
        CerArg::Pooled => CerMode::Pooled,
        CerArg::Sentence => CerMode::SentenceAverage,
    };
    let report = evaluate(&gold, &pred, mode)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{report}")?;
    writeln!(out, "{}", report.tsv_line())?;
    Ok(())
}

fn sigtest(args: SigtestArgs) -> Result<()> {
    let gold = labels(&read_labelled(&args.gold)?);
    let a = labels(&read_labelled(&args.a)?);
    let b = labels(&read_labelled(&args.b)?);
    let metrics: Vec<Metric> = match args.metric.as_str() {
        "all" => vec![Metric::Accuracy, Metric::F1, Metric::Cer],
        m => vec![m.parse()?],
    };
    let mut out = output(args.out.as_deref())?;
    for metric in metrics {
        let t = approx_randomization_test(&a, &b, &gold, metric, args.rounds, args.seed)?;
        let name = match metric {
            Metric::Accuracy => "acc",
            Metric::F1 => "f1",
            Metric::Cer => "cer",
        };
        writeln!(
            out,
            "{name}\tdelta={:.4}\tp={}\trounds={}\tseed={}\t{}",
            t.observed,
            t.p_value,
            args.rounds,
            args.seed,
            if t.exact { "exact" } else { "sampled" }
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Tag(a) => tag(a),
        Command::Eval(a) => eval(a),
        Command::Sigtest(a) => sigtest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
