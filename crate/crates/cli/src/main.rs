mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use icnn::corpus::{tokenize, DatasetFormat, TokenizerMode};
use icnn::patterns::{build_index, extract_pattern, retrieve, DEFAULT_RATIO};
use icnn::trainer::{encode_document, predict_document};
use icnn::{
    evaluate, explain, explain_document, load_dataset, load_model, save_model, train_with, AttributionReport,
    IcnnError, ModelConfig, ModelParams, TrainConfig, TrainMode,
};
use serde::Serialize;

use crate::render::RenderMode;

#[derive(Parser, Debug)]
#[command(name = "icnn", version, about = "Interpretable CNN text classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write it to disk. Prints one JSON line per epoch.
    Train(TrainArgs),
    /// Accuracy and per-class counts on a labelled file.
    Eval(EvalArgs),
    /// Predicted label and probabilities for one text.
    Predict(PredictArgs),
    /// Per-token attribution heatmap for one text.
    Explain(ExplainArgs),
    /// Extract a pattern from one text and retrieve matching training samples.
    ExplainSamples(SamplesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn mode(self) -> TrainMode {
        match self {
            OnOff::On => TrainMode::MultiSentence,
            OnOff::Off => TrainMode::Single,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Trec,
    Tsv,
}

impl From<FormatArg> for DatasetFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Trec => DatasetFormat::Trec,
            FormatArg::Tsv => DatasetFormat::Tsv,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TokenizerArg {
    Word,
    Char,
}

impl From<TokenizerArg> for TokenizerMode {
    fn from(t: TokenizerArg) -> Self {
        match t {
            TokenizerArg::Word => TokenizerMode::Word,
            TokenizerArg::Char => TokenizerMode::Char,
        }
    }
}

#[derive(Parser, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "trec")]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    emb_dim: usize,
    #[arg(long, default_value_t = 50)]
    feat_dim: usize,
    #[arg(long, default_value_t = 6)]
    max_kernel: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "word")]
    tokenizer: TokenizerArg,
    #[arg(long, value_enum, default_value = "off")]
    multi_sentence: OnOff,
    #[arg(long, default_value_t = 1)]
    min_freq: usize,
    /// Fraction of the training file held out for per-epoch accuracy.
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    /// Rewrite the model file after every epoch.
    #[arg(long)]
    checkpoint: bool,
}

#[derive(Parser, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "trec")]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "off")]
    multi_sentence: OnOff,
}

#[derive(Parser, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long, value_enum, default_value = "off")]
    multi_sentence: OnOff,
}

#[derive(Parser, Debug)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long, value_enum, default_value = "ansi")]
    render: RenderMode,
    /// Category to explain. Defaults to the predicted one.
    #[arg(long)]
    category: Option<String>,
    #[arg(long, value_enum, default_value = "off")]
    multi_sentence: OnOff,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplesRender {
    Text,
    Json,
}

#[derive(Parser, Debug)]
struct SamplesArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    text: String,
    /// Training file the model was built from.
    #[arg(long)]
    train_data: PathBuf,
    #[arg(long, value_enum, default_value = "trec")]
    format: FormatArg,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    category: Option<String>,
    /// Tokens above this fraction of the largest positive value form the pattern.
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    ratio: f64,
    #[arg(long, value_enum, default_value = "text")]
    render: SamplesRender,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<IcnnError> for Failure {
    fn from(e: IcnnError) -> Self {
        let code = match &e {
            IcnnError::InvalidConfig(_) | IcnnError::UnknownCategory { .. } => 1,
            IcnnError::NonFinite(_) | IcnnError::IndexOutOfRange { .. } | IcnnError::ShapeMismatch { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Conservation slack for single-precision reports, relative to the score scale.
const CONSERVATION_TOLERANCE: f64 = 1e-3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Explain(a) => cmd_explain(a),
        Command::ExplainSamples(a) => cmd_explain_samples(a),
    }
}

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: format!("{}: no such file", path.display()),
        })
    }
}

fn open_model(path: &Path) -> CliResult<ModelParams<f32>> {
    require_file(path)?;
    load_model(path).map_err(|e| match e {
        IcnnError::Io { .. } => e.into(),
        other => Failure {
            code: 2,
            message: format!("{}: {other}", path.display()),
        },
    })
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let line = serde_json::to_string(value).map_err(|e| Failure::internal(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}")?;
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult {
    require_file(&a.data)?;
    let out_dir = a
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    if !out_dir.is_dir() {
        return Err(Failure {
            code: 2,
            message: format!("{}: output directory does not exist", out_dir.display()),
        });
    }
    let dataset = load_dataset(&a.data, a.format.into())?;
    eprintln!(
        "loaded {} examples, {} labels from {}",
        dataset.len(),
        dataset.labels.len(),
        a.data.display()
    );
    let config = TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
        mode: a.multi_sentence.mode(),
        tokenizer: a.tokenizer.into(),
        min_freq: a.min_freq,
        holdout_fraction: a.holdout,
        checkpoint: a.checkpoint.then(|| a.out.clone()),
    };
    let model_config = ModelConfig {
        emb_dim: a.emb_dim,
        feat_dim: a.feat_dim,
        max_kernel: a.max_kernel,
        seed: a.seed,
        ..ModelConfig::new(dataset.labels.len().max(2))
    };
    let started = std::time::Instant::now();
    let mut write_err = None;
    let outcome = train_with(&dataset, &config, model_config, |record| {
        if let Err(e) = print_json(record) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    save_model(&outcome.model, &a.out)?;
    eprintln!(
        "trained in {:.1}s, vocabulary {}, model written to {}",
        started.elapsed().as_secs_f64(),
        outcome.model.vocab.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ClassCount<'a> {
    label: &'a str,
    correct: usize,
    total: usize,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    accuracy: f64,
    correct: usize,
    total: usize,
    per_class: Vec<ClassCount<'a>>,
    confusion: &'a [Vec<usize>],
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    require_file(&a.data)?;
    let model = open_model(&a.model)?;
    let dataset = load_dataset(&a.data, a.format.into())?;
    let ev = evaluate(&model, &dataset, a.multi_sentence.mode())?;
    let per_class = ev
        .labels
        .iter()
        .enumerate()
        .map(|(i, label)| ClassCount {
            label,
            correct: ev.confusion[i][i],
            total: ev.confusion[i].iter().sum(),
        })
        .collect();
    print_json(&EvalReport {
        accuracy: ev.accuracy,
        correct: ev.correct,
        total: ev.total,
        per_class,
        confusion: &ev.confusion,
    })
}

fn check_nonempty(model: &ModelParams<f32>, text: &str) -> CliResult {
    if tokenize(text, model.vocab.mode()).is_empty() {
        return Err(IcnnError::EmptyInput.into());
    }
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    predicted: &'a str,
    labels: &'a [String],
    probs: Vec<f64>,
}

fn cmd_predict(a: PredictArgs) -> CliResult {
    let model = open_model(&a.model)?;
    check_nonempty(&model, &a.text)?;
    let sentences = match a.multi_sentence {
        OnOff::On => encode_document(&a.text, &model.vocab),
        OnOff::Off => vec![model.encode(&a.text)],
    };
    let (pred, probs) = predict_document(&model, &sentences)?;
    print_json(&Prediction {
        predicted: &model.labels[pred],
        labels: &model.labels,
        probs: probs.iter().map(|&p| p as f64).collect(),
    })
}

fn attribution(model: &ModelParams<f32>, text: &str, multi: OnOff) -> CliResult<AttributionReport<f32>> {
    check_nonempty(model, text)?;
    let report = match multi {
        OnOff::On => explain_document(model, &encode_document(text, &model.vocab))?.to_report(),
        OnOff::Off => explain(model, &model.encode(text))?,
    };
    let scale = report.scores.iter().fold(1.0f64, |m, &s| m.max((s as f64).abs()));
    let err = report.conservation_error();
    if err > CONSERVATION_TOLERANCE * scale {
        return Err(Failure::internal(format!(
            "attribution does not add up to the scores (error {err:.3e})"
        )));
    }
    Ok(report)
}

fn resolve_category(model: &ModelParams<f32>, name: Option<&str>, predicted: usize) -> CliResult<usize> {
    match name {
        Some(name) => Ok(model.label_index(name)?),
        None => Ok(predicted),
    }
}

fn cmd_explain(a: ExplainArgs) -> CliResult {
    let model = open_model(&a.model)?;
    let report = attribution(&model, &a.text, a.multi_sentence)?;
    let category = resolve_category(&model, a.category.as_deref(), report.predicted)?;
    let color = std::env::var_os("ICNN_NO_COLOR").is_none();
    let rendered = match a.render {
        RenderMode::Json => {
            serde_json::to_string(&report.to_record()).map_err(|e| Failure::internal(e.to_string()))? + "\n"
        }
        RenderMode::Ansi if color => render::ansi(&report, category),
        RenderMode::Ansi => render::plain(&report, category),
        RenderMode::Html => render::html(&report, category),
    };
    std::io::stdout().lock().write_all(rendered.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct SamplesOutput<'a> {
    category: &'a str,
    pattern: &'a [String],
    pattern_values: &'a [f64],
    samples: &'a [icnn::patterns::RetrievedSample],
}

fn cmd_explain_samples(a: SamplesArgs) -> CliResult {
    if a.k == 0 {
        return Err(Failure::usage("--k must be at least 1"));
    }
    require_file(&a.train_data)?;
    let model = open_model(&a.model)?;
    let report = attribution(&model, &a.text, OnOff::Off)?;
    let category = resolve_category(&model, a.category.as_deref(), report.predicted)?;
    let pattern = match extract_pattern(&report, category, a.ratio).map(|p| p.known_only(&model.vocab)) {
        Ok(p) if !p.tokens.is_empty() => p,
        Ok(_) | Err(IcnnError::EmptyPattern(_)) => {
            println!(
                "no pattern: no token of this text supports category `{}`",
                model.labels[category]
            );
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let dataset = load_dataset(&a.train_data, a.format.into())?;
    let index = build_index(&dataset, model.vocab.mode())?;
    let result = retrieve(&pattern, &index, a.k, &model)?;
    match a.render {
        SamplesRender::Json => print_json(&SamplesOutput {
            category: &result.category,
            pattern: &result.pattern,
            pattern_values: &pattern.values,
            samples: &result.samples,
        }),
        SamplesRender::Text => {
            let mut out = String::new();
            out.push_str(&format!("category: {}\n", result.category));
            out.push_str(&format!("pattern:  {}\n", result.pattern.join(" ")));
            if result.samples.is_empty() {
                out.push_str("no training sample contains a pattern token\n");
            }
            for (rank, s) in result.samples.iter().enumerate() {
                out.push_str(&format!(
                    "{:>3}. [{}] ({:.0}) {}\n",
                    rank + 1,
                    s.label,
                    s.suitability,
                    s.text
                ));
            }
            std::io::stdout().lock().write_all(out.as_bytes())?;
            Ok(())
        }
    }
}
