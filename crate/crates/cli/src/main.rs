use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csat_core::audio::{read_wav, FeatureFile, LfbeExtractor};
use csat_core::corpus::{load_manifest, save_manifest};
use csat_core::crossval::{Prediction, ScoredConversation};
use csat_core::csat::{CsatModel, FeatureSpec, KernelKind, ModelKind};
use csat_core::lexical::EmbeddingTable;
use csat_core::metrics::{filter_subset, spearman, SubsetRule};
use csat_core::nn::Checkpoint;
use csat_core::pipeline::{
    embed_corpus, prepare_corpus, read_jsonl, render_crossval, render_subsets, run_pipeline, score_corpus,
    sentiment_examples, write_jsonl, FeatureBuilder, RunConfig, ScoreSource,
};
use csat_core::sentiment::{train_sentiment, SentimentModel};
use csat_core::synthetic::{generate_synthetic, render_audio, vocabulary_embeddings, CsatLink, GeneratorConfig};
use csat_core::{Error, Execution, Result};

const VERSION: &str = env!("CSAT_VERSION");

#[derive(Parser)]
#[command(name = "csat", version = VERSION, about = "Conversation-level CSAT estimation from utterance sentiment")]
struct Cli {
    /// Log progress (-v) or everything (-vv) to stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus manifest with a planted CSAT signal.
    GenerateSynthetic(GenerateArgs),
    /// Compute stacked log mel-filterbank features for WAV files.
    ExtractFeatures(ExtractArgs),
    /// Train the utterance sentiment model on annotated utterances.
    TrainSentiment(TrainSentimentArgs),
    /// Score every utterance with a trained sentiment model.
    Embed(EmbedArgs),
    /// Train a CSAT regressor on a whole corpus.
    TrainCsat(TrainCsatArgs),
    /// Spearman correlation of a prediction file, optionally on a subset.
    Evaluate(EvaluateArgs),
    /// Cross-validate a CSAT regressor and print the fold table.
    Crossval(RunArgs),
    /// Full report: correlation tables, cross-validation and subsets.
    Report(RunArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value = "mean")]
    link: CsatLink,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    min_length: Option<usize>,
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long)]
    drift: Option<f64>,
    #[arg(long)]
    emission_noise: Option<f64>,
    #[arg(long)]
    csat_noise: Option<f64>,
    #[arg(long)]
    slope: Option<f64>,
    /// Also render tone-burst WAVs under `audio/` next to the manifest.
    #[arg(long)]
    audio: bool,
    /// Write word vectors covering the generator's vocabulary.
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    vocab_dim: usize,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, required = true, num_args = 1..)]
    wav: Vec<PathBuf>,
    /// Output file for one WAV, or a directory for several.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainSentimentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ModelArgs {
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    features: Option<FeatureSpec>,
    #[arg(long)]
    kernel: Option<KernelKind>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    coef0: Option<f64>,
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Per-utterance score file from `embed`, instead of annotations.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Disable data parallelism.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct TrainCsatArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// In-sample predictions as JSON lines.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value = "all")]
    subset: SubsetRule,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    fold_seed: Option<u64>,
    /// Machine-readable report (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plain-text tables.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Held-out predictions as JSON lines.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let c = &mut cfg.csat;
        if let Some(v) = self.model {
            c.model = v;
        }
        if let Some(v) = self.features {
            c.features = v;
        }
        if let Some(v) = self.kernel {
            c.kernel.kind = v;
        }
        if let Some(v) = self.nu {
            c.svr.nu = v;
        }
        if let Some(v) = self.c {
            c.svr.c = v;
        }
        if let Some(v) = self.gamma {
            c.kernel.gamma = Some(v);
        }
        if let Some(v) = self.coef0 {
            c.kernel.coef0 = v;
        }
        if let Some(v) = self.degree {
            c.kernel.degree = v;
        }
        if let Some(v) = self.hidden {
            c.hidden_dim = v;
        }
        if let Some(v) = self.epochs {
            c.train.epochs = v;
        }
        if let Some(v) = self.lr {
            c.train.learning_rate = v;
        }
        if let Some(p) = &self.scores {
            cfg.scores.source = ScoreSource::File;
            cfg.scores.file = Some(p.clone());
        }
        if self.sequential {
            cfg.execution = Execution::Sequential;
        }
        cfg.csat.train.execution = cfg.execution;
        cfg.sentiment_train.execution = cfg.execution;
        cfg.validate()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn generate(args: GenerateArgs) -> Result<()> {
    let base = match args.link {
        CsatLink::Mean => GeneratorConfig::mean_link(args.seed, args.n),
        CsatLink::Tail => GeneratorConfig::tail_link(args.seed, args.n),
    };
    let cfg = GeneratorConfig {
        min_length: args.min_length.unwrap_or(base.min_length),
        max_length: args.max_length.unwrap_or(base.max_length),
        drift: args.drift.unwrap_or(base.drift),
        emission_noise: args.emission_noise.unwrap_or(base.emission_noise),
        csat_noise: args.csat_noise.unwrap_or(base.csat_noise),
        slope: args.slope.unwrap_or(base.slope),
        audio: args.audio,
        ..base
    };
    let synth = generate_synthetic(&cfg, Execution::Parallel)?;
    save_manifest(&synth.corpus, &args.out)?;
    let stats = synth.corpus.stats();
    println!(
        "wrote {} conversations ({} utterances) to {}",
        stats.conversations,
        stats.utterances,
        args.out.display()
    );
    if cfg.audio {
        let root = args.out.parent().unwrap_or(Path::new("."));
        let n = render_audio(&synth, cfg.seed, root, Execution::Parallel)?;
        println!("rendered {n} audio files under {}", root.join("audio").display());
    }
    if let Some(path) = &args.vocab_out {
        vocabulary_embeddings(args.vocab_dim, cfg.seed)?.save(path)?;
        println!("wrote {}-dim vocabulary vectors to {}", args.vocab_dim, path.display());
    }
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let to_dir = args.wav.len() > 1 || args.out.is_dir();
    if to_dir {
        std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
            path: args.out.clone(),
            source: e,
        })?;
    }
    for wav in &args.wav {
        let (samples, sr) = read_wav(wav)?;
        let frames = LfbeExtractor::new(&cfg.audio, sr)?.extract(&samples)?.frames;
        let out = if to_dir {
            let stem = wav.file_stem().unwrap_or_default().to_string_lossy();
            args.out.join(format!("{stem}.feat"))
        } else {
            args.out.clone()
        };
        println!("{}: {} x {} -> {}", wav.display(), frames.rows(), frames.cols(), out.display());
        FeatureFile {
            frames,
            hop_ms: cfg.audio.hop_ms,
            sample_rate: sr,
        }
        .save(&out)?;
    }
    Ok(())
}

fn manifest_root(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn train_sentiment_cmd(args: TrainSentimentArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(v) = args.epochs {
        cfg.sentiment_train.epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.sentiment_train.learning_rate = v;
    }
    if let Some(v) = args.seed {
        cfg.sentiment_train.seed = v;
    }
    let corpus = load_manifest(&args.manifest)?.strip_feedback();
    let table = EmbeddingTable::load(&args.embeddings)?;
    let mut sentiment = cfg.sentiment.clone();
    sentiment.lexical_dim = table.dim();
    sentiment.acoustic_dim = cfg.audio.feature_dim();
    let builder = FeatureBuilder::new(&cfg.audio, &table, &manifest_root(&args.manifest))?;
    let examples = sentiment_examples(&corpus, &builder, cfg.execution)?;
    let mut model = SentimentModel::init(&sentiment, cfg.sentiment_train.seed)?;
    let report = train_sentiment(&mut model, &examples, &cfg.sentiment_train)?;
    println!("{:<7}{:>12}{:>9}{:>9}{:>9}", "epoch", "loss", "ccc_act", "ccc_val", "ccc_sat");
    for (i, (loss, ccc)) in report.loss_curve.iter().zip(&report.ccc_curve).enumerate() {
        println!("{:<7}{:>12.6}{:>9.4}{:>9.4}{:>9.4}", i + 1, loss, ccc[0], ccc[1], ccc[2]);
    }
    model.to_checkpoint().save(&args.out)?;
    println!("saved sentiment model to {}", args.out.display());
    Ok(())
}

fn embed(args: EmbedArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let corpus = load_manifest(&args.manifest)?.strip_feedback();
    let model = SentimentModel::from_checkpoint(&Checkpoint::load(&args.checkpoint)?)?;
    let table = EmbeddingTable::load(&args.embeddings)?;
    let builder = FeatureBuilder::new(&cfg.audio, &table, &manifest_root(&args.manifest))?;
    let records = embed_corpus(&corpus, &model, &builder, cfg.execution)?;
    write_jsonl(&args.out, &records)?;
    println!("wrote {} utterance scores to {}", records.len(), args.out.display());
    Ok(())
}

fn train_csat(args: TrainCsatArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    args.model.apply(&mut cfg)?;
    let corpus = prepare_corpus(&args.manifest, &cfg.corpus)?;
    let data: Vec<ScoredConversation> = score_corpus(&corpus, &cfg, &manifest_root(&args.manifest))?;
    let view: Vec<_> = data.iter().map(|c| (&c.scores[..], c.csat)).collect();
    let model = cfg.csat.train(&view)?;
    model.save(&args.out)?;
    println!(
        "trained {:?} on {} conversations ({} features), saved to {}",
        cfg.csat.model,
        data.len(),
        cfg.csat.features,
        args.out.display()
    );
    if let Some(path) = &args.predictions {
        let preds = predictions(&model, &data)?;
        write_jsonl(path, &preds)?;
    }
    Ok(())
}

fn predictions(model: &CsatModel, data: &[ScoredConversation]) -> Result<Vec<Prediction>> {
    data.iter()
        .map(|c| {
            Ok(Prediction {
                conv_id: c.id.clone(),
                csat_true: c.csat,
                csat_pred: model.predict(&c.scores)?,
            })
        })
        .collect()
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let preds: Vec<Prediction> = read_jsonl(&args.pred)?;
    let pairs: Vec<(f64, f64)> = preds.iter().map(|p| (p.csat_true, p.csat_pred)).collect();
    let kept = filter_subset(&pairs, args.subset);
    let (t, p): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    let c = spearman(&t, &p)?;
    println!("subset {}: rho {:.4}, p {}, n {}", args.subset.name(), c.rho, c.p_value.map_or("n/a".into(), |p| format!("{p:.3e}")), t.len());
    Ok(())
}

fn run(args: RunArgs, full: bool) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(k) = args.folds {
        cfg.crossval.folds = k;
    }
    if let Some(s) = args.fold_seed {
        cfg.crossval.seed = s;
    }
    args.model.apply(&mut cfg)?;
    let report = run_pipeline(&cfg, &args.manifest, VERSION)?;
    let text = if full {
        report.render_text()
    } else {
        format!("{}\n{}", render_crossval(&report.crossval), render_subsets(&report.subsets))
    };
    print!("{text}");
    if let Some(path) = &args.out {
        write_text(path, &report.to_json())?;
    }
    if let Some(path) = &args.text {
        write_text(path, &report.render_text())?;
    }
    if let Some(path) = &args.predictions {
        write_jsonl(path, report.predictions())?;
    }
    Ok(())
}

/// 2 for configuration problems, 3 for data problems, 4 for solver failure.
fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::InvalidArgument(_) => 2,
        Error::NonConvergence { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::GenerateSynthetic(a) => generate(a),
        Command::ExtractFeatures(a) => extract(a),
        Command::TrainSentiment(a) => train_sentiment_cmd(a),
        Command::Embed(a) => embed(a),
        Command::TrainCsat(a) => train_csat(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Crossval(a) => run(a, false),
        Command::Report(a) => run(a, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
