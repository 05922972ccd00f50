//! End-to-end orchestration: manifest → filtered corpus → utterance scores →
//! correlation analysis → cross-validated CSAT regression → report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, AudioConfig, LfbeExtractor, SUPPORTED_SAMPLE_RATES};
use crate::corpus::{
    filter_by_length, load_manifest, make_folds, Corpus, CorpusStats, Utterance, DEFAULT_MAX_LENGTH,
    DEFAULT_MIN_LENGTH,
};
use crate::crossval::{crossval_spearman, CrossValReport, Prediction, ScoredConversation, SubsetResult};
use crate::csat::CsatModelConfig;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lexical::{embed_tokens, tokenize, EmbeddingTable};
use crate::metrics::{spearman, SubsetRule};
use crate::nn::Matrix;
use crate::sentiment::{
    predict_sentiment, Dimension, SentimentConfig, SentimentModel, SentimentScores, SentimentTrainConfig,
    UtteranceFeatures,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub min_length: usize,
    pub max_length: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_length: DEFAULT_MIN_LENGTH,
            max_length: DEFAULT_MAX_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    /// Human annotations from the manifest.
    #[default]
    Annotated,
    /// A trained sentiment model run over audio and transcripts.
    Model,
    /// A per-utterance score file written by `embed`.
    File,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreConfig {
    pub source: ScoreSource,
    /// Sentiment checkpoint, for `source = "model"`.
    pub checkpoint: Option<PathBuf>,
    /// Word vectors, for `source = "model"`.
    pub embeddings: Option<PathBuf>,
    /// Score file, for `source = "file"`.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossvalConfig {
    pub folds: usize,
    pub seed: u64,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig { folds: 5, seed: 0 }
    }
}

/// Every tunable of a run. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub execution: Execution,
    pub corpus: CorpusConfig,
    pub scores: ScoreConfig,
    pub audio: AudioConfig,
    pub sentiment: SentimentConfig,
    pub sentiment_train: SentimentTrainConfig,
    pub csat: CsatModelConfig,
    pub crossval: CrossvalConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to toml")
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.min_length > self.corpus.max_length {
            return Err(Error::InvalidArgument("corpus.min_length exceeds corpus.max_length".into()));
        }
        if self.crossval.folds < 2 {
            return Err(Error::InvalidArgument("crossval.folds must be at least 2".into()));
        }
        self.audio.validate()?;
        self.csat.svr.validate()?;
        match self.scores.source {
            ScoreSource::Model if self.scores.checkpoint.is_none() || self.scores.embeddings.is_none() => Err(
                Error::InvalidArgument("scores.source = \"model\" needs scores.checkpoint and scores.embeddings".into()),
            ),
            ScoreSource::File if self.scores.file.is_none() => {
                Err(Error::InvalidArgument("scores.source = \"file\" needs scores.file".into()))
            }
            _ => Ok(()),
        }
    }
}

/// One line of a per-utterance score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub conv_id: String,
    pub utt_id: String,
    pub act: f64,
    pub val: f64,
    pub sat: f64,
}

impl ScoreRecord {
    pub fn scores(&self) -> SentimentScores {
        SentimentScores::new(self.act, self.val, self.sat)
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Builds sentiment-model inputs for utterances. Relative audio paths are
/// resolved against `audio_root`; utterances without audio get a single
/// all-zero acoustic frame.
#[derive(Debug)]
pub struct FeatureBuilder<'a> {
    extractors: Vec<(u32, LfbeExtractor)>,
    table: &'a EmbeddingTable,
    audio_root: PathBuf,
    acoustic_dim: usize,
}

impl<'a> FeatureBuilder<'a> {
    pub fn new(audio: &AudioConfig, table: &'a EmbeddingTable, audio_root: &Path) -> Result<Self> {
        let extractors = SUPPORTED_SAMPLE_RATES
            .iter()
            .map(|&sr| LfbeExtractor::new(audio, sr).map(|e| (sr, e)))
            .collect::<Result<_>>()?;
        Ok(FeatureBuilder {
            extractors,
            table,
            audio_root: audio_root.to_path_buf(),
            acoustic_dim: audio.feature_dim(),
        })
    }

    pub fn build(&self, utt: &Utterance) -> Result<UtteranceFeatures> {
        let acoustic = match &utt.audio_path {
            Some(rel) => {
                let path = self.audio_root.join(rel);
                let (samples, sr) = read_wav(&path)?;
                let ex = self
                    .extractors
                    .iter()
                    .find(|(rate, _)| *rate == sr)
                    .map(|(_, e)| e)
                    .ok_or_else(|| Error::format(&path, format!("unsupported sample rate {sr}")))?;
                ex.extract(&samples)?.frames
            }
            None => Matrix::zeros(1, self.acoustic_dim),
        };
        Ok(UtteranceFeatures {
            acoustic,
            lexical: embed_tokens(&tokenize(&utt.transcript), self.table),
        })
    }
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Loads a manifest, strips feedback turns and applies the length filter.
pub fn prepare_corpus(manifest: &Path, cfg: &CorpusConfig) -> Result<Corpus> {
    let corpus = load_manifest(manifest).map_err(|e| e.in_stage("load"))?;
    let corpus = filter_by_length(corpus.strip_feedback(), cfg.min_length, cfg.max_length)
        .map_err(|e| e.in_stage("filter"))?;
    if corpus.is_empty() {
        return Err(Error::Empty("no conversations after filtering".into()).in_stage("filter"));
    }
    Ok(corpus)
}

/// Runs the sentiment model over every utterance of `corpus`.
pub fn embed_corpus(
    corpus: &Corpus,
    model: &SentimentModel,
    builder: &FeatureBuilder<'_>,
    execution: Execution,
) -> Result<Vec<ScoreRecord>> {
    let jobs: Vec<(&str, &Utterance)> = corpus
        .conversations
        .iter()
        .flat_map(|c| c.utterances.iter().map(move |u| (c.id.as_str(), u)))
        .collect();
    execution.try_map(&jobs, |&(conv_id, utt)| {
        let s = predict_sentiment(model, &builder.build(utt)?)?;
        Ok(ScoreRecord {
            conv_id: conv_id.to_string(),
            utt_id: utt.id.clone(),
            act: s.activation,
            val: s.valence,
            sat: s.satisfaction,
        })
    })
}

/// Annotated utterances of `corpus` as sentiment training examples.
pub fn sentiment_examples(
    corpus: &Corpus,
    builder: &FeatureBuilder<'_>,
    execution: Execution,
) -> Result<Vec<(UtteranceFeatures, SentimentScores)>> {
    let annotated: Vec<&Utterance> = corpus
        .conversations
        .iter()
        .flat_map(|c| &c.utterances)
        .filter(|u| u.annotated_sentiment.is_some())
        .collect();
    execution.try_map(&annotated, |u| {
        Ok((builder.build(u)?, u.annotated_sentiment.expect("filtered")))
    })
}

fn scores_from_records(corpus: &Corpus, records: &[ScoreRecord]) -> Result<Vec<ScoredConversation>> {
    let map: BTreeMap<(&str, &str), SentimentScores> = records
        .iter()
        .map(|r| ((r.conv_id.as_str(), r.utt_id.as_str()), r.scores()))
        .collect();
    corpus
        .conversations
        .iter()
        .map(|c| {
            let scores = c
                .utterances
                .iter()
                .map(|u| {
                    map.get(&(c.id.as_str(), u.id.as_str()))
                        .copied()
                        .ok_or_else(|| Error::Data(format!("no score for utterance `{}` of `{}`", u.id, c.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ScoredConversation {
                id: c.id.clone(),
                scores,
                csat: c.csat,
            })
        })
        .collect()
}

/// Attaches per-utterance sentiment scores according to `cfg.scores`.
pub fn score_corpus(corpus: &Corpus, cfg: &RunConfig, audio_root: &Path) -> Result<Vec<ScoredConversation>> {
    match cfg.scores.source {
        ScoreSource::Annotated => corpus
            .conversations
            .iter()
            .map(|c| {
                let scores = c
                    .annotated_scores()
                    .ok_or_else(|| Error::Data(format!("conversation `{}` lacks annotations", c.id)))?;
                Ok(ScoredConversation {
                    id: c.id.clone(),
                    scores,
                    csat: c.csat,
                })
            })
            .collect(),
        ScoreSource::File => {
            let path = cfg.scores.file.as_ref().expect("validated");
            scores_from_records(corpus, &read_jsonl(path)?)
        }
        ScoreSource::Model => {
            let model = SentimentModel::from_checkpoint(&crate::nn::Checkpoint::load(
                cfg.scores.checkpoint.as_ref().expect("validated"),
            )?)?;
            let table = EmbeddingTable::load(cfg.scores.embeddings.as_ref().expect("validated"))?;
            let builder = FeatureBuilder::new(&cfg.audio, &table, audio_root)?;
            let records = embed_corpus(corpus, &model, &builder, cfg.execution)?;
            scores_from_records(corpus, &records)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub dimension: Dimension,
    pub n: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    /// Set when ρ is undefined.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    /// Each utterance's score against its conversation's CSAT.
    pub utterance: Vec<CorrelationCell>,
    /// Mean score per conversation against CSAT.
    pub conversation: Vec<CorrelationCell>,
}

impl CorrelationTable {
    pub fn cell(&self, conversation_level: bool, dim: Dimension) -> &CorrelationCell {
        let row = if conversation_level { &self.conversation } else { &self.utterance };
        &row[dim.index()]
    }
}

fn correlation_cell(dimension: Dimension, x: &[f64], y: &[f64]) -> CorrelationCell {
    match spearman(x, y) {
        Ok(c) => CorrelationCell {
            dimension,
            n: x.len(),
            rho: Some(c.rho),
            p_value: c.p_value,
            error: None,
        },
        Err(e) => CorrelationCell {
            dimension,
            n: x.len(),
            rho: None,
            p_value: None,
            error: Some(e.to_string()),
        },
    }
}

/// Spearman's ρ between sentiment and CSAT at utterance and conversation
/// level, per dimension.
pub fn correlation_report(data: &[ScoredConversation]) -> CorrelationTable {
    let row = |conversation_level: bool| {
        Dimension::ALL
            .iter()
            .map(|&dim| {
                let (x, y): (Vec<f64>, Vec<f64>) = if conversation_level {
                    data.iter()
                        .filter(|c| !c.scores.is_empty())
                        .map(|c| {
                            let m = c.scores.iter().map(|s| s.get(dim)).sum::<f64>() / c.scores.len() as f64;
                            (m, c.csat)
                        })
                        .unzip()
                } else {
                    data.iter()
                        .flat_map(|c| c.scores.iter().map(move |s| (s.get(dim), c.csat)))
                        .unzip()
                };
                correlation_cell(dim, &x, &y)
            })
            .collect()
    };
    CorrelationTable {
        utterance: row(false),
        conversation: row(true),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub manifest: String,
    pub config: RunConfig,
    pub corpus: CorpusStats,
    pub filter_log: Vec<String>,
    pub correlation: CorrelationTable,
    pub crossval: CrossValReport,
    pub subsets: Vec<SubsetResult>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn predictions(&self) -> &[Prediction] {
        &self.crossval.predictions
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "csat {} | manifest {}", self.version, self.manifest);
        let _ = writeln!(
            out,
            "corpus: {} conversations, {} utterances, mean length {:.2}",
            self.corpus.conversations, self.corpus.utterances, self.corpus.mean_length
        );
        out.push('\n');
        out.push_str(&render_correlation(&self.correlation));
        out.push('\n');
        let cfg = &self.config.csat;
        let _ = writeln!(
            out,
            "cross-validation: {:?} on {} features, {} folds (seed {})",
            cfg.model, cfg.features, self.config.crossval.folds, self.config.crossval.seed
        );
        out.push_str(&render_crossval(&self.crossval));
        out.push('\n');
        out.push_str(&render_subsets(&self.subsets));
        out
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(x) => format!("{x:.prec$}"),
        None => "n/a".into(),
    }
}

pub fn render_correlation(table: &CorrelationTable) -> String {
    let mut out = String::from("spearman rho vs csat\n");
    let _ = write!(out, "{:<14}", "level");
    for d in Dimension::ALL {
        let _ = write!(out, "{:>10}", d.short_name());
    }
    out.push('\n');
    for (name, row) in [("utterance", &table.utterance), ("conversation", &table.conversation)] {
        let _ = write!(out, "{name:<14}");
        for cell in row {
            let _ = write!(out, "{:>10}", fmt_opt(cell.rho, 4));
        }
        out.push('\n');
    }
    out
}

pub fn render_crossval(report: &CrossValReport) -> String {
    let mut out = format!("{:<6}{:>9}{:>8}{:>10}{:>12}\n", "fold", "n_train", "n_test", "rho", "p");
    for f in &report.folds {
        let _ = write!(
            out,
            "{:<6}{:>9}{:>8}{:>10}{:>12}",
            f.fold,
            f.n_train,
            f.n_test,
            fmt_opt(f.rho, 4),
            f.p_value.map_or("n/a".into(), |p| format!("{p:.3e}"))
        );
        if let Some(reason) = &f.skipped {
            let _ = write!(out, "  skipped: {reason}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{:<23}{:>10.4}", "mean", report.mean_rho);
    out
}

pub fn render_subsets(subsets: &[SubsetResult]) -> String {
    let mut out = format!("{:<8}{:>8}{:>10}\n", "subset", "n", "mean_rho");
    for s in subsets {
        let _ = writeln!(out, "{:<8}{:>8}{:>10}", s.subset.name(), s.n, fmt_opt(s.mean_rho, 4));
    }
    out
}

/// Runs strip → filter → score → correlate → cross-validate on `manifest`.
pub fn run_pipeline(config: &RunConfig, manifest: &Path, version: &str) -> Result<RunReport> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let corpus = prepare_corpus(manifest, &config.corpus)?;
    let data = score_corpus(&corpus, config, &manifest_dir(manifest)).map_err(|e| e.in_stage("sentiment"))?;
    let correlation = correlation_report(&data);
    let folds = make_folds(&corpus, config.crossval.folds, config.crossval.seed).map_err(|e| e.in_stage("folds"))?;
    let crossval = crossval_spearman(&config.csat, &data, &folds, config.execution).map_err(|e| e.in_stage("crossval"))?;
    let subsets = [SubsetRule::All, SubsetRule::R1, SubsetRule::R2]
        .into_iter()
        .map(|r| crossval.subset(r))
        .collect();
    Ok(RunReport {
        version: version.to_string(),
        manifest: manifest.display().to_string(),
        config: config.clone(),
        corpus: corpus.stats(),
        filter_log: corpus.provenance.log.clone(),
        correlation,
        crossval,
        subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::save_manifest;
    use crate::synthetic::{generate_corpus, GeneratorConfig};

    fn small_manifest(dir: &Path, n: usize) -> PathBuf {
        let path = dir.join("m.jsonl");
        save_manifest(&generate_corpus(&GeneratorConfig::mean_link(1, n)).unwrap(), &path).unwrap();
        path
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_keys() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
        let partial = RunConfig::from_toml_str("[csat]\nmodel = \"blstm\"\n[crossval]\nfolds = 3\n").unwrap();
        assert_eq!(partial.crossval.folds, 3);
        assert_eq!(partial.csat.hidden_dim, 20);
        assert!(RunConfig::from_toml_str("bogus = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[csat.svr]\nnu = 0.5\nrate = 2\n").is_err());
        assert!(RunConfig::from_toml_str("[scores]\nsource = \"file\"\n").is_err());
    }

    #[test]
    fn correlation_table_shapes_and_degeneracy() {
        let data: Vec<ScoredConversation> = (0..10)
            .map(|i| ScoredConversation {
                id: format!("c{i}"),
                scores: vec![SentimentScores::new(0.0, 0.0, 0.0); 3],
                csat: (1 + i % 5) as f64,
            })
            .collect();
        let t = correlation_report(&data);
        assert_eq!(t.utterance.len(), 3);
        assert!(t.utterance.iter().chain(&t.conversation).all(|c| c.rho.is_none() && c.error.is_some()));
        assert!(render_correlation(&t).contains("n/a"));
    }

    #[test]
    fn pipeline_runs_and_is_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path(), 120);
        let cfg = RunConfig::default();
        let a = run_pipeline(&cfg, &m, "test").unwrap();
        let b = run_pipeline(&RunConfig { execution: Execution::Sequential, ..cfg.clone() }, &m, "test").unwrap();
        assert_eq!(a.crossval, b.crossval);
        assert_eq!(a.to_json(), run_pipeline(&cfg, &m, "test").unwrap().to_json());
        assert_eq!(a.corpus.conversations, 120);
        assert_eq!(a.subsets.len(), 3);
        assert!(a.crossval.mean_rho > 0.0);
        let text = a.render_text();
        assert!(text.contains("mean") && text.contains("r2"));
    }

    #[test]
    fn empty_after_filtering_is_a_clean_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path(), 10);
        let cfg = RunConfig {
            corpus: CorpusConfig {
                min_length: 60,
                max_length: 70,
            },
            ..Default::default()
        };
        let err = run_pipeline(&cfg, &m, "test").unwrap_err();
        assert!(err.to_string().contains("no conversations after filtering"), "{err}");
        assert!(matches!(err.root(), Error::Empty(_)));
    }

    #[test]
    fn score_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_manifest(dir.path(), 12);
        let corpus = prepare_corpus(&m, &CorpusConfig::default()).unwrap();
        let annotated = score_corpus(&corpus, &RunConfig::default(), dir.path()).unwrap();
        let records: Vec<ScoreRecord> = corpus
            .conversations
            .iter()
            .flat_map(|c| {
                c.utterances.iter().map(move |u| {
                    let s = u.annotated_sentiment.unwrap();
                    ScoreRecord {
                        conv_id: c.id.clone(),
                        utt_id: u.id.clone(),
                        act: s.activation,
                        val: s.valence,
                        sat: s.satisfaction,
                    }
                })
            })
            .collect();
        let path = dir.path().join("scores.jsonl");
        write_jsonl(&path, &records).unwrap();
        let cfg = RunConfig {
            scores: ScoreConfig {
                source: ScoreSource::File,
                file: Some(path.clone()),
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(score_corpus(&corpus, &cfg, dir.path()).unwrap(), annotated);
        write_jsonl(&path, &records[1..]).unwrap();
        assert!(score_corpus(&corpus, &cfg, dir.path()).is_err());
    }

    #[test]
    fn model_scores_use_audio_and_text() {
        let dir = tempfile::tempdir().unwrap();
        let gen = GeneratorConfig {
            audio: true,
            min_length: 5,
            max_length: 5,
            ..GeneratorConfig::mean_link(4, 2)
        };
        let synth = crate::synthetic::generate_synthetic(&gen, Execution::Parallel).unwrap();
        crate::synthetic::render_audio(&synth, gen.seed, dir.path(), Execution::Parallel).unwrap();
        let table = crate::synthetic::vocabulary_embeddings(8, 0).unwrap();
        let builder = FeatureBuilder::new(&AudioConfig::default(), &table, dir.path()).unwrap();
        let sc = SentimentConfig {
            acoustic_layers: 1,
            acoustic_hidden: 3,
            lexical_hidden: 3,
            acoustic_dim: 120,
            lexical_dim: 8,
        };
        let model = SentimentModel::init(&sc, 0).unwrap();
        let corpus = synth.corpus.strip_feedback();
        let a = embed_corpus(&corpus, &model, &builder, Execution::Parallel).unwrap();
        let b = embed_corpus(&corpus, &model, &builder, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|r| r.scores().in_range()));
        let ex = sentiment_examples(&corpus, &builder, Execution::Parallel).unwrap();
        assert_eq!(ex.len(), 10);
        assert_eq!(ex[0].0.acoustic.cols(), 120);
    }
}
