//! Conversation data model, manifest ingestion, filtering and fold assignment.
//!
//! The manifest is UTF-8 JSON Lines, one conversation per line:
//!
//! ```json
//! {"conv_id": "c1", "csat": 4, "utterances": [
//!   {"utt_id": "c1-0", "audio": "wav/c1-0.wav", "transcript": "let's chat",
//!    "is_feedback": false, "sentiment": {"act": 0.3, "val": 1.0, "sat": 0.7}}]}
//! ```
//!
//! `audio` and `sentiment` are optional. Records without `csat` are skipped
//! with a warning; anything else malformed is an error naming the line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sentiment::SentimentScores;

pub const CSAT_MIN: f64 = 1.0;
pub const CSAT_MAX: f64 = 5.0;
pub const DEFAULT_MIN_LENGTH: usize = 5;
pub const DEFAULT_MAX_LENGTH: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub audio_path: Option<PathBuf>,
    pub transcript: String,
    pub annotated_sentiment: Option<SentimentScores>,
    /// Rating-prompt answer or free-form feedback turn.
    pub is_feedback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub utterances: Vec<Utterance>,
    pub csat: f64,
}

impl Conversation {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Annotated scores of every utterance, or `None` if any is missing.
    pub fn annotated_scores(&self) -> Option<Vec<SentimentScores>> {
        self.utterances
            .iter()
            .map(|u| u.annotated_sentiment)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub manifest: Option<PathBuf>,
    /// One line per ingestion or filtering event, in order.
    pub log: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub conversations: Vec<Conversation>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub conversations: usize,
    pub utterances: usize,
    pub mean_length: f64,
}

impl Corpus {
    pub fn new(conversations: Vec<Conversation>) -> Self {
        Corpus {
            conversations,
            provenance: Provenance::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn stats(&self) -> CorpusStats {
        let conversations = self.conversations.len();
        let utterances: usize = self.conversations.iter().map(Conversation::len).sum();
        let mean_length = if conversations == 0 {
            0.0
        } else {
            utterances as f64 / conversations as f64
        };
        CorpusStats {
            conversations,
            utterances,
            mean_length,
        }
    }

    /// Applies [`strip_feedback`] to every conversation.
    pub fn strip_feedback(mut self) -> Corpus {
        let before: usize = self.conversations.iter().map(Conversation::len).sum();
        self.conversations = self.conversations.into_iter().map(strip_feedback).collect();
        let after: usize = self.conversations.iter().map(Conversation::len).sum();
        self.provenance
            .log
            .push(format!("strip_feedback: removed {} feedback utterances", before - after));
        self
    }
}

// On-disk records.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceRecord {
    utt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio: Option<PathBuf>,
    #[serde(default)]
    transcript: String,
    #[serde(default)]
    is_feedback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentiment: Option<SentimentScores>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConversationRecord {
    conv_id: String,
    #[serde(default)]
    csat: Option<f64>,
    utterances: Vec<UtteranceRecord>,
}

fn parse_record(line: &str) -> std::result::Result<Option<Conversation>, String> {
    let rec: ConversationRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let Some(csat) = rec.csat else {
        return Ok(None);
    };
    if !(CSAT_MIN..=CSAT_MAX).contains(&csat) {
        return Err(format!("conversation `{}`: csat {csat} outside [1, 5]", rec.conv_id));
    }
    let mut utterances = Vec::with_capacity(rec.utterances.len());
    for u in rec.utterances {
        if let Some(s) = &u.sentiment {
            if !s.in_range() {
                return Err(format!("utterance `{}`: sentiment outside [-3, 3]", u.utt_id));
            }
        }
        if u.transcript.is_empty() && u.audio.is_none() {
            return Err(format!("utterance `{}`: empty transcript and no audio", u.utt_id));
        }
        utterances.push(Utterance {
            id: u.utt_id,
            audio_path: u.audio,
            transcript: u.transcript,
            annotated_sentiment: u.sentiment,
            is_feedback: u.is_feedback,
        });
    }
    Ok(Some(Conversation {
        id: rec.conv_id,
        utterances,
        csat,
    }))
}

/// Parses a manifest from any reader. `origin` is used in error messages.
pub fn read_manifest<R: BufRead>(reader: R, origin: &Path) -> Result<Corpus> {
    let mut conversations = Vec::new();
    let mut rejected = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(Some(conv)) => conversations.push(conv),
            Ok(None) => {
                warn!("{}:{line_no}: record has no csat; skipped", origin.display());
                rejected += 1;
            }
            Err(message) => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: line_no,
                    message,
                })
            }
        }
    }
    let mut corpus = Corpus::new(conversations);
    let stats = corpus.stats();
    corpus.provenance.manifest = Some(origin.to_path_buf());
    corpus.provenance.log.push(format!(
        "load_manifest: {} conversations, {} utterances, mean length {:.2}, {} rejected (no csat)",
        stats.conversations, stats.utterances, stats.mean_length, rejected
    ));
    Ok(corpus)
}

pub fn load_manifest(path: &Path) -> Result<Corpus> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(BufReader::new(f), path)
}

pub fn write_manifest<W: Write>(corpus: &Corpus, mut w: W) -> std::io::Result<()> {
    for conv in &corpus.conversations {
        let rec = ConversationRecord {
            conv_id: conv.id.clone(),
            csat: Some(conv.csat),
            utterances: conv
                .utterances
                .iter()
                .map(|u| UtteranceRecord {
                    utt_id: u.id.clone(),
                    audio: u.audio_path.clone(),
                    transcript: u.transcript.clone(),
                    is_feedback: u.is_feedback,
                    sentiment: u.annotated_sentiment,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_manifest(corpus: &Corpus, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_manifest(corpus, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

/// Drops feedback utterances, keeping the order of the rest.
pub fn strip_feedback(mut conv: Conversation) -> Conversation {
    conv.utterances.retain(|u| !u.is_feedback);
    conv
}

/// Keeps conversations with `min <= length <= max`. Length is counted on
/// whatever utterances remain, so strip feedback first.
pub fn filter_by_length(mut corpus: Corpus, min: usize, max: usize) -> Result<Corpus> {
    if min > max {
        return Err(Error::InvalidArgument(format!(
            "length filter min {min} exceeds max {max}"
        )));
    }
    let before = corpus.len();
    corpus
        .conversations
        .retain(|c| (min..=max).contains(&c.len()));
    corpus.provenance.log.push(format!(
        "filter_by_length[{min},{max}]: kept {} of {before}",
        corpus.len()
    ));
    Ok(corpus)
}

/// Conversation id to fold index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle of the lexicographically sorted ids, then round-robin.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let mut ids: Vec<&str> = corpus.conversations.iter().map(|c| c.id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != corpus.len() {
        return Err(Error::InvalidArgument("duplicate conversation ids".into()));
    }
    if ids.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} conversations cannot fill {k} folds",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let assignment = ids
        .into_iter()
        .enumerate()
        .map(|(pos, id)| (id.to_string(), pos % k))
        .collect();
    Ok(FoldAssignment {
        k,
        seed,
        assignment,
    })
}
