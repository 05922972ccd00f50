//! Synthetic corpora with a known latent satisfaction process.
//!
//! Each conversation carries three independent latent walks (activation,
//! valence, satisfaction) that start uniformly in `[-start_spread,
//! start_spread]`, move by Gaussian steps of scale `drift`, and reflect at
//! ±3. Annotations are the latent values plus Gaussian emission noise,
//! clipped to the score range. The CSAT rating is
//!
//! * mean link: `3 + slope * mean(latent valence) + noise`
//! * tail link: `3 + slope * mean(latent valence over the final third) + noise`
//!
//! rounded (optionally) and clipped to 1..5. Two feedback utterances close
//! every conversation. Transcripts are drawn from a small vocabulary whose
//! polarity follows valence; optional tone-burst audio grows louder with
//! activation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::write_wav;
use crate::corpus::{Conversation, Corpus, Utterance, CSAT_MAX, CSAT_MIN};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lexical::EmbeddingTable;
use crate::metrics::spearman;
use crate::sentiment::{SentimentScores, SCORE_MAX, SCORE_MIN};

pub const AUDIO_SAMPLE_RATE: u32 = 8000;
const AUDIO_SECONDS: f64 = 0.3;

pub const POSITIVE_WORDS: [&str; 8] = ["great", "love", "awesome", "fun", "thanks", "cool", "nice", "interesting"];
pub const NEGATIVE_WORDS: [&str; 8] = ["boring", "hate", "stupid", "wrong", "stop", "annoying", "bad", "terrible"];
pub const NEUTRAL_WORDS: [&str; 12] = [
    "the", "what", "about", "tell", "me", "movies", "music", "news", "okay", "you", "i", "so",
];
const RATING_WORDS: [&str; 5] = ["one", "two", "three", "four", "five"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsatLink {
    #[default]
    Mean,
    Tail,
}

impl std::str::FromStr for CsatLink {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(CsatLink::Mean),
            "tail" => Ok(CsatLink::Tail),
            other => Err(Error::InvalidArgument(format!("unknown link `{other}` (expected mean or tail)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_conversations: usize,
    /// Content utterances per conversation, before the two feedback turns.
    pub min_length: usize,
    pub max_length: usize,
    pub start_spread: f64,
    pub drift: f64,
    pub emission_noise: f64,
    pub link: CsatLink,
    pub slope: f64,
    pub csat_noise: f64,
    pub integer_csat: bool,
    /// Give every utterance an `audio/<utt_id>.wav` path.
    pub audio: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::mean_link(0, 2000)
    }
}

impl GeneratorConfig {
    /// Static regime: the rating follows the whole-conversation mean.
    pub fn mean_link(seed: u64, n_conversations: usize) -> Self {
        GeneratorConfig {
            seed,
            n_conversations,
            min_length: 5,
            max_length: 50,
            start_spread: 1.5,
            drift: 0.3,
            emission_noise: 2.0,
            link: CsatLink::Mean,
            slope: 1.0,
            csat_noise: 1.5,
            integer_csat: true,
            audio: false,
        }
    }

    /// Temporal regime: the rating follows the last third of the
    /// conversation, which wanders away from the start.
    pub fn tail_link(seed: u64, n_conversations: usize) -> Self {
        GeneratorConfig {
            start_spread: 0.5,
            drift: 0.6,
            emission_noise: 0.3,
            link: CsatLink::Tail,
            slope: 0.8,
            csat_noise: 0.3,
            ..GeneratorConfig::mean_link(seed, n_conversations)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_conversations == 0 {
            return bad("need at least one conversation".into());
        }
        if self.min_length == 0 || self.min_length > self.max_length {
            return bad(format!("invalid length range [{}, {}]", self.min_length, self.max_length));
        }
        for (name, v) in [
            ("start_spread", self.start_spread),
            ("drift", self.drift),
            ("emission_noise", self.emission_noise),
            ("csat_noise", self.csat_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.start_spread > SCORE_MAX {
            return bad("start_spread exceeds the score range".into());
        }
        if !self.slope.is_finite() {
            return bad("slope must be finite".into());
        }
        Ok(())
    }
}

/// A generated corpus with the latent values behind its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Latent scores per utterance (feedback turns included), aligned with
    /// `corpus.conversations`.
    pub latent: Vec<Vec<SentimentScores>>,
}

fn conversation_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn reflect(mut x: f64) -> f64 {
    while !(SCORE_MIN..=SCORE_MAX).contains(&x) {
        x = if x > SCORE_MAX { 2.0 * SCORE_MAX - x } else { 2.0 * SCORE_MIN - x };
    }
    x
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn transcript<R: Rng>(rng: &mut R, valence: f64) -> String {
    let p_pos = 1.0 / (1.0 + (-1.5 * valence).exp());
    let n = rng.random_range(3..=8);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                NEUTRAL_WORDS[rng.random_range(0..NEUTRAL_WORDS.len())]
            } else if rng.random_bool(p_pos) {
                POSITIVE_WORDS[rng.random_range(0..POSITIVE_WORDS.len())]
            } else {
                NEGATIVE_WORDS[rng.random_range(0..NEGATIVE_WORDS.len())]
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Rating value implied by a conversation's latent valence track.
fn link_value(link: CsatLink, valence: &[f64]) -> f64 {
    let tail = match link {
        CsatLink::Mean => valence,
        CsatLink::Tail => &valence[(2 * valence.len()) / 3..],
    };
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn generate_one(cfg: &GeneratorConfig, index: usize) -> (Conversation, Vec<SentimentScores>) {
    let mut rng = conversation_rng(cfg.seed, index);
    let len = rng.random_range(cfg.min_length..=cfg.max_length);
    let mut state = [0.0; 3];
    for s in state.iter_mut() {
        *s = if cfg.start_spread > 0.0 {
            rng.random_range(-cfg.start_spread..=cfg.start_spread)
        } else {
            0.0
        };
    }
    let mut latent = Vec::with_capacity(len + 2);
    for step in 0..len + 2 {
        if step > 0 {
            for s in state.iter_mut() {
                *s = reflect(*s + cfg.drift * gaussian(&mut rng));
            }
        }
        latent.push(SentimentScores::from_array(state));
    }
    let valence: Vec<f64> = latent[..len].iter().map(|s| s.valence).collect();
    let raw = 3.0 + cfg.slope * link_value(cfg.link, &valence) + cfg.csat_noise * gaussian(&mut rng);
    let csat = if cfg.integer_csat { raw.round() } else { raw }.clamp(CSAT_MIN, CSAT_MAX);

    let id = format!("syn-{index:06}");
    let utterances = latent
        .iter()
        .enumerate()
        .map(|(k, lat)| {
            let noisy = lat.to_array().map(|v| (v + cfg.emission_noise * gaussian(&mut rng)).clamp(SCORE_MIN, SCORE_MAX));
            let is_feedback = k >= len;
            let text = match k.checked_sub(len) {
                None => transcript(&mut rng, lat.valence),
                Some(0) => format!("i give it a {}", RATING_WORDS[csat.round() as usize - 1]),
                Some(_) => transcript(&mut rng, lat.valence) + " bye",
            };
            let utt_id = format!("{id}-{k:02}");
            Utterance {
                audio_path: cfg.audio.then(|| PathBuf::from(format!("audio/{utt_id}.wav"))),
                id: utt_id,
                transcript: text,
                annotated_sentiment: Some(SentimentScores::from_array(noisy)),
                is_feedback,
            }
        })
        .collect();
    (Conversation { id, utterances, csat }, latent)
}

pub fn generate_synthetic(cfg: &GeneratorConfig, execution: Execution) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let pairs = execution.map_range(cfg.n_conversations, |i| generate_one(cfg, i));
    let (conversations, latent): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let mut corpus = Corpus::new(conversations);
    corpus.provenance.log.push(format!(
        "generated {} synthetic conversations ({:?} link, seed {})",
        cfg.n_conversations, cfg.link, cfg.seed
    ));
    Ok(SyntheticCorpus { corpus, latent })
}

pub fn generate_corpus(cfg: &GeneratorConfig) -> Result<Corpus> {
    Ok(generate_synthetic(cfg, Execution::Parallel)?.corpus)
}

/// Two-harmonic tone burst whose amplitude grows with `activation`.
pub fn tone_burst<R: Rng>(rng: &mut R, activation: f64) -> Vec<f64> {
    let n = (AUDIO_SECONDS * AUDIO_SAMPLE_RATE as f64) as usize;
    let amp = 0.05 * (0.6 * activation).exp();
    let f0 = rng.random_range(150.0..300.0);
    let sr = AUDIO_SAMPLE_RATE as f64;
    let noise = Normal::new(0.0, 0.002).expect("valid noise scale");
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = (PI * i as f64 / n as f64).sin();
            let v = amp * env * ((2.0 * PI * f0 * t).sin() + 0.5 * (4.0 * PI * f0 * t).sin()) + noise.sample(rng);
            v.clamp(-1.0, 1.0)
        })
        .collect()
}

/// Writes one WAV per utterance that has an audio path, resolved against
/// `root`. Audio depends only on the seed and the latent activation.
pub fn render_audio(synth: &SyntheticCorpus, seed: u64, root: &Path, execution: Execution) -> Result<usize> {
    let jobs: Vec<(usize, usize)> = synth
        .corpus
        .conversations
        .iter()
        .enumerate()
        .flat_map(|(c, conv)| (0..conv.utterances.len()).map(move |u| (c, u)))
        .filter(|&(c, u)| synth.corpus.conversations[c].utterances[u].audio_path.is_some())
        .collect();
    let dirs: std::collections::BTreeSet<PathBuf> = jobs
        .iter()
        .filter_map(|&(c, u)| {
            let p = root.join(synth.corpus.conversations[c].utterances[u].audio_path.as_ref()?);
            p.parent().map(Path::to_path_buf)
        })
        .collect();
    for d in dirs {
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    execution.try_map(&jobs, |&(c, u)| {
        let utt = &synth.corpus.conversations[c].utterances[u];
        let mut rng = conversation_rng(seed ^ 0x5eed_a0d1_0000_0000, c * 64 + u);
        let samples = tone_burst(&mut rng, synth.latent[c][u].activation);
        write_wav(&root.join(utt.audio_path.as_ref().expect("filtered")), &samples, AUDIO_SAMPLE_RATE)
    })?;
    Ok(jobs.len())
}

/// Deterministic random vectors for the generator's vocabulary.
pub fn vocabulary_embeddings(dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let words = POSITIVE_WORDS
        .iter()
        .chain(&NEGATIVE_WORDS)
        .chain(&NEUTRAL_WORDS)
        .chain(&RATING_WORDS)
        .chain(&["give", "it", "a", "bye"]);
    for w in words {
        let v = (0..dim).map(|_| scale * gaussian(&mut rng)).collect();
        table.insert(*w, v)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    /// Mean Spearman ρ over replicate corpora.
    pub rho: f64,
    /// Standard deviation of ρ across replicates: the spread expected of a
    /// single corpus of `corpus_size` conversations.
    pub standard_error: f64,
    /// Uncertainty of `rho` itself (`standard_error / sqrt(replicates)`).
    pub mc_error: f64,
    pub replicates: usize,
    pub corpus_size: usize,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mean annotated valence of the content utterances.
pub fn mean_annotated_valence(conv: &Conversation) -> Option<f64> {
    let vals: Vec<f64> = conv
        .utterances
        .iter()
        .filter(|u| !u.is_feedback)
        .map(|u| u.annotated_sentiment.map(|s| s.valence))
        .collect::<Option<_>>()?;
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Monte Carlo estimate of Spearman's ρ between mean annotated valence and
/// CSAT for corpora of `corpus_size` conversations drawn from `cfg`
/// (its own `n_conversations` is ignored).
pub fn analytic_correlation(
    cfg: &GeneratorConfig,
    corpus_size: usize,
    replicates: usize,
    execution: Execution,
) -> Result<OracleEstimate> {
    if cfg.link != CsatLink::Mean {
        return Err(Error::InvalidArgument("the correlation oracle needs the mean link".into()));
    }
    if corpus_size < 3 || replicates < 2 {
        return Err(Error::InvalidArgument("need corpus_size >= 3 and replicates >= 2".into()));
    }
    cfg.validate()?;
    let rhos = execution.map_range(replicates, |r| -> Option<f64> {
        let rep = GeneratorConfig {
            seed: splitmix(cfg.seed ^ splitmix(r as u64 + 1)),
            n_conversations: corpus_size,
            audio: false,
            ..cfg.clone()
        };
        let (x, y): (Vec<f64>, Vec<f64>) = (0..corpus_size)
            .map(|i| {
                let (conv, _) = generate_one(&rep, i);
                (mean_annotated_valence(&conv).expect("generated scores"), conv.csat)
            })
            .unzip();
        spearman(&x, &y).ok().map(|c| c.rho)
    });
    let valid: Vec<f64> = rhos.into_iter().flatten().collect();
    if valid.len() < 2 {
        return Err(Error::Degenerate("correlation undefined in almost every replicate".into()));
    }
    let n = valid.len() as f64;
    let mean = valid.iter().sum::<f64>() / n;
    let sd = (valid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(OracleEstimate {
        rho: mean,
        standard_error: sd,
        mc_error: sd / n.sqrt(),
        replicates: valid.len(),
        corpus_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_by_length, write_manifest};

    #[test]
    fn corpora_respect_ranges() {
        for cfg in [GeneratorConfig::mean_link(3, 200), GeneratorConfig::tail_link(4, 200)] {
            let s = generate_synthetic(&cfg, Execution::Parallel).unwrap();
            assert_eq!(s.corpus.len(), 200);
            for (conv, lat) in s.corpus.conversations.iter().zip(&s.latent) {
                let content = conv.utterances.iter().filter(|u| !u.is_feedback).count();
                assert!((5..=50).contains(&content));
                assert_eq!(conv.len(), content + 2);
                assert!(conv.utterances[content..].iter().all(|u| u.is_feedback));
                assert!((1.0..=5.0).contains(&conv.csat) && conv.csat.fract() == 0.0);
                for (u, l) in conv.utterances.iter().zip(lat) {
                    assert!(u.annotated_sentiment.unwrap().in_range());
                    assert!(l.in_range());
                    assert!(!u.transcript.is_empty());
                }
            }
            let kept = filter_by_length(s.corpus.clone().strip_feedback(), 5, 50).unwrap();
            assert_eq!(kept.len(), 200);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = GeneratorConfig::mean_link(11, 50);
        let bytes = |exec| {
            let mut buf = Vec::new();
            write_manifest(&generate_synthetic(&cfg, exec).unwrap().corpus, &mut buf).unwrap();
            buf
        };
        let a = bytes(Execution::Parallel);
        assert_eq!(a, bytes(Execution::Sequential));
        let other = GeneratorConfig { seed: 12, ..cfg.clone() };
        let mut buf = Vec::new();
        write_manifest(&generate_corpus(&other).unwrap(), &mut buf).unwrap();
        assert_ne!(a, buf);
    }

    #[test]
    fn noiseless_mean_link_is_perfectly_monotone() {
        let cfg = GeneratorConfig {
            emission_noise: 0.0,
            csat_noise: 0.0,
            integer_csat: false,
            slope: 0.5,
            ..GeneratorConfig::mean_link(5, 100)
        };
        let est = analytic_correlation(&cfg, 100, 8, Execution::Parallel).unwrap();
        assert!((est.rho - 1.0).abs() < 1e-12, "{est:?}");
    }

    #[test]
    fn overwhelming_noise_kills_correlation() {
        let cfg = GeneratorConfig {
            emission_noise: 1e6,
            ..GeneratorConfig::mean_link(6, 100)
        };
        let est = analytic_correlation(&cfg, 200, 200, Execution::Parallel).unwrap();
        assert!(est.rho.abs() < 3.0 * est.mc_error + 1e-3, "{est:?}");
    }

    #[test]
    fn oracle_rejects_tail_link_and_bad_configs() {
        assert!(analytic_correlation(&GeneratorConfig::tail_link(0, 10), 10, 4, Execution::Sequential).is_err());
        let bad = GeneratorConfig {
            min_length: 9,
            max_length: 4,
            ..Default::default()
        };
        assert!(generate_corpus(&bad).is_err());
        assert!(generate_corpus(&GeneratorConfig { drift: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn reflection_stays_in_range() {
        assert_eq!(reflect(3.5), 2.5);
        assert_eq!(reflect(-4.0), -2.0);
        assert_eq!(reflect(9.5), -2.5);
        assert_eq!(reflect(1.0), 1.0);
    }

    #[test]
    fn louder_bursts_for_higher_activation() {
        let energy = |act: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            tone_burst(&mut rng, act).iter().map(|v| v * v).sum::<f64>()
        };
        assert!(energy(2.0) > 2.0 * energy(0.0));
        assert!(energy(0.0) > 2.0 * energy(-2.0));
    }

    #[test]
    fn audio_files_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GeneratorConfig {
            audio: true,
            min_length: 5,
            max_length: 6,
            ..GeneratorConfig::mean_link(2, 3)
        };
        let s = generate_synthetic(&cfg, Execution::Parallel).unwrap();
        let n = render_audio(&s, cfg.seed, dir.path(), Execution::Parallel).unwrap();
        assert_eq!(n, s.corpus.stats().utterances);
        let first = &s.corpus.conversations[0].utterances[0];
        let (samples, sr) = crate::audio::read_wav(&dir.path().join(first.audio_path.as_ref().unwrap())).unwrap();
        assert_eq!(sr, AUDIO_SAMPLE_RATE);
        assert_eq!(samples.len(), 2400);
    }

    #[test]
    fn vocabulary_is_covered() {
        let table = vocabulary_embeddings(16, 0).unwrap();
        let corpus = generate_corpus(&GeneratorConfig::mean_link(1, 20)).unwrap();
        for conv in &corpus.conversations {
            for u in &conv.utterances {
                for tok in crate::lexical::tokenize(&u.transcript).tokens {
                    assert!(table.get(&tok).is_some(), "{tok}");
                }
            }
        }
    }
}
