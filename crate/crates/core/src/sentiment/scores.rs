use serde::{Deserialize, Serialize};

pub const SCORE_MIN: f64 = -3.0;
pub const SCORE_MAX: f64 = 3.0;

/// Per-utterance sentiment triple on the -3..+3 scale (0 is neutral).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SentimentScores {
    #[serde(rename = "act")]
    pub activation: f64,
    #[serde(rename = "val")]
    pub valence: f64,
    #[serde(rename = "sat")]
    pub satisfaction: f64,
}

/// One of the three sentiment dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Activation,
    Valence,
    Satisfaction,
}

impl Dimension {
    /// Head order of the sentiment model.
    pub const ALL: [Dimension; 3] = [
        Dimension::Activation,
        Dimension::Valence,
        Dimension::Satisfaction,
    ];

    pub fn index(self) -> usize {
        match self {
            Dimension::Activation => 0,
            Dimension::Valence => 1,
            Dimension::Satisfaction => 2,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Dimension::Activation => "act",
            Dimension::Valence => "val",
            Dimension::Satisfaction => "sat",
        }
    }
}

impl SentimentScores {
    pub fn new(activation: f64, valence: f64, satisfaction: f64) -> Self {
        SentimentScores {
            activation,
            valence,
            satisfaction,
        }
    }

    /// `[activation, valence, satisfaction]`.
    pub fn to_array(self) -> [f64; 3] {
        [self.activation, self.valence, self.satisfaction]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        SentimentScores::new(a[0], a[1], a[2])
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        self.to_array()[dim.index()]
    }

    pub fn clamped(self) -> Self {
        let c = |v: f64| v.clamp(SCORE_MIN, SCORE_MAX);
        SentimentScores::new(c(self.activation), c(self.valence), c(self.satisfaction))
    }

    pub fn in_range(&self) -> bool {
        self.to_array()
            .iter()
            .all(|v| (SCORE_MIN..=SCORE_MAX).contains(v))
    }
}
