//! Decoding of (act, response) sequences: direct beam search, noisy channel
//! reranking of the direct n-best list, online noisy channel beam search,
//! and exhaustive search for toy-sized problems.
//!
//! Hypotheses are scored with
//!
//! ```text
//! log p(O | C, B) + λ1 · log p(C, B | O) + λ2 · log p(O) + λ3 · |O|
//! ```
//!
//! where `O` is the act and response sequence starting at `[a]`.

mod records;
mod search;
mod select;
mod turn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{markers as m, CorpusError, TokenId, Vocab};

pub use records::{BeamEntry, DecodeRequest, DecodeResponse};
pub use search::{
    belief_search, combined_score, direct_search, exact_search, online_search, rerank_search, rescore,
    BeliefSearch, Hypothesis, NoisyModels, ScoreBreakdown, Search, SearchInput, EXACT_LIMIT,
};
pub use select::select_candidates;
pub use turn::{
    decode_belief, decode_turn, direct_decode, exact_decode, noisy_channel_online, noisy_channel_rerank,
    DecodeResult, EncodedTurn, TurnModels,
};

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("invalid decoding config: {0}")]
    Config(String),
    #[error("exact decoding would enumerate {count} sequences (limit {limit}); shrink the vocabulary or max length")]
    TooLarge { count: u128, limit: u128 },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: CorpusError,
    },
}

/// Weights of the channel, source and length terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl ScoreWeights {
    pub const ZERO: ScoreWeights = ScoreWeights { lambda1: 0.0, lambda2: 0.0, lambda3: 0.0 };

    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self { lambda1, lambda2, lambda3 }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        if [self.lambda1, self.lambda2, self.lambda3].iter().all(|l| l.is_finite()) {
            Ok(())
        } else {
            Err(DecodeError::Config(format!("weights must be finite: {self:?}")))
        }
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self::ZERO
    }
}

/// Tuned weights and beam sizes published for three benchmark datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub weights: ScoreWeights,
    pub k1: usize,
    pub k2: usize,
}

pub const PRESETS: [Preset; 3] = [
    Preset { name: "multiwoz", weights: ScoreWeights { lambda1: 0.8, lambda2: 1.0, lambda3: 0.8 }, k1: 4, k2: 4 },
    Preset { name: "camrest", weights: ScoreWeights { lambda1: 1.2, lambda2: 1.2, lambda3: 0.8 }, k1: 15, k2: 15 },
    Preset { name: "smcalflow", weights: ScoreWeights { lambda1: 0.4, lambda2: 1.0, lambda3: 0.2 }, k1: 4, k2: 4 },
];

pub fn preset(name: &str) -> Option<Preset> {
    PRESETS.iter().copied().find(|p| p.name == name)
}

/// Cumulative probability used with nucleus expansion on the benchmarks.
pub const DEFAULT_NUCLEUS_P: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionStrategy {
    TopKMax,
    SampleWithoutReplacement,
    TopKSample,
    Nucleus(f64),
}

impl fmt::Display for ExpansionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionStrategy::TopKMax => f.write_str("topk"),
            ExpansionStrategy::SampleWithoutReplacement => f.write_str("swr"),
            ExpansionStrategy::TopKSample => f.write_str("topks"),
            ExpansionStrategy::Nucleus(p) => write!(f, "nucleus({p})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Direct,
    Rerank,
    Online,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 3] = [DecoderKind::Direct, DecoderKind::Rerank, DecoderKind::Online];

    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Direct => "direct",
            DecoderKind::Rerank => "rerank",
            DecoderKind::Online => "online",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecoderKind {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DecoderKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| DecodeError::Config(format!("unknown decoder {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamConfig {
    /// Candidates drawn per hypothesis and step.
    pub k1: usize,
    /// Beam width after pruning.
    pub k2: usize,
    /// Maximum act+response length, markers included.
    pub max_len: usize,
    /// Maximum belief length, markers included.
    pub belief_max_len: usize,
    pub strategy: ExpansionStrategy,
    pub seed: u64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { k1: 4, k2: 4, max_len: 40, belief_max_len: 32, strategy: ExpansionStrategy::TopKMax, seed: 0 }
    }
}

impl BeamConfig {
    pub fn with_beam(mut self, k1: usize, k2: usize) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self
    }

    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn with_strategy(mut self, strategy: ExpansionStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, vocab_size: usize) -> Result<(), DecodeError> {
        if self.k1 < 1 || self.k1 > vocab_size {
            return Err(DecodeError::Config(format!("k1 must be in 1..={vocab_size}, got {}", self.k1)));
        }
        if self.k2 < 1 {
            return Err(DecodeError::Config("k2 must be at least 1".into()));
        }
        if self.max_len < 2 || self.belief_max_len < 2 {
            return Err(DecodeError::Config("maximum lengths must be at least 2".into()));
        }
        if let ExpansionStrategy::Nucleus(p) = self.strategy {
            if !(p > 0.0 && p <= 1.0) {
                return Err(DecodeError::Config(format!("nucleus p must be in (0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Ids of the markers the search grammar depends on. Decoupled from
/// [`Vocab`] so searches can run over hand-built toy vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Markers {
    pub act_open: TokenId,
    pub response_close: TokenId,
    pub belief_open: TokenId,
    pub belief_close: TokenId,
}

impl Markers {
    pub fn from_vocab(vocab: &Vocab) -> Self {
        Self {
            act_open: vocab.special(m::ACT_OPEN),
            response_close: vocab.special(m::RESPONSE_CLOSE),
            belief_open: vocab.special(m::BELIEF_OPEN),
            belief_close: vocab.special(m::BELIEF_CLOSE),
        }
    }
}

/// Non-fatal conditions recorded on a decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeFlag {
    /// The decoded belief did not parse; an empty belief was used.
    MalformedBelief,
    /// No belief hypothesis reached `[/b]`.
    UnterminatedBelief,
    /// No act/response hypothesis reached `[/r]`; the best unfinished one was returned.
    Unterminated,
    /// Act/response markers were missing or out of order.
    MalformedActResponse,
    /// The belief's domain is not in the database; zero matches were assumed.
    UnknownDomain,
}
