//! Line-delimited decode request and response records.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::search::ScoreBreakdown;
use super::turn::DecodeResult;
use super::{BeamConfig, DecodeFlag, DecoderKind, ScoreWeights};
use crate::corpus::{BeliefState, DbResult, DialogueActSet, Utterance};

fn ser_tokens<S: Serializer>(tokens: &[String], s: S) -> Result<S::Ok, S::Error> {
    tokens.join(" ").serialize(s)
}

fn de_tokens<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    String::deserialize(d).map(|s| s.split_whitespace().map(str::to_string).collect())
}

/// One member of a final beam with its score terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEntry {
    #[serde(serialize_with = "ser_tokens", deserialize_with = "de_tokens")]
    pub tokens: Vec<String>,
    pub score: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub context: Vec<Utterance>,
    pub decoder: DecoderKind,
    pub weights: ScoreWeights,
    pub beam: BeamConfig,
}

/// Decode output for one turn. Wall-clock timing is kept out of this record
/// so that reruns are byte-identical; it goes to a separate sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResponse {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub decoder: DecoderKind,
    pub belief: BeliefState,
    pub db: DbResult,
    pub acts: DialogueActSet,
    #[serde(serialize_with = "ser_tokens", deserialize_with = "de_tokens")]
    pub response_delex: Vec<String>,
    #[serde(serialize_with = "ser_tokens", deserialize_with = "de_tokens")]
    pub response_lex: Vec<String>,
    pub best: usize,
    pub beam: Vec<BeamEntry>,
    #[serde(default)]
    pub flags: Vec<DecodeFlag>,
}

impl DecodeResponse {
    pub fn new(request: &DecodeRequest, result: DecodeResult, response_lex: Vec<String>) -> Self {
        Self {
            dialogue_id: request.dialogue_id.clone(),
            turn_index: request.turn_index,
            decoder: request.decoder,
            belief: result.belief,
            db: result.db,
            acts: result.acts,
            response_delex: result.response_delex,
            response_lex,
            best: result.best,
            beam: result.beam,
            flags: result.flags,
        }
    }

    pub fn score(&self) -> &ScoreBreakdown {
        &self.beam[self.best].score
    }
}
