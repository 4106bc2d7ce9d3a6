//! Turn-level pipeline: belief, database grounding, then act and response.

use serde::{Deserialize, Serialize};

use super::records::BeamEntry;
use super::search::{
    belief_search, direct_search, exact_search, online_search, rerank_search, NoisyModels, ScoreBreakdown,
    Search, SearchInput,
};
use super::{BeamConfig, DecodeError, DecodeFlag, DecoderKind, Markers, ScoreWeights};
use crate::corpus::{
    belief_db_tokens, belief_tokens, context_tokens, markers as m, parse_belief, query_db, split_target,
    BeliefState, BookingStatus, CorpusError, Database, DbResult, DialogueActSet, TokenId, Utterance, Vocab,
};
use crate::models::SequenceModel;

/// The vocabulary and three sub-models used to decode turns.
#[derive(Clone, Copy)]
pub struct TurnModels<'a> {
    pub vocab: &'a Vocab,
    pub direct: &'a dyn SequenceModel,
    pub channel: &'a dyn SequenceModel,
    pub source: &'a dyn SequenceModel,
}

impl<'a> TurnModels<'a> {
    pub fn noisy(&self) -> NoisyModels<'a> {
        NoisyModels { direct: self.direct, channel: self.channel, source: self.source }
    }

    pub fn markers(&self) -> Markers {
        Markers::from_vocab(self.vocab)
    }
}

/// Encoded sequences for one turn once belief and database are known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTurn {
    pub context: Vec<TokenId>,
    pub belief_db: Vec<TokenId>,
    pub channel_target: Vec<TokenId>,
}

impl EncodedTurn {
    pub fn new(vocab: &Vocab, context: &[Utterance], belief: &BeliefState, db: &DbResult) -> Result<Self, DecodeError> {
        let ctx = context_tokens(context).map_err(|source| DecodeError::Stage { stage: "context", source })?;
        let mut channel = ctx.clone();
        channel.extend(belief_tokens(belief));
        Ok(Self {
            context: vocab.encode(&ctx).0,
            belief_db: vocab.encode(&belief_db_tokens(belief, db)).0,
            channel_target: vocab.encode(&channel).0,
        })
    }

    pub fn input(&self, markers: Markers) -> SearchInput<'_> {
        SearchInput {
            context: &self.context,
            belief_db: &self.belief_db,
            channel_target: &self.channel_target,
            markers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub belief: BeliefState,
    pub db: DbResult,
    pub acts: DialogueActSet,
    pub response_delex: Vec<String>,
    /// Final beam in ranking order with per-member score terms.
    pub beam: Vec<BeamEntry>,
    pub best: usize,
    pub flags: Vec<DecodeFlag>,
}

impl DecodeResult {
    pub fn tokens(&self) -> &[String] {
        &self.beam[self.best].tokens
    }

    pub fn score(&self) -> &ScoreBreakdown {
        &self.beam[self.best].score
    }
}

fn push_flag(flags: &mut Vec<DecodeFlag>, f: DecodeFlag) {
    if !flags.contains(&f) {
        flags.push(f);
    }
}

/// Response fallback for sequences whose markers do not parse: whatever
/// follows the last act or response marker, minus closing markers.
fn fallback_response(words: &[String]) -> Vec<String> {
    let start = words
        .iter()
        .rposition(|w| w == m::ACT_OPEN || w == m::ACT_CLOSE || w == m::RESPONSE_OPEN)
        .map_or(0, |i| i + 1);
    words[start..].iter().filter(|w| *w != m::RESPONSE_CLOSE).cloned().collect()
}

fn finish(
    search: Search,
    vocab: &Vocab,
    belief: &BeliefState,
    db: &DbResult,
    mut flags: Vec<DecodeFlag>,
) -> DecodeResult {
    for f in &search.flags {
        push_flag(&mut flags, *f);
    }
    let beam: Vec<BeamEntry> = search
        .beam
        .iter()
        .map(|h| BeamEntry { tokens: vocab.decode(&h.tokens), score: h.breakdown(&search.weights) })
        .collect();
    let words = &beam[search.best].tokens;
    let (acts, response_delex) = match split_target(words) {
        Ok(s) => (s.acts, s.response),
        Err(_) => {
            push_flag(&mut flags, DecodeFlag::MalformedActResponse);
            (DialogueActSet::default(), fallback_response(words))
        }
    };
    DecodeResult {
        belief: belief.clone(),
        db: db.clone(),
        acts,
        response_delex,
        beam,
        best: search.best,
        flags,
    }
}

/// Decodes `[b] .. [/b]` with the direct model. A belief that does not
/// terminate or parse becomes the empty belief, with a flag.
pub fn decode_belief(
    context: &[Utterance],
    direct: &dyn SequenceModel,
    vocab: &Vocab,
    config: &BeamConfig,
) -> Result<(BeliefState, Vec<DecodeFlag>), DecodeError> {
    let ctx = context_tokens(context).map_err(|source| DecodeError::Stage { stage: "context", source })?;
    let ctx = vocab.encode(&ctx);
    let found = belief_search(direct, &ctx, &Markers::from_vocab(vocab), config)?;
    if !found.terminated {
        return Ok((BeliefState::new(), vec![DecodeFlag::UnterminatedBelief]));
    }
    let words = vocab.decode(&found.tokens);
    match parse_belief(&words[1..words.len() - 1]) {
        Ok(b) => Ok((b, Vec::new())),
        Err(_) => Ok((BeliefState::new(), vec![DecodeFlag::MalformedBelief])),
    }
}

/// Queries the belief's active domain. Unknown domains yield zero matches.
fn ground(belief: &BeliefState, database: &Database, flags: &mut Vec<DecodeFlag>) -> Result<DbResult, DecodeError> {
    let Some(domain) = belief.active_domain() else {
        return Ok(DbResult::empty());
    };
    match query_db(belief, database, domain) {
        Ok(r) => Ok(r),
        Err(CorpusError::UnknownDomain(_)) => {
            push_flag(flags, DecodeFlag::UnknownDomain);
            Ok(DbResult::new(domain, 0, BookingStatus::NotBooked))
        }
        Err(source) => Err(DecodeError::Stage { stage: "database", source }),
    }
}

pub fn direct_decode(
    context: &[Utterance],
    belief: &BeliefState,
    db: &DbResult,
    models: &TurnModels<'_>,
    config: &BeamConfig,
) -> Result<DecodeResult, DecodeError> {
    let enc = EncodedTurn::new(models.vocab, context, belief, db)?;
    let search = direct_search(models.direct, &enc.input(models.markers()), config)?;
    Ok(finish(search, models.vocab, belief, db, Vec::new()))
}

pub fn noisy_channel_rerank(
    context: &[Utterance],
    belief: &BeliefState,
    db: &DbResult,
    models: &TurnModels<'_>,
    w: &ScoreWeights,
    config: &BeamConfig,
) -> Result<DecodeResult, DecodeError> {
    let enc = EncodedTurn::new(models.vocab, context, belief, db)?;
    let search = rerank_search(&models.noisy(), &enc.input(models.markers()), w, config)?;
    Ok(finish(search, models.vocab, belief, db, Vec::new()))
}

pub fn noisy_channel_online(
    context: &[Utterance],
    belief: &BeliefState,
    db: &DbResult,
    models: &TurnModels<'_>,
    w: &ScoreWeights,
    config: &BeamConfig,
) -> Result<DecodeResult, DecodeError> {
    let enc = EncodedTurn::new(models.vocab, context, belief, db)?;
    let search = online_search(&models.noisy(), &enc.input(models.markers()), w, config)?;
    Ok(finish(search, models.vocab, belief, db, Vec::new()))
}

pub fn exact_decode(
    context: &[Utterance],
    belief: &BeliefState,
    db: &DbResult,
    models: &TurnModels<'_>,
    w: &ScoreWeights,
    max_len: usize,
) -> Result<DecodeResult, DecodeError> {
    let enc = EncodedTurn::new(models.vocab, context, belief, db)?;
    let search = exact_search(&models.noisy(), &enc.input(models.markers()), w, max_len)?;
    Ok(finish(search, models.vocab, belief, db, Vec::new()))
}

/// Full turn: belief by direct beam search, database query on the belief's
/// active domain, then act and response with the chosen decoder.
pub fn decode_turn(
    context: &[Utterance],
    models: &TurnModels<'_>,
    kind: DecoderKind,
    w: &ScoreWeights,
    config: &BeamConfig,
    database: &Database,
) -> Result<DecodeResult, DecodeError> {
    let (belief, mut flags) = decode_belief(context, models.direct, models.vocab, config)?;
    let db = ground(&belief, database, &mut flags)?;
    let mut result = match kind {
        DecoderKind::Direct => direct_decode(context, &belief, &db, models, config)?,
        DecoderKind::Rerank => noisy_channel_rerank(context, &belief, &db, models, w, config)?,
        DecoderKind::Online => noisy_channel_online(context, &belief, &db, models, w, config)?,
    };
    for f in result.flags.drain(..) {
        push_flag(&mut flags, f);
    }
    result.flags = flags;
    Ok(result)
}
