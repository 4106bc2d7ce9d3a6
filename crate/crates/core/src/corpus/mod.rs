//! Dialogue data model, the serialized text representation, delexicalization,
//! database grounding, corpus files and the synthetic corpus generator.

mod db;
mod delex;
mod io;
mod serialize;
mod synth;
mod types;
mod vocab;

pub use db::{query_db, Database, DomainTable, Record};
pub use delex::{delexicalize, lexicalize, lexicalize_with, PlaceholderDict, COUNT_SLOT};
pub use io::{
    load_corpus, load_database, load_dict, read_corpus, save_corpus, save_database, save_dict, write_corpus,
};
pub use serialize::{
    act_response_tokens, act_tokens, belief_db_tokens, belief_tokens, context_tokens, db_tokens, parse_acts,
    parse_belief, parse_db, response_tokens, serialize_context, serialize_target, split_target, target_tokens,
    Field, SplitTarget, TargetError,
};
pub use synth::{
    generate_synthetic_corpus, generic_response, DomainSpec, InformableSlot, SynthConfig, SyntheticCorpus,
    Templates, GENERAL_DOMAIN,
};
pub use types::{
    BeliefState, BookingStatus, DbResult, DialogueAct, DialogueActSet, DialogueExample, InvariantViolation,
    Placeholders, Role, SlotMap, Utterance,
};
pub use vocab::{is_bracket_tag, markers, normalize_text, tokenize, TokenId, TokenSequence, Vocab};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed example: {0}")]
    Malformed(String),
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("invalid corpus config: {0}")]
    Config(String),
    #[error("database: {0}")]
    Database(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Builds the shared vocabulary from every token the serializer can emit for
/// `examples`.
pub fn build_vocab<'a, I>(examples: I) -> Vocab
where
    I: IntoIterator<Item = &'a DialogueExample>,
{
    let mut words = Vec::new();
    for ex in examples {
        if let Ok(ctx) = context_tokens(&ex.context) {
            words.extend(ctx);
        }
        words.extend(target_tokens(ex));
    }
    Vocab::with_words(words)
}
