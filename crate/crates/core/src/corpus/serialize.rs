//! The serialized text representation of a dialogue turn.
//!
//! ```text
//! [c] u1 [/u] s1 [/r] u2 [/u] [/c]
//! [b] [domain] slot value , slot value [/b] [db] [domain] match N , status S [/db]
//! [a] [domain] act slot , act [/a] [r] response [/r]
//! ```

use std::fmt;

use super::types::{
    BeliefState, BookingStatus, DbResult, DialogueAct, DialogueActSet, DialogueExample, Role, Utterance,
};
use super::vocab::{is_bracket_tag, markers as m, tokenize, TokenSequence, Vocab};
use super::CorpusError;

pub fn context_tokens(context: &[Utterance]) -> Result<Vec<String>, CorpusError> {
    if context.is_empty() {
        return Err(CorpusError::Malformed("empty context".into()));
    }
    let mut out = vec![m::CONTEXT_OPEN.to_string()];
    for utt in context {
        out.extend(tokenize(&utt.text));
        out.push(
            match utt.role {
                Role::User => m::USER_CLOSE,
                Role::System => m::RESPONSE_CLOSE,
            }
            .to_string(),
        );
    }
    out.push(m::CONTEXT_CLOSE.to_string());
    Ok(out)
}

pub fn serialize_context(example: &DialogueExample, vocab: &Vocab) -> Result<TokenSequence, CorpusError> {
    Ok(vocab.encode(&context_tokens(&example.context)?))
}

fn domain_tag(domain: &str) -> String {
    format!("[{}]", domain.to_lowercase())
}

pub fn belief_tokens(belief: &BeliefState) -> Vec<String> {
    let mut out = vec![m::BELIEF_OPEN.to_string()];
    for (domain, slots) in &belief.domains {
        if slots.is_empty() {
            continue;
        }
        out.push(domain_tag(domain));
        for (i, (slot, value)) in slots.iter().enumerate() {
            if i > 0 {
                out.push(",".into());
            }
            out.push(slot.to_lowercase());
            out.extend(tokenize(value));
        }
    }
    out.push(m::BELIEF_CLOSE.to_string());
    out
}

pub fn db_tokens(db: &DbResult) -> Vec<String> {
    let mut out = vec![m::DB_OPEN.to_string()];
    if !db.is_empty() {
        out.push(domain_tag(&db.domain));
        out.push("match".into());
        out.push(db.match_count.to_string());
        out.push(",".into());
        out.push("status".into());
        out.extend(db.status.words().iter().map(|w| w.to_string()));
    }
    out.push(m::DB_CLOSE.to_string());
    out
}

pub fn act_tokens(acts: &DialogueActSet) -> Vec<String> {
    let mut out = vec![m::ACT_OPEN.to_string()];
    if !acts.domain.is_empty() {
        out.push(domain_tag(&acts.domain));
    }
    for (i, act) in acts.acts.iter().enumerate() {
        if i > 0 {
            out.push(",".into());
        }
        out.push(act.act.clone());
        if let Some(slot) = &act.slot {
            out.push(slot.clone());
        }
    }
    out.push(m::ACT_CLOSE.to_string());
    out
}

pub fn response_tokens(response: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(response.len() + 2);
    out.push(m::RESPONSE_OPEN.to_string());
    out.extend(response.iter().cloned());
    out.push(m::RESPONSE_CLOSE.to_string());
    out
}

/// `[b]..[/b] [db]..[/db]`: the conditioning prefix for act/response decoding.
pub fn belief_db_tokens(belief: &BeliefState, db: &DbResult) -> Vec<String> {
    let mut out = belief_tokens(belief);
    out.extend(db_tokens(db));
    out
}

/// `[a]..[/a] [r]..[/r]`: what the source model scores and the channel model reads.
pub fn act_response_tokens(acts: &DialogueActSet, response: &[String]) -> Vec<String> {
    let mut out = act_tokens(acts);
    out.extend(response_tokens(response));
    out
}

pub fn target_tokens(example: &DialogueExample) -> Vec<String> {
    let mut out = belief_db_tokens(&example.belief, &example.db);
    out.extend(act_response_tokens(&example.acts, &example.response_delex));
    out
}

pub fn serialize_target(example: &DialogueExample, vocab: &Vocab) -> TokenSequence {
    vocab.encode(&target_tokens(example))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Belief,
    Db,
    Act,
    Response,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Belief => "belief",
            Field::Db => "db",
            Field::Act => "act",
            Field::Response => "response",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TargetError {
    #[error("missing {0} field")]
    Missing(Field),
    #[error("unclosed {0} field")]
    Unclosed(Field),
    #[error("malformed {0} field: {1}")]
    Malformed(Field, String),
}

/// Fields recovered from a (possibly partial) decoded target sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTarget {
    pub belief: Option<BeliefState>,
    pub db: Option<DbResult>,
    pub acts: DialogueActSet,
    pub response: Vec<String>,
}

fn find(tokens: &[String], from: usize, marker: &str) -> Option<usize> {
    tokens[from..].iter().position(|t| t == marker).map(|p| p + from)
}

const OPENERS: [&str; 4] = [m::BELIEF_OPEN, m::DB_OPEN, m::ACT_OPEN, m::RESPONSE_OPEN];

/// Locates `open .. close` starting at `from`. The closing marker must come
/// before any other field opener.
fn field_span(
    tokens: &[String],
    from: usize,
    until: usize,
    open: &str,
    close: &str,
    field: Field,
) -> Result<Option<(usize, usize)>, TargetError> {
    let Some(start) = find(&tokens[..until], from, open) else {
        return Ok(None);
    };
    for (i, t) in tokens.iter().enumerate().skip(start + 1) {
        if t == close {
            return Ok(Some((start + 1, i)));
        }
        if OPENERS.contains(&t.as_str()) {
            break;
        }
    }
    Err(TargetError::Unclosed(field))
}

/// Parses `[domain] slot value , slot value [domain2] ...` (marker-free content).
pub fn parse_belief(content: &[String]) -> Result<BeliefState, TargetError> {
    let bad = |msg: &str| TargetError::Malformed(Field::Belief, msg.to_string());
    let mut belief = BeliefState::new();
    let mut domain: Option<String> = None;
    let mut item: Vec<String> = Vec::new();
    let flush = |domain: &Option<String>, item: &mut Vec<String>, belief: &mut BeliefState| {
        if item.is_empty() {
            return Err(bad("empty slot entry"));
        }
        if item.len() < 2 {
            return Err(bad("slot without value"));
        }
        let d = domain.as_ref().ok_or_else(|| bad("slot before domain tag"))?;
        belief.insert(d, &item[0], &item[1..].join(" "));
        item.clear();
        Ok(())
    };
    for tok in content {
        if m::is_field_marker(tok) {
            return Err(bad("unexpected marker"));
        }
        if is_bracket_tag(tok) {
            if domain.is_some() {
                flush(&domain, &mut item, &mut belief)?;
            } else if !item.is_empty() {
                return Err(bad("slot before domain tag"));
            }
            domain = Some(tok[1..tok.len() - 1].to_string());
        } else if tok == "," {
            flush(&domain, &mut item, &mut belief)?;
        } else {
            item.push(tok.clone());
        }
    }
    if domain.is_some() {
        flush(&domain, &mut item, &mut belief)?;
    } else if !item.is_empty() {
        return Err(bad("slot before domain tag"));
    }
    Ok(belief)
}

pub fn parse_db(content: &[String]) -> Result<DbResult, TargetError> {
    let bad = |msg: &str| TargetError::Malformed(Field::Db, msg.to_string());
    if content.is_empty() {
        return Ok(DbResult::empty());
    }
    if content.len() < 6 || !is_bracket_tag(&content[0]) {
        return Err(bad("expected [domain] match N , status S"));
    }
    if content[1] != "match" || content[3] != "," || content[4] != "status" {
        return Err(bad("expected [domain] match N , status S"));
    }
    let count = content[2].parse::<u64>().map_err(|_| bad("match count is not a number"))?;
    let status = BookingStatus::from_words(&content[5..]).ok_or_else(|| bad("unknown booking status"))?;
    Ok(DbResult::new(&content[0][1..content[0].len() - 1], count, status))
}

pub fn parse_acts(content: &[String]) -> Result<DialogueActSet, TargetError> {
    let bad = |msg: &str| TargetError::Malformed(Field::Act, msg.to_string());
    let (domain, rest) = match content.first() {
        Some(t) if is_bracket_tag(t) => (t[1..t.len() - 1].to_string(), &content[1..]),
        _ => (String::new(), content),
    };
    let mut acts = Vec::new();
    if !rest.is_empty() {
        for item in rest.split(|t| t == ",") {
            match item {
                [act] => acts.push(DialogueAct { act: act.clone(), slot: None }),
                [act, slot] => acts.push(DialogueAct { act: act.clone(), slot: Some(slot.clone()) }),
                [] => return Err(bad("empty act entry")),
                _ => return Err(bad("act entry longer than two tokens")),
            }
            if item.iter().any(|t| m::is_field_marker(t) || is_bracket_tag(t)) {
                return Err(bad("unexpected tag inside act entry"));
            }
        }
    }
    Ok(DialogueActSet { domain, acts })
}

/// Recovers belief, acts and response from a decoded target. Belief and db
/// fields are optional (act+response fragments are common); act and response
/// fields are required. Errors name the first violated field in b, db, a, r order.
pub fn split_target(tokens: &[String]) -> Result<SplitTarget, TargetError> {
    let mut cursor = 0;
    // optional fields must precede the act field
    let act_start = find(tokens, 0, m::ACT_OPEN).unwrap_or(tokens.len());
    let mut belief = None;
    if let Some((s, e)) = field_span(tokens, cursor, act_start, m::BELIEF_OPEN, m::BELIEF_CLOSE, Field::Belief)? {
        belief = Some(parse_belief(&tokens[s..e])?);
        cursor = e + 1;
    }
    let mut db = None;
    if let Some((s, e)) = field_span(tokens, cursor, act_start, m::DB_OPEN, m::DB_CLOSE, Field::Db)? {
        db = Some(parse_db(&tokens[s..e])?);
        cursor = e + 1;
    }
    let (s, e) = field_span(tokens, cursor, tokens.len(), m::ACT_OPEN, m::ACT_CLOSE, Field::Act)?
        .ok_or(TargetError::Missing(Field::Act))?;
    let acts = parse_acts(&tokens[s..e])?;
    cursor = e + 1;
    let (s, e) = field_span(tokens, cursor, tokens.len(), m::RESPONSE_OPEN, m::RESPONSE_CLOSE, Field::Response)?
        .ok_or(TargetError::Missing(Field::Response))?;
    Ok(SplitTarget { belief, db, acts, response: tokens[s..e].to_vec() })
}
