//! Delexicalization (slot values to placeholders) and its inverse.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::db::{Database, Record};
use super::types::{BeliefState, DbResult, Placeholders, SlotMap};
use super::vocab::{is_bracket_tag, tokenize};

/// Slot name to placeholder token, e.g. `arrive -> [value_time]`. A key of the
/// form `domain-slot` takes precedence over the bare slot name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlaceholderDict(pub IndexMap<String, String>);

/// Slot used for the database match count.
pub const COUNT_SLOT: &str = "choice";

impl PlaceholderDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, slot: &str, placeholder: &str) -> Self {
        self.0.insert(slot.to_string(), placeholder.to_string());
        self
    }

    pub fn lookup(&self, domain: &str, slot: &str) -> Option<&str> {
        self.0
            .get(&format!("{domain}-{slot}"))
            .or_else(|| self.0.get(slot))
            .map(String::as_str)
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.0.values().map(String::as_str)
    }
}

struct Candidate {
    value: Vec<String>,
    slot: String,
    placeholder: String,
    from_db: bool,
}

/// Replaces slot values in a lexical response with placeholders.
///
/// Matching is longest-match, left to right. Belief values are tried before
/// database values (the match count and the offered `entity` record); equal
/// length ties go to the lexicographically smaller slot name. Returns the
/// delexicalized tokens and, per placeholder, the replaced surface values in
/// order of occurrence.
pub fn delexicalize(
    response_lex: &[String],
    belief: &BeliefState,
    db: &DbResult,
    entity: Option<&Record>,
    dict: &PlaceholderDict,
) -> (Vec<String>, Placeholders) {
    let mut cands = Vec::new();
    for (domain, slots) in &belief.domains {
        for (slot, value) in slots {
            if let Some(ph) = dict.lookup(domain, slot) {
                cands.push(Candidate {
                    value: tokenize(value),
                    slot: slot.clone(),
                    placeholder: ph.to_string(),
                    from_db: false,
                });
            }
        }
    }
    if !db.is_empty() {
        if let Some(ph) = dict.lookup(&db.domain, COUNT_SLOT) {
            cands.push(Candidate {
                value: vec![db.match_count.to_string()],
                slot: COUNT_SLOT.to_string(),
                placeholder: ph.to_string(),
                from_db: true,
            });
        }
        for (slot, value) in entity.into_iter().flatten() {
            if let Some(ph) = dict.lookup(&db.domain, slot) {
                cands.push(Candidate {
                    value: tokenize(value),
                    slot: slot.clone(),
                    placeholder: ph.to_string(),
                    from_db: true,
                });
            }
        }
    }
    cands.retain(|c| !c.value.is_empty());
    cands.sort_by(|a, b| a.from_db.cmp(&b.from_db).then_with(|| a.slot.cmp(&b.slot)));

    let mut out = Vec::with_capacity(response_lex.len());
    let mut map = Placeholders::new();
    let mut i = 0;
    while i < response_lex.len() {
        let mut best: Option<&Candidate> = None;
        for c in &cands {
            let fits = response_lex[i..].starts_with(&c.value);
            if fits && best.is_none_or(|b| c.value.len() > b.value.len()) {
                best = Some(c);
            }
        }
        match best {
            Some(c) => {
                out.push(c.placeholder.clone());
                map.entry(c.placeholder.clone()).or_default().push(c.value.join(" "));
                i += c.value.len();
            }
            None => {
                out.push(response_lex[i].clone());
                i += 1;
            }
        }
    }
    (out, map)
}

/// Fills placeholders from an explicit placeholder map (the exact inverse of
/// [`delexicalize`]). The k-th occurrence of a placeholder takes its k-th
/// value; surplus occurrences reuse the last one.
pub fn lexicalize_with(response_delex: &[String], placeholders: &Placeholders) -> Vec<String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(response_delex.len());
    for tok in response_delex {
        match placeholders.get(tok).filter(|v| !v.is_empty()) {
            Some(values) => {
                let k = seen.entry(tok).or_default();
                let v = &values[(*k).min(values.len() - 1)];
                *k += 1;
                out.extend(v.split_whitespace().map(str::to_string));
            }
            None => out.push(tok.clone()),
        }
    }
    out
}

/// Fills placeholders from the belief state first, then the database match
/// count, then the first database record matching the belief. Placeholders
/// that cannot be resolved stay verbatim.
pub fn lexicalize(
    response_delex: &[String],
    belief: &BeliefState,
    db: &DbResult,
    database: &Database,
    dict: &PlaceholderDict,
) -> Vec<String> {
    let domain = if db.is_empty() {
        belief.active_domain().unwrap_or_default().to_string()
    } else {
        db.domain.clone()
    };
    let empty = SlotMap::new();
    let entity: Option<&Record> = database.table(&domain).and_then(|t| {
        let constraints = belief.domains.get(&domain).unwrap_or(&empty);
        let idx = database.matching(&domain, constraints).ok()?;
        idx.first().map(|&i| &t.records[i])
    });

    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(response_delex.len());
    for tok in response_delex {
        if !is_bracket_tag(tok) {
            out.push(tok.clone());
            continue;
        }
        let k = seen.entry(tok).or_default();
        let occurrence = *k;
        *k += 1;

        let from_belief: Vec<&String> = belief
            .domains
            .iter()
            .flat_map(|(d, slots)| slots.iter().map(move |(s, v)| (d, s, v)))
            .filter(|(d, s, _)| dict.lookup(d, s) == Some(tok))
            .map(|(_, _, v)| v)
            .collect();
        let value: Option<String> = if !from_belief.is_empty() {
            Some(from_belief[occurrence.min(from_belief.len() - 1)].clone())
        } else if !db.is_empty() && dict.lookup(&db.domain, COUNT_SLOT) == Some(tok) {
            Some(db.match_count.to_string())
        } else {
            entity.and_then(|rec| {
                rec.iter()
                    .find(|(s, _)| dict.lookup(&domain, s) == Some(tok))
                    .map(|(_, v)| v.clone())
            })
        };
        match value {
            Some(v) => out.extend(tokenize(&v)),
            None => out.push(tok.clone()),
        }
    }
    out
}
