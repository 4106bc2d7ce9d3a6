use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::vocab::{is_bracket_tag, normalize_text, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub role: Role,
    pub text: String,
}

impl Utterance {
    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, text: text.into() }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self { role: Role::System, text: text.into() }
    }
}

pub type SlotMap = IndexMap<String, String>;

/// Slot-value constraints per domain. Equality ignores insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefState {
    pub domains: IndexMap<String, SlotMap>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.values().all(|s| s.is_empty())
    }

    pub fn insert(&mut self, domain: &str, slot: &str, value: &str) {
        self.domains
            .entry(domain.to_string())
            .or_default()
            .insert(slot.to_string(), value.to_string());
    }

    pub fn with(mut self, domain: &str, slot: &str, value: &str) -> Self {
        self.insert(domain, slot, value);
        self
    }

    /// Lowercased names and tokenized values, the form the serializer emits.
    pub fn normalized(&self) -> Self {
        let mut out = Self::new();
        for (domain, slots) in &self.domains {
            if slots.is_empty() {
                continue;
            }
            for (slot, value) in slots {
                out.insert(&domain.to_lowercase(), &slot.to_lowercase(), &normalize_text(value));
            }
        }
        out
    }

    /// The last domain with at least one constraint; the turn's focus.
    pub fn active_domain(&self) -> Option<&str> {
        self.domains
            .iter()
            .rev()
            .find(|(_, s)| !s.is_empty())
            .map(|(d, _)| d.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BookingStatus {
    #[default]
    NotBooked,
    Booked,
    Unavailable,
}

impl BookingStatus {
    pub fn words(self) -> &'static [&'static str] {
        match self {
            BookingStatus::NotBooked => &["not", "booked"],
            BookingStatus::Booked => &["booked"],
            BookingStatus::Unavailable => &["unavailable"],
        }
    }

    pub fn from_words(words: &[String]) -> Option<Self> {
        [Self::NotBooked, Self::Booked, Self::Unavailable]
            .into_iter()
            .find(|s| s.words().iter().copied().eq(words.iter().map(String::as_str)))
    }
}

/// Outcome of grounding a belief against the database. An empty `domain` means
/// no query was made and the field serializes as `[db] [/db]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbResult {
    pub domain: String,
    #[serde(rename = "match")]
    pub match_count: u64,
    pub status: BookingStatus,
}

impl DbResult {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(domain: &str, match_count: u64, status: BookingStatus) -> Self {
        Self { domain: domain.to_string(), match_count, status }
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueAct {
    pub act: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
}

impl DialogueAct {
    pub fn new(act: &str, slot: Option<&str>) -> Self {
        Self { act: act.to_string(), slot: slot.map(str::to_string) }
    }
}

/// Acts in serialized order; scores are order sensitive so equality is too.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueActSet {
    pub domain: String,
    pub acts: Vec<DialogueAct>,
}

impl DialogueActSet {
    pub fn new(domain: &str, acts: &[(&str, Option<&str>)]) -> Self {
        Self {
            domain: domain.to_string(),
            acts: acts.iter().map(|(a, s)| DialogueAct::new(a, *s)).collect(),
        }
    }
}

/// Placeholder token to the surface values it stands for, one per occurrence
/// in left-to-right order.
pub type Placeholders = IndexMap<String, Vec<String>>;

/// One system turn: everything needed to train and evaluate a prediction step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueExample {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub context: Vec<Utterance>,
    pub belief: BeliefState,
    pub db: DbResult,
    pub acts: DialogueActSet,
    #[serde(serialize_with = "ser_tokens", deserialize_with = "de_tokens")]
    pub response_delex: Vec<String>,
    #[serde(serialize_with = "ser_tokens", deserialize_with = "de_tokens")]
    pub response_lex: Vec<String>,
    #[serde(default)]
    pub placeholders: Placeholders,
}

fn ser_tokens<S: Serializer>(tokens: &[String], s: S) -> Result<S::Ok, S::Error> {
    tokens.join(" ").serialize(s)
}

fn de_tokens<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    String::deserialize(d).map(|s| tokenize(&s))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantViolation(pub String);

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl DialogueExample {
    /// Checks the structural invariants every stored example must satisfy.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        match self.context.last() {
            None => return Err(InvariantViolation("context is empty".into())),
            Some(u) if u.role != Role::User => {
                return Err(InvariantViolation("context must end with a user utterance".into()))
            }
            _ => {}
        }
        for tok in &self.response_delex {
            if is_bracket_tag(tok) && !self.placeholders.contains_key(tok) {
                return Err(InvariantViolation(format!("placeholder {tok} has no value")));
            }
        }
        let relex = super::delex::lexicalize_with(&self.response_delex, &self.placeholders);
        if relex != self.response_lex {
            return Err(InvariantViolation(format!(
                "lexicalized response {:?} does not match {:?}",
                relex.join(" "),
                self.response_lex.join(" ")
            )));
        }
        Ok(())
    }
}
