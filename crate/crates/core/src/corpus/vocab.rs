//! Word-level tokenizer and the shared token vocabulary.
//!
//! Every model in the toolkit scores [`TokenSequence`]s over one [`Vocab`]. The
//! vocabulary always starts with the field markers of the serialized dialogue
//! format, followed by the padding and unknown tokens, followed by corpus words
//! in lexicographic order. That ordering makes vocabularies built from the same
//! corpus identical byte for byte, which the model files rely on (they record a
//! hash of the vocabulary they were trained with).

use std::collections::{BTreeSet, HashMap};
use std::ops::Deref;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub type TokenId = u32;

/// Field markers of the serialized text representation.
pub mod markers {
    pub const CONTEXT_OPEN: &str = "[c]";
    pub const CONTEXT_CLOSE: &str = "[/c]";
    pub const USER_OPEN: &str = "[u]";
    pub const USER_CLOSE: &str = "[/u]";
    pub const RESPONSE_OPEN: &str = "[r]";
    pub const RESPONSE_CLOSE: &str = "[/r]";
    pub const BELIEF_OPEN: &str = "[b]";
    pub const BELIEF_CLOSE: &str = "[/b]";
    pub const DB_OPEN: &str = "[db]";
    pub const DB_CLOSE: &str = "[/db]";
    pub const ACT_OPEN: &str = "[a]";
    pub const ACT_CLOSE: &str = "[/a]";
    pub const PAD: &str = "<pad>";
    pub const UNK: &str = "<unk>";

    pub const FIELD_MARKERS: [&str; 12] = [
        CONTEXT_OPEN,
        CONTEXT_CLOSE,
        USER_OPEN,
        USER_CLOSE,
        RESPONSE_OPEN,
        RESPONSE_CLOSE,
        BELIEF_OPEN,
        BELIEF_CLOSE,
        DB_OPEN,
        DB_CLOSE,
        ACT_OPEN,
        ACT_CLOSE,
    ];

    pub fn is_field_marker(token: &str) -> bool {
        FIELD_MARKERS.contains(&token)
    }
}

const SPLIT_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')', '\''];

/// Lowercases `text`, splits on whitespace and peels punctuation off word edges.
///
/// Word-internal punctuation is kept (`12:30`, `i'll`). Bracketed tokens such as
/// `[value_time]` survive intact, except that the reserved field markers are
/// broken into `[`, inner, `]` so raw text can never forge a marker.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chunk = chunk.to_lowercase();
        let mut core: &str = &chunk;
        while let Some(c) = core.chars().next().filter(|c| SPLIT_PUNCT.contains(c)) {
            out.push(c.to_string());
            core = &core[c.len_utf8()..];
        }
        let mut trailing = Vec::new();
        while let Some(c) = core.chars().next_back().filter(|c| SPLIT_PUNCT.contains(c)) {
            trailing.push(c.to_string());
            core = &core[..core.len() - c.len_utf8()];
        }
        if !core.is_empty() {
            if markers::is_field_marker(core) {
                out.push("[".to_string());
                out.push(core[1..core.len() - 1].to_string());
                out.push("]".to_string());
            } else {
                out.push(core.to_string());
            }
        }
        out.extend(trailing.into_iter().rev());
    }
    out
}

/// Normalized surface form of a value: tokenized and re-joined with spaces.
pub fn normalize_text(text: &str) -> String {
    tokenize(text).join(" ")
}

/// `[word]` tokens that are not field markers: domain tags and placeholders.
pub fn is_bracket_tag(token: &str) -> bool {
    token.len() > 2
        && token.starts_with('[')
        && token.ends_with(']')
        && !markers::is_field_marker(token)
        && token[1..token.len() - 1]
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// A sequence of token ids; the unit every model scores and every decoder emits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<TokenId>);

impl TokenSequence {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn concat(&self, other: &[TokenId]) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(other);
        Self(v)
    }
}

impl Deref for TokenSequence {
    type Target = [TokenId];
    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenSequence {
    fn from(v: Vec<TokenId>) -> Self {
        Self(v)
    }
}

impl FromIterator<TokenId> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Bijection between token strings and contiguous ids starting at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::with_words(std::iter::empty::<String>())
    }
}

impl Vocab {
    /// Specials first, then the distinct `words` in lexicographic order.
    pub fn with_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = markers::FIELD_MARKERS.iter().map(|s| s.to_string()).collect();
        tokens.push(markers::PAD.to_string());
        tokens.push(markers::UNK.to_string());
        let specials: BTreeSet<String> = tokens.iter().cloned().collect();
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| !specials.contains(w))
            .collect();
        tokens.extend(words);
        Self::from_token_list(tokens).expect("specials are unique")
    }

    fn from_token_list(tokens: Vec<String>) -> Result<Self, String> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(format!("duplicate token {t:?}"));
            }
        }
        for (i, m) in markers::FIELD_MARKERS.iter().chain([markers::PAD, markers::UNK].iter()).enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*m) {
                return Err(format!("special token {m:?} must have id {i}"));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// Id of a token that is guaranteed present (markers, pad, unk).
    pub fn special(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or_else(|| panic!("{token} is not a special token"))
    }

    pub fn unk(&self) -> TokenId {
        self.special(markers::UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> TokenSequence {
        let unk = self.unk();
        words.iter().map(|w| self.id(w.as_ref()).unwrap_or(unk)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(markers::UNK).to_string())
            .collect()
    }

    /// SHA-256 over the newline-joined token list, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Serialize for Vocab {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.tokens.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocab {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        Self::from_token_list(tokens).map_err(serde::de::Error::custom)
    }
}
