use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::pairs::{epoch_pairs, TrainingPair};
use super::{ModelError, SequenceModel, TrainingConfig};
use crate::corpus::TokenId;

/// Separates the conditioning summary from the target history inside a
/// table key. Never a vocabulary id.
const SEP: TokenId = TokenId::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CountConfig {
    /// Target history length (tokens preceding the predicted one).
    pub order: usize,
    /// Number of trailing conditioning tokens kept in the key.
    pub summary_len: usize,
    /// Additive smoothing constant.
    pub alpha: f64,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self { order: 3, summary_len: 16, alpha: 0.1 }
    }
}

impl CountConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ModelError::Config(format!("smoothing alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Entry {
    pub total: u64,
    pub counts: HashMap<TokenId, u64>,
}

/// Additively smoothed n-gram model over
/// `(conditioning summary, target history) -> next token`:
///
/// `p(t | key) = (count(key, t) + alpha) / (count(key) + alpha * V)`
#[derive(Debug, Clone, PartialEq)]
pub struct CountModel {
    vocab_size: usize,
    config: CountConfig,
    tables: HashMap<Box<[TokenId]>, Entry>,
}

impl CountModel {
    pub fn new(vocab_size: usize, config: CountConfig) -> Result<Self, ModelError> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(ModelError::Config("vocabulary is empty".into()));
        }
        Ok(Self { vocab_size, config, tables: HashMap::new() })
    }

    pub fn config(&self) -> &CountConfig {
        &self.config
    }

    pub fn key(&self, conditioning: &[TokenId], prefix: &[TokenId]) -> Vec<TokenId> {
        let c = &conditioning[conditioning.len().saturating_sub(self.config.summary_len)..];
        let h = &prefix[prefix.len().saturating_sub(self.config.order)..];
        let mut key = Vec::with_capacity(c.len() + 1 + h.len());
        key.extend_from_slice(c);
        key.push(SEP);
        key.extend_from_slice(h);
        key
    }

    pub fn add_pair(&mut self, conditioning: &[TokenId], target: &[TokenId]) {
        for t in 0..target.len() {
            let key = self.key(conditioning, &target[..t]);
            let entry = self.tables.entry(key.into_boxed_slice()).or_default();
            entry.total += 1;
            *entry.counts.entry(target[t]).or_default() += 1;
        }
    }

    /// Counts every pair once per epoch, with per-epoch channel truncation.
    pub fn accumulate_epochs(&mut self, pairs: &[TrainingPair], config: &TrainingConfig) {
        for epoch in 0..config.epochs {
            for p in epoch_pairs(pairs, config, epoch).iter() {
                self.add_pair(&p.conditioning, &p.target);
            }
        }
    }

    /// `(count(key, token), count(key))`.
    pub fn counts(&self, conditioning: &[TokenId], prefix: &[TokenId], token: TokenId) -> (u64, u64) {
        match self.tables.get(&self.key(conditioning, prefix)[..]) {
            Some(e) => (e.counts.get(&token).copied().unwrap_or(0), e.total),
            None => (0, 0),
        }
    }

    pub fn num_contexts(&self) -> usize {
        self.tables.len()
    }

    fn logprob(&self, count: u64, total: u64) -> f64 {
        let alpha = self.config.alpha;
        ((count as f64 + alpha) / (total as f64 + alpha * self.vocab_size as f64)).ln()
    }

    /// Table entries sorted by key, each with its counts sorted by token.
    pub(crate) fn sorted_entries(&self) -> Vec<(&[TokenId], u64, Vec<(TokenId, u64)>)> {
        let mut out: Vec<_> = self
            .tables
            .iter()
            .map(|(k, e)| {
                let mut counts: Vec<(TokenId, u64)> = e.counts.iter().map(|(&t, &c)| (t, c)).collect();
                counts.sort_unstable();
                (&k[..], e.total, counts)
            })
            .collect();
        out.sort_unstable_by(|a, b| a.0.cmp(b.0));
        out
    }

    pub(crate) fn from_entries(
        vocab_size: usize,
        config: CountConfig,
        entries: Vec<(Vec<TokenId>, Vec<(TokenId, u64)>)>,
    ) -> Result<Self, ModelError> {
        let mut model = Self::new(vocab_size, config)?;
        for (key, counts) in entries {
            let mut entry = Entry::default();
            for (tok, c) in counts {
                if tok as usize >= vocab_size {
                    return Err(ModelError::Corrupt(format!("token id {tok} outside vocabulary")));
                }
                entry.total += c;
                entry.counts.insert(tok, c);
            }
            model.tables.insert(key.into_boxed_slice(), entry);
        }
        Ok(model)
    }
}

impl SequenceModel for CountModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, conditioning: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        match self.tables.get(&self.key(conditioning, prefix)[..]) {
            None => vec![self.logprob(0, 0); self.vocab_size],
            Some(e) => {
                let mut out = vec![self.logprob(0, e.total); self.vocab_size];
                for (&t, &c) in &e.counts {
                    out[t as usize] = self.logprob(c, e.total);
                }
                out
            }
        }
    }

    fn token_logprob(&self, conditioning: &[TokenId], prefix: &[TokenId], token: TokenId) -> f64 {
        let (c, n) = self.counts(conditioning, prefix, token);
        self.logprob(c, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Role;

    const X: TokenId = 14;
    const Y: TokenId = 15;

    fn single_pair(v: usize) -> CountModel {
        let mut m = CountModel::new(v, CountConfig { order: 1, summary_len: 16, alpha: 0.1 }).unwrap();
        m.add_pair(&[], &[X, Y]);
        m
    }

    #[test]
    fn smoothing_formula() {
        let v = 20;
        let m = single_pair(v);
        let p = m.token_logprob(&[], &[X], Y).exp();
        assert!((p - 1.1 / (1.0 + 0.1 * v as f64)).abs() < 1e-12);
        let floor = m.token_logprob(&[], &[X], 3).exp();
        assert!((floor - 0.1 / (1.0 + 0.1 * v as f64)).abs() < 1e-12);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let m = single_pair(20);
        for lp in m.next_logprobs(&[7], &[Y]) {
            assert!((lp.exp() - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_and_token_paths_agree_bitwise() {
        let mut m = CountModel::new(30, CountConfig::default()).unwrap();
        m.add_pair(&[1, 2, 3], &[16, 17, 18, 16, 17, 19]);
        m.add_pair(&[1, 2, 4], &[16, 17, 20]);
        let target = [16, 17, 18, 16];
        for t in 0..target.len() {
            let v = m.next_logprobs(&[1, 2, 3], &target[..t]);
            let sum: f64 = v.iter().map(|x| x.exp()).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            for tok in 0..30 {
                assert_eq!(v[tok as usize].to_bits(), m.token_logprob(&[1, 2, 3], &target[..t], tok).to_bits());
            }
        }
    }

    #[test]
    fn conditioning_is_summarized() {
        let cfg = CountConfig { order: 2, summary_len: 2, alpha: 0.1 };
        let m = CountModel::new(10, cfg).unwrap();
        assert_eq!(m.key(&[1, 2, 3], &[4, 5, 6]), vec![2, 3, SEP, 5, 6]);
        assert_eq!(m.key(&[], &[]), vec![SEP]);
    }

    #[test]
    fn epochs_multiply_exposures() {
        let pairs = vec![TrainingPair { conditioning: vec![1].into(), target: vec![2, 3].into() }];
        let mut m = CountModel::new(10, CountConfig::default()).unwrap();
        m.accumulate_epochs(&pairs, &TrainingConfig::new(Role::Direct).with_epochs(3));
        assert_eq!(m.counts(&[1], &[2], 3), (3, 3));
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(CountModel::new(10, CountConfig { alpha: 0.0, ..Default::default() }).is_err());
    }
}
