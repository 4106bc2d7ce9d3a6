//! Sequence models for the three noisy channel roles and their training.
//!
//! Every model implements [`SequenceModel`]: a next-token distribution given
//! a conditioning sequence and a target prefix. The same contract serves the
//! direct model `p(B, A, R | C)`, the channel model `p(C, B | A, R)` and the
//! source model `p(A, R)` (whose conditioning is empty).

mod count;
mod file;
mod neural;
mod pairs;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, DialogueExample, TokenId, Vocab};

pub use count::{CountConfig, CountModel};
pub use file::{load_model, read_model, save_model, write_model, FORMAT_VERSION};
pub use neural::{grad_check, grad_check_sampled, GradCheckReport, NeuralConfig, TinyNeuralModel};
pub use pairs::{epoch_pairs, make_training_pairs, TrainingPair, TruncationSampler};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    NonFinite { epoch: usize, loss: f64 },
    #[error("vocabulary mismatch: model expects {expected}, got {found}")]
    VocabMismatch { expected: String, found: String },
    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Direct,
    Channel,
    Source,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Direct, Role::Channel, Role::Source];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Direct => "direct",
            Role::Channel => "channel",
            Role::Source => "source",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown role {s:?}")))
    }
}

/// Autoregressive scorer over a fixed vocabulary.
///
/// Implementations must return normalized distributions, and the provided
/// `token_logprob` must agree bit for bit with the corresponding entry of
/// `next_logprobs` so that incremental and from-scratch scores coincide.
pub trait SequenceModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Log-probabilities of every vocabulary token following `prefix`.
    fn next_logprobs(&self, conditioning: &[TokenId], prefix: &[TokenId]) -> Vec<f64>;

    fn token_logprob(&self, conditioning: &[TokenId], prefix: &[TokenId], token: TokenId) -> f64 {
        self.next_logprobs(conditioning, prefix)[token as usize]
    }

    /// Left-to-right sum of stepwise token log-probabilities.
    fn sequence_logprob(&self, conditioning: &[TokenId], target: &[TokenId]) -> f64 {
        let mut total = 0.0;
        for t in 0..target.len() {
            total += self.token_logprob(conditioning, &target[..t], target[t]);
        }
        total
    }
}

/// Incremental scoring handle: the log-probability of the tokens appended
/// after `start`, extended one token at a time without rescoring.
#[derive(Clone)]
pub struct Scorer<'a> {
    model: &'a dyn SequenceModel,
    conditioning: &'a [TokenId],
    prefix: Vec<TokenId>,
    start: usize,
    logprob: f64,
}

impl<'a> Scorer<'a> {
    /// `prefix` is given as conditioning context for the scored tokens but is
    /// not itself scored.
    pub fn new(model: &'a dyn SequenceModel, conditioning: &'a [TokenId], prefix: &[TokenId]) -> Self {
        Self { model, conditioning, prefix: prefix.to_vec(), start: prefix.len(), logprob: 0.0 }
    }

    pub fn logprob(&self) -> f64 {
        self.logprob
    }

    /// Tokens scored so far.
    pub fn scored(&self) -> &[TokenId] {
        &self.prefix[self.start..]
    }

    pub fn next_logprobs(&self) -> Vec<f64> {
        self.model.next_logprobs(self.conditioning, &self.prefix)
    }

    pub fn step_logprob(&self, token: TokenId) -> f64 {
        self.model.token_logprob(self.conditioning, &self.prefix, token)
    }

    pub fn extend(&self, token: TokenId) -> Self {
        let lp = self.step_logprob(token);
        self.extend_with(token, lp)
    }

    /// Extends with a step log-probability the caller already holds (taken
    /// from `next_logprobs` of this handle).
    pub fn extend_with(&self, token: TokenId, step_logprob: f64) -> Self {
        let mut prefix = Vec::with_capacity(self.prefix.len() + 1);
        prefix.extend_from_slice(&self.prefix);
        prefix.push(token);
        Self {
            model: self.model,
            conditioning: self.conditioning,
            prefix,
            start: self.start,
            logprob: self.logprob + step_logprob,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Count(CountModel),
    Neural(TinyNeuralModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Count(_) => "count",
            Model::Neural(_) => "neural",
        }
    }
}

impl SequenceModel for Model {
    fn vocab_size(&self) -> usize {
        match self {
            Model::Count(m) => m.vocab_size(),
            Model::Neural(m) => m.vocab_size(),
        }
    }

    fn next_logprobs(&self, conditioning: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        match self {
            Model::Count(m) => m.next_logprobs(conditioning, prefix),
            Model::Neural(m) => m.next_logprobs(conditioning, prefix),
        }
    }

    fn token_logprob(&self, conditioning: &[TokenId], prefix: &[TokenId], token: TokenId) -> f64 {
        match self {
            Model::Count(m) => m.token_logprob(conditioning, prefix, token),
            Model::Neural(m) => m.token_logprob(conditioning, prefix, token),
        }
    }
}

/// A model bound to the role it was trained for and the vocabulary it
/// was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub role: Role,
    pub vocab_hash: String,
    pub model: Model,
    /// Mean per-token training loss after each epoch (neural models only).
    pub loss_history: Vec<f64>,
    /// Free-form run metadata stored in the file header.
    pub provenance: BTreeMap<String, String>,
}

impl TrainedModel {
    pub fn check_vocab(&self, vocab: &Vocab) -> Result<(), ModelError> {
        let found = vocab.fingerprint();
        if found != self.vocab_hash {
            return Err(ModelError::VocabMismatch { expected: self.vocab_hash.clone(), found });
        }
        Ok(())
    }
}

impl SequenceModel for TrainedModel {
    fn vocab_size(&self) -> usize {
        self.model.vocab_size()
    }

    fn next_logprobs(&self, conditioning: &[TokenId], prefix: &[TokenId]) -> Vec<f64> {
        self.model.next_logprobs(conditioning, prefix)
    }

    fn token_logprob(&self, conditioning: &[TokenId], prefix: &[TokenId], token: TokenId) -> f64 {
        self.model.token_logprob(conditioning, prefix, token)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub role: Role,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub truncate_channel: bool,
}

impl TrainingConfig {
    pub fn new(role: Role) -> Self {
        Self {
            role,
            epochs: 1,
            learning_rate: 0.1,
            batch_size: 16,
            seed: 1,
            truncate_channel: role == Role::Channel,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn train_count_model(
    examples: &[DialogueExample],
    vocab: &Vocab,
    count: &CountConfig,
    config: &TrainingConfig,
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let pairs = make_training_pairs(examples, vocab, config.role)?;
    let mut model = CountModel::new(vocab.len(), count.clone())?;
    model.accumulate_epochs(&pairs, config);
    Ok(TrainedModel {
        role: config.role,
        vocab_hash: vocab.fingerprint(),
        model: Model::Count(model),
        loss_history: Vec::new(),
        provenance: BTreeMap::new(),
    })
}

pub fn train_neural_model(
    examples: &[DialogueExample],
    vocab: &Vocab,
    neural: &NeuralConfig,
    config: &TrainingConfig,
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let pairs = make_training_pairs(examples, vocab, config.role)?;
    let mut model = TinyNeuralModel::init(vocab.len(), neural.clone(), config.seed)?;
    let losses = model.train(&pairs, config)?;
    Ok(TrainedModel {
        role: config.role,
        vocab_hash: vocab.fingerprint(),
        model: Model::Neural(model),
        loss_history: losses,
        provenance: BTreeMap::new(),
    })
}

/// Continues training `model` on a further corpus: count models merge the
/// new counts, neural models resume gradient descent. The corpus must be
/// encoded with the vocabulary the model was trained on.
pub fn fine_tune(
    model: &TrainedModel,
    examples: &[DialogueExample],
    vocab: &Vocab,
    config: &TrainingConfig,
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    model.check_vocab(vocab)?;
    if config.role != model.role {
        return Err(ModelError::Config(format!(
            "cannot fine-tune a {} model with a {} config",
            model.role, config.role
        )));
    }
    let pairs = make_training_pairs(examples, vocab, config.role)?;
    let mut out = model.clone();
    match &mut out.model {
        Model::Count(m) => m.accumulate_epochs(&pairs, config),
        Model::Neural(m) => {
            if !pairs.is_empty() {
                let losses = m.train(&pairs, config)?;
                out.loss_history.extend(losses);
            }
        }
    }
    Ok(out)
}

/// Per-token perplexity of `model` over `pairs`.
pub fn perplexity(model: &dyn SequenceModel, pairs: &[TrainingPair]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for p in pairs {
        total += model.sequence_logprob(&p.conditioning, &p.target);
        n += p.target.len();
    }
    if n == 0 {
        return f64::NAN;
    }
    (-total / n as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Uniform(usize);

    impl SequenceModel for Uniform {
        fn vocab_size(&self) -> usize {
            self.0
        }
        fn next_logprobs(&self, _: &[TokenId], _: &[TokenId]) -> Vec<f64> {
            vec![-(self.0 as f64).ln(); self.0]
        }
    }

    #[test]
    fn scorer_matches_sequence_logprob() {
        let m = Uniform(5);
        let cond = [1, 2];
        let s = Scorer::new(&m, &cond, &[]).extend(3).extend(4).extend(0);
        assert_eq!(s.logprob(), m.sequence_logprob(&cond, &[3, 4, 0]));
        assert_eq!(s.scored(), &[3, 4, 0]);
    }

    #[test]
    fn uniform_perplexity_is_vocab_size() {
        let pairs = vec![TrainingPair { conditioning: vec![].into(), target: vec![1, 2, 3].into() }];
        assert!((perplexity(&Uniform(7), &pairs) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::new(Role::Direct).with_epochs(0).validate().is_err());
        assert!(TrainingConfig::new(Role::Direct).with_learning_rate(0.0).validate().is_err());
        assert!(TrainingConfig::new(Role::Channel).truncate_channel);
        assert!(!TrainingConfig::new(Role::Source).truncate_channel);
    }

    #[test]
    fn role_round_trips_through_str() {
        for r in Role::ALL {
            assert_eq!(r.as_str().parse::<Role>().unwrap(), r);
        }
        assert!("nope".parse::<Role>().is_err());
    }
}
