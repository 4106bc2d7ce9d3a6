use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelError, Role, TrainingConfig};
use crate::corpus::{act_response_tokens, belief_tokens, context_tokens, DialogueExample, TokenSequence, Vocab};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub conditioning: TokenSequence,
    pub target: TokenSequence,
}

/// Untruncated (conditioning, target) pairs for `role`:
///
/// * direct: `[c]..[/c]` to `[b]..[/b] [db]..[/db] [a]..[/a] [r]..[/r]`
/// * channel: `[a]..[/a] [r]..[/r]` to `[c]..[/c] [b]..[/b]`
/// * source: empty to `[a]..[/a] [r]..[/r]`
///
/// Channel truncation is applied per epoch by [`epoch_pairs`].
pub fn make_training_pairs(
    examples: &[DialogueExample],
    vocab: &Vocab,
    role: Role,
) -> Result<Vec<TrainingPair>, ModelError> {
    examples
        .iter()
        .map(|ex| {
            let pair = match role {
                Role::Direct => TrainingPair {
                    conditioning: vocab.encode(&context_tokens(&ex.context)?),
                    target: vocab.encode(&crate::corpus::target_tokens(ex)),
                },
                Role::Channel => {
                    let mut target = context_tokens(&ex.context)?;
                    target.extend(belief_tokens(&ex.belief));
                    TrainingPair {
                        conditioning: vocab.encode(&act_response_tokens(&ex.acts, &ex.response_delex)),
                        target: vocab.encode(&target),
                    }
                }
                Role::Source => TrainingPair {
                    conditioning: TokenSequence::new(),
                    target: vocab.encode(&act_response_tokens(&ex.acts, &ex.response_delex)),
                },
            };
            Ok(pair)
        })
        .collect()
}

/// Draws channel truncation lengths uniformly from `1..=len`. Each epoch
/// gets its own ChaCha stream under the training seed.
pub struct TruncationSampler {
    rng: ChaCha8Rng,
}

impl TruncationSampler {
    pub fn new(seed: u64, epoch: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64);
        Self { rng }
    }

    pub fn sample(&mut self, len: usize) -> usize {
        if len == 0 {
            return 0;
        }
        self.rng.gen_range(1..=len)
    }
}

/// The pairs seen in `epoch`. For a channel config with truncation on, the
/// conditioning of every pair is cut to a freshly sampled prefix length.
pub fn epoch_pairs<'a>(pairs: &'a [TrainingPair], config: &TrainingConfig, epoch: usize) -> Cow<'a, [TrainingPair]> {
    if config.role != Role::Channel || !config.truncate_channel {
        return Cow::Borrowed(pairs);
    }
    let mut sampler = TruncationSampler::new(config.seed, epoch);
    Cow::Owned(
        pairs
            .iter()
            .map(|p| {
                let keep = sampler.sample(p.conditioning.len());
                TrainingPair { conditioning: p.conditioning[..keep].to_vec().into(), target: p.target.clone() }
            })
            .collect(),
    )
}
