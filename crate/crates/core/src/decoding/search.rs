use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::select::select_candidates;
use super::{BeamConfig, DecodeError, DecodeFlag, ExpansionStrategy, Markers, ScoreWeights};
use crate::corpus::TokenId;
use crate::models::{Scorer, SequenceModel};

/// Refuse exhaustive search above this many candidate sequences.
pub const EXACT_LIMIT: u128 = 20_000_000;

/// The three sub-models of the noisy channel combination.
#[derive(Clone, Copy)]
pub struct NoisyModels<'a> {
    pub direct: &'a dyn SequenceModel,
    pub channel: &'a dyn SequenceModel,
    pub source: &'a dyn SequenceModel,
}

/// Token-level view of one turn.
#[derive(Debug, Clone, Copy)]
pub struct SearchInput<'a> {
    /// `[c] .. [/c]`, the direct model's conditioning.
    pub context: &'a [TokenId],
    /// `[b] .. [/b] [db] .. [/db]`, the direct model's target prefix.
    pub belief_db: &'a [TokenId],
    /// `[c] .. [/c] [b] .. [/b]`, what the channel model scores.
    pub channel_target: &'a [TokenId],
    pub markers: Markers,
}

/// A partial or complete act+response sequence with cached sub-scores.
/// Channel and source scores are `None` when the decoder never computed them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub direct_lp: f64,
    pub channel_lp: Option<f64>,
    pub source_lp: Option<f64>,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub direct: f64,
    pub channel: Option<f64>,
    pub source: Option<f64>,
    pub length: usize,
    pub weights: ScoreWeights,
    pub combined: f64,
}

impl ScoreBreakdown {
    pub fn new(direct: f64, channel: Option<f64>, source: Option<f64>, length: usize, weights: ScoreWeights) -> Self {
        let combined = combine(direct, channel, source, length, &weights);
        Self { direct, channel, source, length, weights, combined }
    }

    /// Recomputes the combined score from the stored terms.
    pub fn recompute(&self) -> f64 {
        combine(self.direct, self.channel, self.source, self.length, &self.weights)
    }
}

/// Fixed summation order: `((direct + λ1·channel) + λ2·source) + λ3·len`.
/// Missing terms contribute nothing.
fn combine(direct: f64, channel: Option<f64>, source: Option<f64>, length: usize, w: &ScoreWeights) -> f64 {
    let mut s = direct;
    if let Some(c) = channel {
        s += w.lambda1 * c;
    }
    if let Some(src) = source {
        s += w.lambda2 * src;
    }
    s + w.lambda3 * length as f64
}

pub fn combined_score(h: &Hypothesis, w: &ScoreWeights) -> f64 {
    combine(h.direct_lp, h.channel_lp, h.source_lp, h.tokens.len(), w)
}

impl Hypothesis {
    pub fn breakdown(&self, w: &ScoreWeights) -> ScoreBreakdown {
        ScoreBreakdown::new(self.direct_lp, self.channel_lp, self.source_lp, self.tokens.len(), *w)
    }
}

/// Higher score first; ties by lexicographic token order.
fn rank(a: (f64, &[TokenId]), b: (f64, &[TokenId])) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Search {
    /// Final beam in ranking order.
    pub beam: Vec<Hypothesis>,
    pub weights: ScoreWeights,
    /// Index of the selected hypothesis in `beam`.
    pub best: usize,
    pub flags: Vec<DecodeFlag>,
}

impl Search {
    pub fn best(&self) -> &Hypothesis {
        &self.beam[self.best]
    }

    fn select(beam: Vec<Hypothesis>, weights: ScoreWeights, close: TokenId) -> Self {
        match beam.iter().position(|h| h.tokens.last() == Some(&close)) {
            Some(best) => Self { beam, weights, best, flags: Vec::new() },
            None => Self { beam, weights, best: 0, flags: vec![DecodeFlag::Unterminated] },
        }
    }
}

struct Live<'a> {
    hyp: Hypothesis,
    direct: Scorer<'a>,
    source: Option<Scorer<'a>>,
}

fn is_finished(tokens: &[TokenId], close: TokenId, max_len: usize) -> bool {
    tokens.last() == Some(&close) || tokens.len() >= max_len
}

fn start_direct<'a>(direct: &'a dyn SequenceModel, input: &SearchInput<'a>) -> (Scorer<'a>, f64) {
    let s = Scorer::new(direct, input.context, input.belief_db);
    let lp = s.step_logprob(input.markers.act_open);
    (s.extend_with(input.markers.act_open, lp), lp)
}

/// Beam search pruned by the direct log-probability alone.
pub fn direct_search(
    direct: &dyn SequenceModel,
    input: &SearchInput<'_>,
    config: &BeamConfig,
) -> Result<Search, DecodeError> {
    config.validate(direct.vocab_size())?;
    let close = input.markers.response_close;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (scorer, _) = start_direct(direct, input);
    let first = vec![input.markers.act_open];
    let mut beam: Vec<(Vec<TokenId>, Scorer<'_>, bool)> =
        vec![(first.clone(), scorer, is_finished(&first, close, config.max_len))];

    while beam.iter().any(|(_, _, done)| !done) {
        let mut expanded = Vec::with_capacity(beam.len() * config.k1);
        for (tokens, scorer, done) in beam {
            if done {
                expanded.push((tokens, scorer, true));
                continue;
            }
            let dist = scorer.next_logprobs();
            for tok in select_candidates(&dist, config.k1, config.strategy, &mut rng)? {
                let mut t = tokens.clone();
                t.push(tok);
                let finished = is_finished(&t, close, config.max_len);
                expanded.push((t, scorer.extend_with(tok, dist[tok as usize]), finished));
            }
        }
        expanded.sort_by(|a, b| rank((a.1.logprob(), &a.0), (b.1.logprob(), &b.0)));
        expanded.truncate(config.k2);
        beam = expanded;
    }

    let hyps = beam
        .into_iter()
        .map(|(tokens, scorer, finished)| Hypothesis {
            tokens,
            direct_lp: scorer.logprob(),
            channel_lp: None,
            source_lp: None,
            finished,
        })
        .collect();
    Ok(Search::select(hyps, ScoreWeights::ZERO, close))
}

fn channel_lp(models: &NoisyModels<'_>, input: &SearchInput<'_>, tokens: &[TokenId]) -> f64 {
    models.channel.sequence_logprob(tokens, input.channel_target)
}

/// Scores a complete or partial act+response sequence from scratch with all
/// three sub-models.
pub fn rescore(models: &NoisyModels<'_>, input: &SearchInput<'_>, tokens: &[TokenId], w: &ScoreWeights) -> ScoreBreakdown {
    let mut prefix = input.belief_db.to_vec();
    let mut direct = 0.0;
    for &t in tokens {
        direct += models.direct.token_logprob(input.context, &prefix, t);
        prefix.push(t);
    }
    let channel = channel_lp(models, input, tokens);
    let source = models.source.sequence_logprob(&[], tokens);
    ScoreBreakdown::new(direct, Some(channel), Some(source), tokens.len(), *w)
}

/// Direct beam search followed by full-sequence rescoring of the final beam.
pub fn rerank_search(
    models: &NoisyModels<'_>,
    input: &SearchInput<'_>,
    w: &ScoreWeights,
    config: &BeamConfig,
) -> Result<Search, DecodeError> {
    w.validate()?;
    let direct = direct_search(models.direct, input, config)?;
    let mut beam: Vec<Hypothesis> = direct
        .beam
        .into_iter()
        .map(|mut h| {
            h.channel_lp = Some(channel_lp(models, input, &h.tokens));
            h.source_lp = Some(models.source.sequence_logprob(&[], &h.tokens));
            h
        })
        .collect();
    beam.sort_by(|a, b| rank((combined_score(a, w), &a.tokens), (combined_score(b, w), &b.tokens)));
    Ok(Search::select(beam, *w, input.markers.response_close))
}

/// Online noisy channel beam search: candidates come from the direct
/// model, pruning uses the combined score of the partial sequences.
pub fn online_search(
    models: &NoisyModels<'_>,
    input: &SearchInput<'_>,
    w: &ScoreWeights,
    config: &BeamConfig,
) -> Result<Search, DecodeError> {
    w.validate()?;
    config.validate(models.direct.vocab_size())?;
    let close = input.markers.response_close;
    let open = input.markers.act_open;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let (direct, direct_lp) = start_direct(models.direct, input);
    let source = Scorer::new(models.source, &[], &[]).extend(open);
    let tokens = vec![open];
    let mut beam = vec![Live {
        hyp: Hypothesis {
            channel_lp: Some(channel_lp(models, input, &tokens)),
            source_lp: Some(source.logprob()),
            direct_lp,
            finished: is_finished(&tokens, close, config.max_len),
            tokens,
        },
        direct,
        source: Some(source),
    }];

    while beam.iter().any(|l| !l.hyp.finished) {
        let mut expanded: Vec<Live<'_>> = Vec::with_capacity(beam.len() * config.k1);
        for live in beam {
            if live.hyp.finished {
                expanded.push(live);
                continue;
            }
            let dist = live.direct.next_logprobs();
            let src = live.source.as_ref().expect("online hypotheses carry a source scorer");
            for tok in select_candidates(&dist, config.k1, config.strategy, &mut rng)? {
                let mut tokens = live.hyp.tokens.clone();
                tokens.push(tok);
                let direct = live.direct.extend_with(tok, dist[tok as usize]);
                let source = src.extend(tok);
                let hyp = Hypothesis {
                    direct_lp: direct.logprob(),
                    channel_lp: Some(channel_lp(models, input, &tokens)),
                    source_lp: Some(source.logprob()),
                    finished: is_finished(&tokens, close, config.max_len),
                    tokens,
                };
                expanded.push(Live { hyp, direct, source: Some(source) });
            }
        }
        let mut keyed: Vec<(f64, Live<'_>)> = expanded.into_iter().map(|l| (combined_score(&l.hyp, w), l)).collect();
        keyed.sort_by(|a, b| rank((a.0, &a.1.hyp.tokens), (b.0, &b.1.hyp.tokens)));
        keyed.truncate(config.k2);
        beam = keyed.into_iter().map(|(_, l)| l).collect();
    }

    let hyps = beam.into_iter().map(|l| l.hyp).collect();
    Ok(Search::select(hyps, *w, close))
}

fn exact_count(vocab_size: usize, max_len: usize) -> u128 {
    // [a], then up to max_len - 2 tokens other than [/r], then [/r]
    let base = vocab_size.saturating_sub(1) as u128;
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for _ in 0..=max_len.saturating_sub(2) {
        total = total.saturating_add(term);
        term = term.saturating_mul(base);
    }
    total
}

/// Exhaustive argmax of the combined score over every sequence that starts
/// with `[a]`, ends with its only `[/r]` and has at most `max_len` tokens.
pub fn exact_search(
    models: &NoisyModels<'_>,
    input: &SearchInput<'_>,
    w: &ScoreWeights,
    max_len: usize,
) -> Result<Search, DecodeError> {
    w.validate()?;
    if max_len < 2 {
        return Err(DecodeError::Config("max length must be at least 2".into()));
    }
    let v = models.direct.vocab_size();
    let count = exact_count(v, max_len);
    if count > EXACT_LIMIT {
        return Err(DecodeError::TooLarge { count, limit: EXACT_LIMIT });
    }

    struct Walk<'m, 'a> {
        models: &'m NoisyModels<'a>,
        input: &'m SearchInput<'a>,
        w: &'m ScoreWeights,
        max_len: usize,
        vocab: TokenId,
        best: Option<(f64, Hypothesis)>,
    }

    impl<'m, 'a> Walk<'m, 'a> {
        fn visit(&mut self, tokens: &mut Vec<TokenId>, direct: &Scorer<'a>, source: &Scorer<'a>) {
            let close = self.input.markers.response_close;
            for tok in 0..self.vocab {
                if tok == close {
                    tokens.push(tok);
                    let hyp = Hypothesis {
                        direct_lp: direct.logprob() + direct.step_logprob(tok),
                        channel_lp: Some(channel_lp(self.models, self.input, tokens)),
                        source_lp: Some(source.logprob() + source.step_logprob(tok)),
                        finished: true,
                        tokens: tokens.clone(),
                    };
                    tokens.pop();
                    let score = combined_score(&hyp, self.w);
                    let better = match &self.best {
                        None => true,
                        Some((s, b)) => rank((score, &hyp.tokens), (*s, &b.tokens)) == Ordering::Less,
                    };
                    if better {
                        self.best = Some((score, hyp));
                    }
                } else if tokens.len() + 2 <= self.max_len {
                    tokens.push(tok);
                    let d = direct.extend(tok);
                    let s = source.extend(tok);
                    self.visit(tokens, &d, &s);
                    tokens.pop();
                }
            }
        }
    }

    let (direct, _) = start_direct(models.direct, input);
    let source = Scorer::new(models.source, &[], &[]).extend(input.markers.act_open);
    let mut walk = Walk { models, input, w, max_len, vocab: v as TokenId, best: None };
    walk.visit(&mut vec![input.markers.act_open], &direct, &source);
    let (_, best) = walk.best.expect("at least [a] [/r] is enumerated");
    Ok(Search { beam: vec![best], weights: *w, best: 0, flags: Vec::new() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSearch {
    /// `[b] .. [/b]` (or the best unterminated prefix).
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    pub terminated: bool,
}

/// Beam search for the belief span, pruned by direct log-probability with
/// top-k2 expansion per hypothesis.
pub fn belief_search(
    direct: &dyn SequenceModel,
    context: &[TokenId],
    markers: &Markers,
    config: &BeamConfig,
) -> Result<BeliefSearch, DecodeError> {
    config.validate(direct.vocab_size())?;
    let k = config.k2.min(direct.vocab_size());
    let close = markers.belief_close;
    let start = Scorer::new(direct, context, &[]).extend(markers.belief_open);
    let first = vec![markers.belief_open];
    let mut beam = vec![(first.clone(), start, is_finished(&first, close, config.belief_max_len))];
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    while beam.iter().any(|(_, _, done)| !done) {
        let mut expanded = Vec::with_capacity(beam.len() * k);
        for (tokens, scorer, done) in beam {
            if done {
                expanded.push((tokens, scorer, true));
                continue;
            }
            let dist = scorer.next_logprobs();
            for tok in select_candidates(&dist, k, ExpansionStrategy::TopKMax, &mut unused)? {
                let mut t = tokens.clone();
                t.push(tok);
                let finished = is_finished(&t, close, config.belief_max_len);
                expanded.push((t, scorer.extend_with(tok, dist[tok as usize]), finished));
            }
        }
        expanded.sort_by(|a, b| rank((a.1.logprob(), &a.0), (b.1.logprob(), &b.0)));
        expanded.truncate(config.k2);
        beam = expanded;
    }
    let pick = beam.iter().position(|(t, _, _)| t.last() == Some(&close));
    let (tokens, scorer, _) = beam.swap_remove(pick.unwrap_or(0));
    Ok(BeliefSearch { tokens, logprob: scorer.logprob(), terminated: pick.is_some() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combined_score_arithmetic() {
        let h = Hypothesis {
            tokens: vec![0; 10],
            direct_lp: -2.0,
            channel_lp: Some(-3.0),
            source_lp: Some(-1.5),
            finished: true,
        };
        let w = ScoreWeights::new(0.8, 1.0, 0.8);
        assert!((combined_score(&h, &w) - 2.1).abs() < 1e-12);
        assert_eq!(combined_score(&h, &ScoreWeights::ZERO), -2.0);
        let b = h.breakdown(&w);
        assert_eq!(b.combined, b.recompute());
    }

    #[test]
    fn ranking_breaks_ties_lexicographically() {
        assert_eq!(rank((1.0, &[3]), (1.0, &[2])), Ordering::Greater);
        assert_eq!(rank((2.0, &[3]), (1.0, &[2])), Ordering::Less);
    }

    #[test]
    fn exact_count_formula() {
        // V=4 (3 non-closing tokens), max_len 4: middles of length 0, 1, 2
        assert_eq!(exact_count(4, 4), 1 + 3 + 9);
        assert_eq!(exact_count(4, 2), 1);
    }
}
