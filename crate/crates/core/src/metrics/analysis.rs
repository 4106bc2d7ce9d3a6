use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Mean token count; 0 for an empty corpus.
pub fn avg_length(responses: &[Vec<String>]) -> f64 {
    if responses.is_empty() {
        return 0.0;
    }
    responses.iter().map(Vec::len).sum::<usize>() as f64 / responses.len() as f64
}

/// Negated least-squares slope of log frequency against log rank over the
/// corpus unigram distribution. Fewer than two distinct tokens give 0.
pub fn zipf_score(responses: &[Vec<String>]) -> f64 {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for r in responses {
        for tok in r {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut freqs: Vec<u64> = counts.into_values().collect();
    freqs.sort_unstable_by(|a, b| b.cmp(a));
    zipf_from_frequencies(&freqs)
}

/// Zipf score for frequencies already sorted by rank.
pub fn zipf_from_frequencies(freqs: &[u64]) -> f64 {
    if freqs.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = (1..=freqs.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = freqs.iter().map(|&f| (f as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    if slope == 0.0 {
        0.0
    } else {
        -slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionConfig {
    pub max_phrase_len: usize,
    pub min_repeats: usize,
}

impl Default for RepetitionConfig {
    fn default() -> Self {
        Self { max_phrase_len: 5, min_repeats: 4 }
    }
}

/// True if some phrase of `1..=max_phrase_len` tokens occurs at least
/// `min_repeats` times back to back.
pub fn has_repetition_loop(tokens: &[String], config: &RepetitionConfig) -> bool {
    for len in 1..=config.max_phrase_len {
        let span = len * config.min_repeats;
        if span > tokens.len() {
            break;
        }
        for start in 0..=tokens.len() - span {
            let phrase = &tokens[start..start + len];
            if (1..config.min_repeats).all(|k| &tokens[start + k * len..start + (k + 1) * len] == phrase) {
                return true;
            }
        }
    }
    false
}

/// Percentage of responses containing a repetition loop.
pub fn repetition_rate(responses: &[Vec<String>], config: &RepetitionConfig) -> f64 {
    if responses.is_empty() {
        return 0.0;
    }
    let hits = responses.iter().filter(|r| has_repetition_loop(r, config)).count();
    100.0 * hits as f64 / responses.len() as f64
}
