//! Evaluation: task metrics (inform, success), BLEU-4, TER, the combined
//! score, response statistics and significance tests.
//!
//! Everything here works on delexicalized responses.

mod analysis;
mod bleu;
mod significance;
mod task;
mod ter;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{avg_length, has_repetition_loop, repetition_rate, zipf_from_frequencies, zipf_score, RepetitionConfig};
pub use bleu::{bleu4, sentence_bleu, BleuStats, MAX_ORDER};
pub use significance::{
    paired_permutation_test, permutation_test_bleu, t_test, PermutationTest, TTest, MIN_PERMUTATIONS,
};
pub use task::{inform, success, RequestableSlotSet};
pub use ter::{corpus_ter, edit_distance, ter, ter_edits, MAX_SHIFT_LEN};

use crate::corpus::{BeliefState, Database};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty reference")]
    EmptyReference,
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("statistics: {0}")]
    Stats(String),
    #[error("turn lists differ at dialogue {0:?}")]
    Unpaired(String),
}

/// (inform + success) / 2 + BLEU.
pub fn combined(inform_rate: f64, success_rate: f64, bleu: f64) -> f64 {
    (inform_rate + success_rate) / 2.0 + bleu
}

/// One decoded turn next to its annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTurn {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub decoded_belief: BeliefState,
    pub gt_belief: BeliefState,
    pub decoded_response: Vec<String>,
    pub gt_response: Vec<String>,
    #[serde(default)]
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Placeholders that count as offering an entity (gate the inform check).
    pub name_placeholders: Vec<String>,
    pub requestables: RequestableSlotSet,
    pub repetition: RepetitionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueScore {
    pub dialogue_id: String,
    pub turns: usize,
    pub inform: bool,
    pub success: bool,
    pub success_strict: bool,
    /// Corpus BLEU over this dialogue's turns.
    pub bleu: f64,
    /// TER over this dialogue's turns.
    pub ter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dialogues: usize,
    pub turns: usize,
    pub inform_rate: f64,
    pub success_rate: f64,
    /// Success under strict equality of requestable sets.
    pub success_strict_rate: f64,
    pub bleu: f64,
    pub ter: f64,
    pub combined: f64,
    pub avg_len: f64,
    pub zipf: f64,
    pub repetition_rate: f64,
    pub flagged_turns: usize,
    pub p_values: BTreeMap<String, f64>,
    pub per_dialogue: Vec<DialogueScore>,
}

/// Turns grouped by dialogue id, each group sorted by turn index; groups in
/// id order.
fn group(turns: &[EvalTurn]) -> BTreeMap<&str, Vec<&EvalTurn>> {
    let mut groups: BTreeMap<&str, Vec<&EvalTurn>> = BTreeMap::new();
    for t in turns {
        groups.entry(&t.dialogue_id).or_default().push(t);
    }
    for g in groups.values_mut() {
        g.sort_by_key(|t| t.turn_index);
    }
    groups
}

fn score_dialogue(
    id: &str,
    turns: &[&EvalTurn],
    database: &Database,
    options: &MetricOptions,
) -> Result<DialogueScore, MetricError> {
    let decoded: Vec<Vec<String>> = turns.iter().map(|t| t.decoded_response.clone()).collect();
    let gt: Vec<Vec<String>> = turns.iter().map(|t| t.gt_response.clone()).collect();
    let last = turns.last().ok_or(MetricError::Empty("dialogue"))?;
    Ok(DialogueScore {
        dialogue_id: id.to_string(),
        turns: turns.len(),
        inform: inform(&last.decoded_belief, &last.gt_belief, &decoded, database, &options.name_placeholders),
        success: success(&decoded, &gt, &options.requestables, false),
        success_strict: success(&decoded, &gt, &options.requestables, true),
        bleu: bleu4(&decoded, &gt)?,
        ter: corpus_ter(&decoded, &gt)?,
    })
}

fn rate(scores: &[DialogueScore], f: impl Fn(&DialogueScore) -> bool) -> f64 {
    100.0 * scores.iter().filter(|s| f(s)).count() as f64 / scores.len() as f64
}

/// Scores a decoded corpus. Inform and success are dialogue-level (final
/// turn belief, all turns' responses); BLEU and TER are corpus-level over
/// turns taken in (dialogue id, turn index) order.
pub fn evaluate(turns: &[EvalTurn], database: &Database, options: &MetricOptions) -> Result<EvalReport, MetricError> {
    if turns.is_empty() {
        return Err(MetricError::Empty("evaluation set"));
    }
    let groups = group(turns);
    let per_dialogue = groups
        .iter()
        .map(|(id, ts)| score_dialogue(id, ts, database, options))
        .collect::<Result<Vec<_>, _>>()?;
    let ordered: Vec<&EvalTurn> = groups.values().flatten().copied().collect();
    let hyps: Vec<Vec<String>> = ordered.iter().map(|t| t.decoded_response.clone()).collect();
    let refs: Vec<Vec<String>> = ordered.iter().map(|t| t.gt_response.clone()).collect();
    let inform_rate = rate(&per_dialogue, |s| s.inform);
    let success_rate = rate(&per_dialogue, |s| s.success);
    let bleu = bleu4(&hyps, &refs)?;
    Ok(EvalReport {
        dialogues: per_dialogue.len(),
        turns: turns.len(),
        inform_rate,
        success_rate,
        success_strict_rate: rate(&per_dialogue, |s| s.success_strict),
        bleu,
        ter: corpus_ter(&hyps, &refs)?,
        combined: combined(inform_rate, success_rate, bleu),
        avg_len: avg_length(&hyps),
        zipf: zipf_score(&hyps),
        repetition_rate: repetition_rate(&hyps, &options.repetition),
        flagged_turns: turns.iter().filter(|t| t.flagged).count(),
        p_values: BTreeMap::new(),
        per_dialogue,
    })
}

/// Significance of the difference between two systems decoded on the same
/// turns: Welch t-tests on per-dialogue inform, success and TER, and a
/// dialogue-level permutation test on corpus BLEU. Keys are the metric name
/// followed by the test.
pub fn compare(
    a: &[EvalTurn],
    b: &[EvalTurn],
    report_a: &EvalReport,
    report_b: &EvalReport,
    trials: usize,
    seed: u64,
) -> Result<BTreeMap<String, f64>, MetricError> {
    let (ga, gb) = (group(a), group(b));
    if ga.len() != gb.len() {
        return Err(MetricError::LengthMismatch { left: ga.len(), right: gb.len() });
    }
    let mut hyps_a = Vec::new();
    let mut hyps_b = Vec::new();
    let mut refs = Vec::new();
    let mut ids = Vec::new();
    for ((ia, ta), (ib, tb)) in ga.iter().zip(&gb) {
        if ia != ib || ta.len() != tb.len() || ta.iter().zip(tb).any(|(x, y)| x.turn_index != y.turn_index) {
            return Err(MetricError::Unpaired(ia.to_string()));
        }
        for (x, y) in ta.iter().zip(tb) {
            hyps_a.push(x.decoded_response.clone());
            hyps_b.push(y.decoded_response.clone());
            refs.push(x.gt_response.clone());
            ids.push(ia.to_string());
        }
    }
    let as_f = |r: &EvalReport, f: fn(&DialogueScore) -> f64| r.per_dialogue.iter().map(f).collect::<Vec<f64>>();
    let mut out = BTreeMap::new();
    let tests: [(&str, fn(&DialogueScore) -> f64); 3] = [
        ("inform_t_test", |s| f64::from(u8::from(s.inform))),
        ("success_t_test", |s| f64::from(u8::from(s.success))),
        ("ter_t_test", |s| s.ter),
    ];
    for (name, f) in tests {
        out.insert(name.to_string(), t_test(&as_f(report_a, f), &as_f(report_b, f))?.p_value);
    }
    let perm = permutation_test_bleu(&hyps_a, &hyps_b, &refs, Some(&ids), trials, seed)?;
    out.insert("bleu_permutation".to_string(), perm.p_value);
    Ok(out)
}
