use std::collections::HashMap;

use super::MetricError;

pub const MAX_ORDER: usize = 4;

/// Clipped n-gram matches and totals for one hypothesis/reference pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn new(hyp: &[String], reference: &[String]) -> Self {
        let mut s = Self { hyp_len: hyp.len() as u64, ref_len: reference.len() as u64, ..Self::default() };
        for n in 1..=MAX_ORDER {
            if hyp.len() < n {
                continue;
            }
            let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
            for g in reference.windows(n) {
                *ref_counts.entry(g).or_default() += 1;
            }
            let mut hyp_counts: HashMap<&[String], u64> = HashMap::new();
            for g in hyp.windows(n) {
                *hyp_counts.entry(g).or_default() += 1;
            }
            s.totals[n - 1] = (hyp.len() + 1 - n) as u64;
            s.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    pub fn add(&mut self, other: &Self) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Unsmoothed BLEU-4 on a 0-100 scale.
    pub fn score(&self) -> f64 {
        if self.matches.contains(&0) {
            return 0.0;
        }
        let log_prec: f64 = (0..MAX_ORDER)
            .map(|n| (self.matches[n] as f64 / self.totals[n] as f64).ln())
            .sum::<f64>()
            / MAX_ORDER as f64;
        100.0 * brevity_penalty(self.hyp_len, self.ref_len) * log_prec.exp()
    }
}

fn brevity_penalty(hyp_len: u64, ref_len: u64) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn check_pairs(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<(), MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch { left: hyps.len(), right: refs.len() });
    }
    if hyps.is_empty() {
        return Err(MetricError::Empty("corpus"));
    }
    Ok(())
}

/// Corpus BLEU-4 with one reference per hypothesis: clipped n-gram
/// precisions summed over the corpus, geometric mean, brevity penalty, no
/// smoothing.
pub fn bleu4(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<f64, MetricError> {
    check_pairs(hyps, refs)?;
    let mut total = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        total.add(&BleuStats::new(h, r));
    }
    Ok(total.score())
}

/// Single-pair BLEU-4 for case studies, with add-one smoothing of the
/// n ≥ 2 precisions so that short sentences do not collapse to zero.
pub fn sentence_bleu(hyp: &[String], reference: &[String]) -> f64 {
    let s = BleuStats::new(hyp, reference);
    if s.matches[0] == 0 {
        return 0.0;
    }
    let mut log_prec = (s.matches[0] as f64 / s.totals[0] as f64).ln();
    for n in 1..MAX_ORDER {
        log_prec += ((s.matches[n] + 1) as f64 / (s.totals[n] + 1) as f64).ln();
    }
    100.0 * brevity_penalty(s.hyp_len, s.ref_len) * (log_prec / MAX_ORDER as f64).exp()
}
