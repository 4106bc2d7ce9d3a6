use super::MetricError;

/// Longest block considered for a shift.
pub const MAX_SHIFT_LEN: usize = 10;

/// Word-level Levenshtein distance (insert, delete, substitute, each cost 1).
pub fn edit_distance(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn contains(haystack: &[String], needle: &[String]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Moves `hyp[start..start + len]` so that it begins at `dest` in the result.
fn shifted(hyp: &[String], start: usize, len: usize, dest: usize) -> Vec<String> {
    let mut rest: Vec<String> = Vec::with_capacity(hyp.len());
    rest.extend_from_slice(&hyp[..start]);
    rest.extend_from_slice(&hyp[start + len..]);
    let mut out = Vec::with_capacity(hyp.len());
    out.extend_from_slice(&rest[..dest]);
    out.extend_from_slice(&hyp[start..start + len]);
    out.extend_from_slice(&rest[dest..]);
    out
}

/// Number of edits: greedy block shifts (each costs 1, taken while the best
/// one lowers the total) plus the edit distance that remains.
///
/// Candidate blocks are hypothesis spans of up to [`MAX_SHIFT_LEN`] tokens that
/// occur in the reference and are not already in place; every destination
/// is tried and the largest reduction wins, ties to the earliest candidate.
pub fn ter_edits(hyp: &[String], reference: &[String]) -> usize {
    let mut cur = hyp.to_vec();
    let mut shifts = 0;
    let mut dist = edit_distance(&cur, reference);
    loop {
        let mut best: Option<(usize, Vec<String>)> = None;
        for start in 0..cur.len() {
            for len in 1..=MAX_SHIFT_LEN.min(cur.len() - start) {
                let block = &cur[start..start + len];
                if !contains(reference, block) {
                    break;
                }
                if reference.get(start..start + len) == Some(block) {
                    continue;
                }
                for dest in 0..=cur.len() - len {
                    if dest == start {
                        continue;
                    }
                    let cand = shifted(&cur, start, len, dest);
                    let d = edit_distance(&cand, reference);
                    if d + 1 < dist && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        best = Some((d, cand));
                    }
                }
            }
        }
        match best {
            Some((d, cand)) => {
                cur = cand;
                dist = d;
                shifts += 1;
            }
            None => return shifts + dist,
        }
    }
}

/// Translation edit rate of one pair: edits / reference length.
pub fn ter(hyp: &[String], reference: &[String]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    Ok(ter_edits(hyp, reference) as f64 / reference.len() as f64)
}

/// Corpus TER: total edits over total reference length.
pub fn corpus_ter(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<f64, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch { left: hyps.len(), right: refs.len() });
    }
    let mut edits = 0;
    let mut len = 0;
    for (h, r) in hyps.iter().zip(refs) {
        if r.is_empty() {
            return Err(MetricError::EmptyReference);
        }
        edits += ter_edits(h, r);
        len += r.len();
    }
    if len == 0 {
        return Err(MetricError::Empty("corpus"));
    }
    Ok(edits as f64 / len as f64)
}
