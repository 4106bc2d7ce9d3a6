use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{BeliefState, Database, PlaceholderDict, SlotMap};

/// Placeholder tokens whose presence in a response provides a requested slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestableSlotSet(pub BTreeSet<String>);

impl RequestableSlotSet {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(items: I) -> Self {
        Self(items.into_iter().map(Into::into).collect())
    }

    /// Members missing from the placeholder dictionary.
    pub fn unknown_in(&self, dict: &PlaceholderDict) -> Vec<String> {
        let known: BTreeSet<&str> = dict.placeholders().collect();
        self.0.iter().filter(|p| !known.contains(p.as_str())).cloned().collect()
    }

    fn provided(&self, responses: &[Vec<String>]) -> BTreeSet<String> {
        responses
            .iter()
            .flatten()
            .filter(|t| self.0.contains(*t))
            .cloned()
            .collect()
    }
}

/// Records retrieved per domain, or the normalized constraints for domains
/// the database does not know.
fn retrieved(belief: &BeliefState, database: &Database, domain: &str) -> Result<Vec<usize>, SlotMap> {
    let empty = SlotMap::new();
    let constraints = belief.domains.get(domain).unwrap_or(&empty);
    database
        .matching(domain, constraints)
        .map_err(|_| belief.normalized().domains.get(domain).cloned().unwrap_or_default())
}

/// Dialogue-level inform. Vacuously true when no decoded response mentions
/// a name placeholder; otherwise true iff, for every domain constrained by
/// either final belief, both beliefs retrieve the same record set.
pub fn inform(
    decoded_belief: &BeliefState,
    gt_belief: &BeliefState,
    decoded_responses: &[Vec<String>],
    database: &Database,
    name_placeholders: &[String],
) -> bool {
    let offered = decoded_responses.iter().flatten().any(|t| name_placeholders.contains(t));
    if !offered {
        return true;
    }
    let domains: BTreeSet<&str> = [decoded_belief, gt_belief]
        .iter()
        .flat_map(|b| b.domains.iter().filter(|(_, s)| !s.is_empty()).map(|(d, _)| d.as_str()))
        .collect();
    domains
        .into_iter()
        .all(|d| retrieved(decoded_belief, database, d) == retrieved(gt_belief, database, d))
}

/// Dialogue-level success: the requestable placeholders across decoded
/// responses cover those of the ground truth (or equal them when `strict`).
pub fn success(
    decoded_responses: &[Vec<String>],
    gt_responses: &[Vec<String>],
    requestables: &RequestableSlotSet,
    strict: bool,
) -> bool {
    let got = requestables.provided(decoded_responses);
    let want = requestables.provided(gt_responses);
    if strict {
        got == want
    } else {
        got.is_superset(&want)
    }
}
