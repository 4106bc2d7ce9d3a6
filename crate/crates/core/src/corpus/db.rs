use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::types::{BeliefState, BookingStatus, DbResult, SlotMap};
use super::vocab::normalize_text;
use super::CorpusError;

pub type Record = IndexMap<String, String>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTable {
    #[serde(default)]
    pub bookable: bool,
    #[serde(default)]
    pub records: Vec<Record>,
}

/// Entity tables keyed by domain, as stored in the database file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Database {
    pub domains: IndexMap<String, DomainTable>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_record(&mut self, domain: &str, bookable: bool, record: Record) {
        let table = self.domains.entry(domain.to_string()).or_default();
        table.bookable |= bookable;
        table.records.push(record);
    }

    pub fn table(&self, domain: &str) -> Option<&DomainTable> {
        self.domains.get(domain)
    }

    /// Every record within a domain must share one slot schema.
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (domain, table) in &self.domains {
            if let Some(first) = table.records.first() {
                for (i, rec) in table.records.iter().enumerate().skip(1) {
                    let same = rec.len() == first.len() && first.keys().all(|k| rec.contains_key(k));
                    if !same {
                        return Err(CorpusError::Database(format!(
                            "record {i} of domain {domain:?} does not share the domain schema"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Indices of records satisfying every constraint on a slot the domain
    /// defines. Constraints on unknown slots (booking details) are ignored.
    /// Values compare after tokenization, which also case-folds.
    pub fn matching(&self, domain: &str, constraints: &SlotMap) -> Result<Vec<usize>, CorpusError> {
        let table = self
            .table(domain)
            .ok_or_else(|| CorpusError::UnknownDomain(domain.to_string()))?;
        let wanted: Vec<(&String, String)> = constraints
            .iter()
            .filter(|(slot, _)| table.records.first().is_some_and(|r| r.contains_key(*slot)))
            .map(|(slot, value)| (slot, normalize_text(value)))
            .collect();
        Ok(table
            .records
            .iter()
            .enumerate()
            .filter(|(_, rec)| {
                wanted
                    .iter()
                    .all(|(slot, value)| rec.get(*slot).is_some_and(|v| normalize_text(v) == *value))
            })
            .map(|(i, _)| i)
            .collect())
    }
}

/// Grounds `belief` in `domain`: counts records matching the domain's
/// constraints. Booking status defaults to not booked; annotated statuses are
/// applied by the caller.
pub fn query_db(belief: &BeliefState, database: &Database, domain: &str) -> Result<DbResult, CorpusError> {
    let empty = SlotMap::new();
    let constraints = belief.domains.get(domain).unwrap_or(&empty);
    let n = database.matching(domain, constraints)?.len();
    Ok(DbResult::new(domain, n as u64, BookingStatus::NotBooked))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn restaurants() -> Database {
        let mut db = Database::new();
        for (name, food) in [
            ("golden house", "chinese"),
            ("pizza hut", "italian"),
            ("curry garden", "indian"),
            ("la margherita", "Italian"),
            ("the eagle", "british"),
        ] {
            let rec: Record = [("name", name), ("food", food)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect();
            db.add_record("restaurant", true, rec);
        }
        db
    }

    #[test]
    fn counts_matches_case_folded() {
        let db = restaurants();
        let b = BeliefState::new().with("restaurant", "food", "italian");
        let r = query_db(&b, &db, "restaurant").unwrap();
        // linear scan oracle
        let expected = db.domains["restaurant"]
            .records
            .iter()
            .filter(|r| r["food"].to_lowercase() == "italian")
            .count();
        assert_eq!(r.match_count, expected as u64);
        assert_eq!(r.match_count, 2);
        assert_eq!(r.status, BookingStatus::NotBooked);
    }

    #[test]
    fn empty_belief_matches_everything() {
        let db = restaurants();
        let r = query_db(&BeliefState::new(), &db, "restaurant").unwrap();
        assert_eq!(r.match_count, 5);
    }

    #[test]
    fn unknown_domain_errors() {
        let db = restaurants();
        assert!(matches!(
            query_db(&BeliefState::new(), &db, "hotel"),
            Err(CorpusError::UnknownDomain(_))
        ));
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let mut db = restaurants();
        db.add_record("restaurant", true, [("name".to_string(), "x".to_string())].into_iter().collect());
        assert!(db.validate().is_err());
    }
}
