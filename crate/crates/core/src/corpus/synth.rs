//! Deterministic synthetic task-oriented corpora.
//!
//! Dialogues follow a fixed skeleton: the user states constraints, the system
//! offers an entity (or reports no match), the user may ask for entity
//! attributes, and the dialogue closes. A configurable fraction of dialogues
//! are "generic traps": the first answer to an attribute request is a short
//! generic reply, the user repeats the request and only then gets the
//! informative answer. That makes the generic reply frequent across request
//! contexts while the annotated follow-up stays informative.

use indexmap::IndexMap;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::db::{query_db, Database, Record};
use super::delex::{delexicalize, PlaceholderDict, COUNT_SLOT};
use super::types::{BeliefState, DialogueActSet, DialogueExample, Utterance};
use super::vocab::tokenize;
use super::CorpusError;

/// Domain name used for domain-independent acts (generic replies, goodbyes).
pub const GENERAL_DOMAIN: &str = "general";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformableSlot {
    pub values: Vec<String>,
    /// User phrase with a `{value}` hole, e.g. `serving {value} food`.
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub noun: String,
    #[serde(default)]
    pub bookable: bool,
    pub max_constraints: usize,
    pub informable: IndexMap<String, InformableSlot>,
    /// Record-only attributes and their value inventories.
    pub attributes: IndexMap<String, Vec<String>>,
    /// Requestable attribute to the phrase used when asking for it.
    pub requestable: IndexMap<String, String>,
    /// Attribute naming the offered entity.
    pub name_slot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Templates {
    pub user_open: Vec<String>,
    pub system_choice: String,
    pub system_offer: String,
    pub system_nooffer: String,
    pub user_request: Vec<String>,
    pub user_repeat: String,
    pub system_inform: String,
    pub user_bye: String,
    pub system_bye: String,
    pub generic: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            user_open: vec!["i am looking for a {noun}".into()],
            system_choice: "there are {count} of those .".into(),
            system_offer: "{name} is a {noun} {details} .".into(),
            system_nooffer: "sorry , there is no {noun} {details} .".into(),
            user_request: vec!["can you give me the {requests} ?".into(), "what is the {requests} ?".into()],
            user_repeat: "i need the {requests} please .".into(),
            system_inform: "the {attribute} is {value}".into(),
            user_bye: "thank you , goodbye .".into(),
            system_bye: "you are welcome . goodbye .".into(),
            generic: "is there anything else ?".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub dialogues: usize,
    pub records_per_domain: usize,
    /// Fraction of dialogues carrying the generic-trap exchange.
    pub trap_rate: f64,
    /// Probability that the user asks for attributes after an offer.
    pub request_rate: f64,
    pub domains: Vec<DomainSpec>,
    pub templates: Templates,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        let restaurant = DomainSpec {
            name: "restaurant".into(),
            noun: "restaurant".into(),
            bookable: true,
            max_constraints: 2,
            informable: [
                ("food", &["italian", "chinese", "indian"][..], "serving {value} food"),
                ("area", &["north", "south", "centre"][..], "in the {value}"),
                ("pricerange", &["cheap", "expensive"][..], "in the {value} price range"),
            ]
            .into_iter()
            .map(|(s, v, p)| (s.to_string(), InformableSlot { values: strings(v), phrase: p.into() }))
            .collect(),
            attributes: [
                (
                    "name",
                    &["golden house", "pizza hut", "curry garden", "the eagle", "la margherita", "royal spice"][..],
                ),
                ("phone", &["01223 356555", "01223 312112", "01223 461661", "01223 227330"][..]),
                ("postcode", &["cb2 1uf", "cb1 2qa", "cb4 3ax", "cb3 0ah"][..]),
            ]
            .into_iter()
            .map(|(s, v)| (s.to_string(), strings(v)))
            .collect(),
            requestable: [("phone", "phone number"), ("postcode", "postcode")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            name_slot: "name".into(),
        };
        let train = DomainSpec {
            name: "train".into(),
            noun: "train".into(),
            bookable: true,
            max_constraints: 2,
            informable: [
                ("destination", &["cambridge", "london", "ely"][..], "to {value}"),
                ("day", &["monday", "tuesday", "friday"][..], "on {value}"),
            ]
            .into_iter()
            .map(|(s, v, p)| (s.to_string(), InformableSlot { values: strings(v), phrase: p.into() }))
            .collect(),
            attributes: [
                ("trainid", &["tr1234", "tr5678", "tr4321", "tr8765", "tr2468"][..]),
                ("leave", &["09:15", "11:30", "14:45", "17:00"][..]),
                ("price", &["10.10 pounds", "23.60 pounds", "4.40 pounds"][..]),
            ]
            .into_iter()
            .map(|(s, v)| (s.to_string(), strings(v)))
            .collect(),
            requestable: [("leave", "departure time"), ("price", "price")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            name_slot: "trainid".into(),
        };
        Self {
            dialogues: 200,
            records_per_domain: 12,
            trap_rate: 0.0,
            request_rate: 0.8,
            domains: vec![restaurant, train],
            templates: Templates::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::Config(m));
        if self.domains.is_empty() {
            return bad("no domains declared".into());
        }
        if !(0.0..=1.0).contains(&self.trap_rate) || !(0.0..=1.0).contains(&self.request_rate) {
            return bad("rates must lie in [0, 1]".into());
        }
        if self.templates.user_open.is_empty() || self.templates.user_request.is_empty() {
            return bad("user templates must be non-empty".into());
        }
        for d in &self.domains {
            if d.informable.is_empty() || d.max_constraints == 0 {
                return bad(format!("domain {:?} needs at least one informable slot", d.name));
            }
            for (slot, spec) in &d.informable {
                if spec.values.is_empty() {
                    return bad(format!("empty value inventory for {}.{}", d.name, slot));
                }
            }
            for (slot, values) in &d.attributes {
                if values.is_empty() {
                    return bad(format!("empty value inventory for {}.{}", d.name, slot));
                }
            }
            if !d.attributes.contains_key(&d.name_slot) {
                return bad(format!("name slot {:?} is not an attribute of {:?}", d.name_slot, d.name));
            }
            if let Some(r) = d.requestable.keys().find(|r| !d.attributes.contains_key(*r)) {
                return bad(format!("requestable {r:?} is not an attribute of {:?}", d.name));
            }
        }
        Ok(())
    }

    /// Placeholder dictionary matching the generated corpus: informable slots
    /// map to `[value_<slot>]`, attributes to `[<domain>_<slot>]`.
    pub fn placeholder_dict(&self) -> PlaceholderDict {
        let mut dict = PlaceholderDict::new().with(COUNT_SLOT, "[value_count]");
        for d in &self.domains {
            for slot in d.informable.keys() {
                dict.0.insert(slot.clone(), format!("[value_{slot}]"));
            }
            for slot in d.attributes.keys() {
                dict.0.insert(format!("{}-{}", d.name, slot), format!("[{}_{}]", d.name, slot));
            }
        }
        dict
    }

    /// Placeholders naming an offered entity (the inform-check trigger).
    pub fn name_placeholders(&self) -> Vec<String> {
        self.domains.iter().map(|d| format!("[{}_{}]", d.name, d.name_slot)).collect()
    }

    pub fn requestable_placeholders(&self) -> Vec<String> {
        self.domains
            .iter()
            .flat_map(|d| d.requestable.keys().map(move |s| format!("[{}_{}]", d.name, s)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub examples: Vec<DialogueExample>,
    pub database: Database,
    pub dict: PlaceholderDict,
}

fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in pairs {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

fn join_and(parts: &[String]) -> String {
    parts.join(" and ")
}

struct SystemTurn {
    acts: DialogueActSet,
    text: String,
    entity: Option<Record>,
}

/// Generates `config.dialogues` dialogues and their database. Pure in
/// `(config, seed)`.
pub fn generate_synthetic_corpus(config: &SynthConfig, seed: u64) -> Result<SyntheticCorpus, CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dict = config.placeholder_dict();
    let t = &config.templates;

    let mut database = Database::new();
    for d in &config.domains {
        for _ in 0..config.records_per_domain {
            let mut rec = Record::new();
            for (slot, spec) in &d.informable {
                rec.insert(slot.clone(), spec.values[rng.gen_range(0..spec.values.len())].clone());
            }
            for (slot, values) in &d.attributes {
                rec.insert(slot.clone(), values[rng.gen_range(0..values.len())].clone());
            }
            database.add_record(&d.name, d.bookable, rec);
        }
    }

    let n_traps = (config.trap_rate * config.dialogues as f64).round() as usize;
    let mut is_trap = vec![false; config.dialogues];
    if n_traps > 0 {
        for i in sample(&mut rng, config.dialogues, n_traps.min(config.dialogues)).into_iter() {
            is_trap[i] = true;
        }
    }

    let mut examples = Vec::new();
    for (dialogue, &trap) in is_trap.iter().enumerate() {
        let domain = &config.domains[rng.gen_range(0..config.domains.len())];
        // trap dialogues need an offer to ask about
        let mut attempts = 0;
        let (belief, details, db) = loop {
            let k = rng.gen_range(1..=domain.max_constraints.min(domain.informable.len()));
            let mut picked = sample(&mut rng, domain.informable.len(), k).into_vec();
            picked.sort_unstable();
            let mut belief = BeliefState::new();
            let mut details = Vec::new();
            for i in picked {
                let (slot, spec) = domain.informable.get_index(i).expect("index in range");
                let value = &spec.values[rng.gen_range(0..spec.values.len())];
                belief.insert(&domain.name, slot, value);
                details.push(fill(&spec.phrase, &[("value", value)]));
            }
            let db = query_db(&belief, &database, &domain.name)?;
            attempts += 1;
            if !trap || db.match_count > 0 {
                break (belief, join_and(&details), db);
            }
            if attempts >= 1000 {
                return Err(CorpusError::Config(format!(
                    "cannot place a generic trap in domain {:?}: no constraint set matches a record",
                    domain.name
                )));
            }
        };
        let opener = &t.user_open[rng.gen_range(0..t.user_open.len())];

        let mut turns: Vec<(String, SystemTurn)> = Vec::new();
        let user_first = format!("{} {} .", fill(opener, &[("noun", &domain.noun)]), details);
        let bye = SystemTurn {
            acts: DialogueActSet::new(GENERAL_DOMAIN, &[("bye", None)]),
            text: t.system_bye.clone(),
            entity: None,
        };
        if db.match_count == 0 {
            let acts = belief.domains[&domain.name]
                .keys()
                .map(|s| (String::from("nooffer"), Some(s.clone())))
                .collect::<Vec<_>>();
            let acts = DialogueActSet {
                domain: domain.name.clone(),
                acts: acts
                    .into_iter()
                    .map(|(a, s)| super::types::DialogueAct { act: a, slot: s })
                    .collect(),
            };
            let text = fill(&t.system_nooffer, &[("noun", &domain.noun), ("details", &details)]);
            turns.push((user_first, SystemTurn { acts, text, entity: None }));
            turns.push((t.user_bye.clone(), bye));
        } else {
            let constraints = &belief.domains[&domain.name];
            let idx = database.matching(&domain.name, constraints)?;
            let entity = database.domains[&domain.name].records[idx[0]].clone();
            let name = entity[&domain.name_slot].clone();
            let mut acts = Vec::new();
            let mut text = String::new();
            if db.match_count > 1 {
                acts.push(("inform".to_string(), Some(COUNT_SLOT.to_string())));
                text.push_str(&fill(&t.system_choice, &[("count", &db.match_count.to_string())]));
                text.push(' ');
            }
            acts.push(("recommend".to_string(), Some(domain.name_slot.clone())));
            for slot in constraints.keys() {
                acts.push(("inform".to_string(), Some(slot.clone())));
            }
            text.push_str(&fill(
                &t.system_offer,
                &[("name", &name), ("noun", &domain.noun), ("details", &details)],
            ));
            let offer = SystemTurn {
                acts: DialogueActSet {
                    domain: domain.name.clone(),
                    acts: acts
                        .into_iter()
                        .map(|(a, s)| super::types::DialogueAct { act: a, slot: s })
                        .collect(),
                },
                text,
                entity: Some(entity.clone()),
            };
            turns.push((user_first, offer));

            let asks = !domain.requestable.is_empty() && (trap || rng.gen_bool(config.request_rate));
            if asks {
                let n = rng.gen_range(1..=domain.requestable.len().min(2));
                let mut which = sample(&mut rng, domain.requestable.len(), n).into_vec();
                which.sort_unstable();
                let requested: Vec<(&String, &String)> =
                    which.iter().map(|&i| domain.requestable.get_index(i).expect("in range")).collect();
                let phrases: Vec<String> = requested.iter().map(|(_, p)| p.to_string()).collect();
                let request_text = fill(
                    &t.user_request[rng.gen_range(0..t.user_request.len())],
                    &[("requests", &join_and(&phrases))],
                );
                let informs: Vec<String> = requested
                    .iter()
                    .map(|(slot, phrase)| fill(&t.system_inform, &[("attribute", phrase), ("value", &entity[*slot])]))
                    .collect();
                let answer = SystemTurn {
                    acts: DialogueActSet {
                        domain: domain.name.clone(),
                        acts: requested
                            .iter()
                            .map(|(slot, _)| super::types::DialogueAct {
                                act: "inform".into(),
                                slot: Some((*slot).clone()),
                            })
                            .collect(),
                    },
                    text: format!("{} .", join_and(&informs)),
                    entity: Some(entity.clone()),
                };
                if trap {
                    let generic = SystemTurn {
                        acts: DialogueActSet::new(GENERAL_DOMAIN, &[("reqmore", None)]),
                        text: t.generic.clone(),
                        entity: None,
                    };
                    turns.push((request_text, generic));
                    turns.push((fill(&t.user_repeat, &[("requests", &join_and(&phrases))]), answer));
                } else {
                    turns.push((request_text, answer));
                }
            }
            turns.push((t.user_bye.clone(), bye));
        }

        let mut context: Vec<Utterance> = Vec::new();
        for (turn_index, (user, system)) in turns.into_iter().enumerate() {
            context.push(Utterance::user(user));
            let response_lex = tokenize(&system.text);
            let (response_delex, placeholders) =
                delexicalize(&response_lex, &belief, &db, system.entity.as_ref(), &dict);
            examples.push(DialogueExample {
                dialogue_id: format!("syn{dialogue:05}"),
                turn_index,
                context: context.clone(),
                belief: belief.normalized(),
                db: db.clone(),
                acts: system.acts,
                response_delex: response_delex.clone(),
                response_lex,
                placeholders,
            });
            context.push(Utterance::system(response_delex.join(" ")));
        }
    }
    Ok(SyntheticCorpus { examples, database, dict })
}

/// Token form of the configured generic reply.
pub fn generic_response(config: &SynthConfig) -> Vec<String> {
    tokenize(&config.templates.generic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_satisfy_invariants() {
        let c = generate_synthetic_corpus(&SynthConfig::default(), 3).unwrap();
        assert!(!c.examples.is_empty());
        for ex in &c.examples {
            ex.validate().unwrap();
        }
        c.database.validate().unwrap();
    }

    #[test]
    fn trap_rate_is_exact() {
        let cfg = SynthConfig { dialogues: 50, trap_rate: 0.2, request_rate: 1.0, ..Default::default() };
        let c = generate_synthetic_corpus(&cfg, 1).unwrap();
        let generic = generic_response(&cfg);
        let mut trapped: Vec<&str> = c
            .examples
            .iter()
            .filter(|e| e.response_delex == generic)
            .map(|e| e.dialogue_id.as_str())
            .collect();
        trapped.dedup();
        assert_eq!(trapped.len(), 10);
    }

    #[test]
    fn empty_inventory_is_rejected() {
        let mut cfg = SynthConfig::default();
        cfg.domains[0].informable[0].values.clear();
        assert!(matches!(generate_synthetic_corpus(&cfg, 1), Err(CorpusError::Config(_))));
    }

    #[test]
    fn dictionary_covers_generated_placeholders() {
        let cfg = SynthConfig::default();
        let c = generate_synthetic_corpus(&cfg, 9).unwrap();
        let known: Vec<&str> = c.dict.placeholders().collect();
        for ex in &c.examples {
            for p in ex.placeholders.keys() {
                assert!(known.contains(&p.as_str()), "{p}");
            }
        }
    }
}
