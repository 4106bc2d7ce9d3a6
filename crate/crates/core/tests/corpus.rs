//! Serialization goldens, corpus files and generator contracts.

mod common;

use common::*;
use ncdial::corpus::{
    belief_db_tokens, context_tokens, generate_synthetic_corpus, generic_response, load_corpus, query_db,
    read_corpus, save_corpus, serialize_context, split_target, target_tokens, write_corpus, CorpusError,
    SynthConfig, Utterance,
};

#[test]
fn boxed_example_serializes_line_by_line() {
    let ex = boxed_example();
    ex.validate().unwrap();
    assert_eq!(
        context_tokens(&ex.context).unwrap().join(" "),
        "[c] i am looking to [/u] what is your [/r] i'll be leaving [/u] [/c]"
    );
    let target = target_tokens(&ex).join(" ");
    assert_eq!(
        target,
        [
            "[b] [train] destination cambridge , day tuesday , arrive 12:30 , departure london [/b]",
            "[db] [train] match 1 , status not booked [/db]",
            "[a] [train] inform arrive , inform leave , offer reservation [/a]",
            "[r] there is a train that leaves at [value_time] and arrives at [value_time] . should i book it ? [/r]",
        ]
        .join(" ")
    );
}

#[test]
fn boxed_example_database_line_comes_from_the_query() {
    let ex = boxed_example();
    let db = query_db(&ex.belief.normalized(), &boxed_database(), "train").unwrap();
    assert_eq!(db, ex.db);
    let line = belief_db_tokens(&ex.belief, &db).join(" ");
    assert!(line.ends_with("[db] [train] match 1 , status not booked [/db]"), "{line}");
}

#[test]
fn minimal_context() {
    assert_eq!(context_tokens(&[Utterance::user("hi")]).unwrap().join(" "), "[c] hi [/u] [/c]");
    assert!(matches!(context_tokens(&[]), Err(CorpusError::Malformed(_))));
}

#[test]
fn three_turn_context_golden() {
    let corpus = fixture_corpus();
    let ex = corpus.examples.iter().find(|e| e.context.len() == 5).expect("fixture has a third turn");
    let vocab = vocab_for(&corpus.examples);
    let ids = serialize_context(ex, &vocab).unwrap();
    let text = vocab.decode(&ids).join(" ");
    check_golden("context_3turn.txt", &format!("{} #{}\n{text}\n", ex.dialogue_id, ex.turn_index));
}

#[test]
fn example_seven_target_golden() {
    let corpus = fixture_corpus();
    let ex = &corpus.examples[7];
    check_golden("target_example7.txt", &format!("{}\n", target_tokens(ex).join(" ")));
    let split = split_target(&target_tokens(ex)).unwrap();
    assert_eq!(split.belief.as_ref(), Some(&ex.belief));
    assert_eq!(split.acts, ex.acts);
    assert_eq!(split.response, ex.response_delex);
}

#[test]
fn corpus_files_round_trip() {
    let corpus = fixture_corpus();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    save_corpus(&corpus.examples, &path).unwrap();
    assert_eq!(load_corpus(&path).unwrap(), corpus.examples);
}

#[test]
fn missing_response_is_reported_with_its_line() {
    let corpus = fixture_corpus();
    let mut buf = Vec::new();
    write_corpus(&mut buf, &corpus.examples[..3]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut v: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
    v.as_object_mut().unwrap().remove("response_delex");
    lines[1] = v.to_string();
    match read_corpus(lines.join("\n").as_bytes()) {
        Err(CorpusError::Schema { line, message }) => {
            assert_eq!(line, 2);
            assert!(message.contains("response_delex"), "{message}");
        }
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn converted_multiwoz_dialogue_loads() {
    let examples = load_corpus(fixture_path("multiwoz_converted.jsonl")).unwrap();
    assert_eq!(examples.len(), 2);
    assert_eq!(examples[1].context.len(), 3);
    for ex in &examples {
        let t = target_tokens(ex);
        let split = split_target(&t).unwrap();
        assert_eq!(split.acts, ex.acts);
        assert_eq!(split.response, ex.response_delex);
    }
}

#[test]
fn generation_is_deterministic_and_seed_dependent() {
    let cfg = SynthConfig { dialogues: 50, ..SynthConfig::default() };
    let bytes = |seed| {
        let c = generate_synthetic_corpus(&cfg, seed).unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &c.examples).unwrap();
        buf
    };
    assert_eq!(bytes(1), bytes(1));
    let (a, b) = (bytes(1), bytes(2));
    assert_ne!(a, b);
    // same schema: both parse back with the same reader
    assert!(!read_corpus(&a[..]).unwrap().is_empty());
    assert!(!read_corpus(&b[..]).unwrap().is_empty());
}

#[test]
fn no_traps_means_no_generic_reply() {
    let cfg = SynthConfig { dialogues: 100, trap_rate: 0.0, request_rate: 1.0, ..SynthConfig::default() };
    let c = generate_synthetic_corpus(&cfg, 4).unwrap();
    let generic = generic_response(&cfg);
    assert!(c.examples.iter().all(|e| e.response_delex != generic));
}

#[test]
fn italian_restaurants_counted_by_scan() {
    let corpus = fixture_corpus();
    let table = corpus.database.table("restaurant").unwrap();
    let oracle = table.records.iter().filter(|r| r["food"] == "italian").count() as u64;
    let belief = ncdial::corpus::BeliefState::new().with("restaurant", "food", "italian");
    assert_eq!(query_db(&belief, &corpus.database, "restaurant").unwrap().match_count, oracle);
}
