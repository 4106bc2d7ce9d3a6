//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use ncdial::corpus::{
    build_vocab, generate_synthetic_corpus, BeliefState, BookingStatus, DbResult, DialogueActSet, DialogueExample,
    Placeholders, SynthConfig, SyntheticCorpus, Utterance, Vocab,
};
use ncdial::corpus::{tokenize, Database, Record};
use ncdial::models::{train_count_model, CountConfig, Role, TrainedModel, TrainingConfig};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Compares `actual` with a frozen fixture file. Setting `NCDIAL_BLESS`
/// rewrites the file instead.
pub fn check_golden(name: &str, actual: &str) {
    let path = fixture_path(name);
    if std::env::var_os("NCDIAL_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    assert_eq!(actual, expected, "golden file {} differs", path.display());
}

/// The small synthetic corpus most fixtures are drawn from.
pub fn fixture_corpus() -> SyntheticCorpus {
    let cfg = SynthConfig { dialogues: 20, ..SynthConfig::default() };
    generate_synthetic_corpus(&cfg, 1).unwrap()
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// The worked train-booking turn used throughout the docs.
pub fn boxed_example() -> DialogueExample {
    let belief = BeliefState::new()
        .with("train", "destination", "Cambridge")
        .with("train", "day", "Tuesday")
        .with("train", "arrive", "12:30")
        .with("train", "departure", "London");
    let response_lex =
        tokenize("There is a train that leaves at 10:15 and arrives at 12:30. Should I book it?");
    let response_delex = tokenize(
        "There is a train that leaves at [value_time] and arrives at [value_time]. Should I book it?",
    );
    let mut placeholders = Placeholders::new();
    placeholders.insert("[value_time]".into(), vec!["10:15".into(), "12:30".into()]);
    DialogueExample {
        dialogue_id: "boxed".into(),
        turn_index: 1,
        context: vec![
            Utterance::user("I am looking to"),
            Utterance::system("What is your"),
            Utterance::user("I'll be leaving"),
        ],
        belief,
        db: DbResult::new("train", 1, BookingStatus::NotBooked),
        acts: DialogueActSet::new(
            "train",
            &[("inform", Some("arrive")), ("inform", Some("leave")), ("offer", Some("reservation"))],
        ),
        response_delex,
        response_lex,
        placeholders,
    }
}

/// A database in which the boxed example's belief matches exactly one train.
pub fn boxed_database() -> Database {
    let mut db = Database::new();
    for (dest, day) in [("cambridge", "tuesday"), ("cambridge", "friday"), ("ely", "tuesday")] {
        let rec: Record = [("destination", dest), ("day", day), ("departure", "london"), ("leave", "10:15")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        db.add_record("train", true, rec);
    }
    db
}

/// Count models for all three roles trained on `examples` alone.
pub fn count_models(examples: &[DialogueExample], vocab: &Vocab, epochs: usize) -> [TrainedModel; 3] {
    Role::ALL.map(|role| {
        let cfg = TrainingConfig::new(role).with_epochs(epochs);
        train_count_model(examples, vocab, &CountConfig::default(), &cfg).unwrap()
    })
}

pub fn vocab_for(examples: &[DialogueExample]) -> Vocab {
    build_vocab(examples)
}

use ncdial::decoding::Markers;
use ncdial::models::SequenceModel;
use ncdial::TokenId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Toy vocabulary layout: `[a]=0 [/a]=1 [r]=2 [/r]=3`, then plain words.
pub const TOY_MARKERS: Markers = Markers { act_open: 0, response_close: 3, belief_open: 1, belief_close: 2 };

/// A count model over `vocab_size` ids trained on `n` random sequences of
/// `[a] w.. [/r]` under a few random conditionings.
pub fn random_toy_model(vocab_size: usize, n: usize, seed: u64, conditionings: &[Vec<TokenId>]) -> ncdial::models::CountModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ncdial::models::CountModel::new(vocab_size, ncdial::models::CountConfig::default()).unwrap();
    for _ in 0..n {
        let cond = &conditionings[rng.gen_range(0..conditionings.len())];
        let len = rng.gen_range(0..5);
        let mut seq = vec![TOY_MARKERS.act_open];
        for _ in 0..len {
            let mut t = rng.gen_range(0..vocab_size as TokenId);
            if t == TOY_MARKERS.response_close {
                t = TOY_MARKERS.act_open;
            }
            seq.push(t);
        }
        seq.push(TOY_MARKERS.response_close);
        m.add_pair(cond, &seq);
    }
    m
}

/// Direct log-probability of `tokens` after `prefix`, scored from scratch.
pub fn direct_score(model: &dyn SequenceModel, context: &[TokenId], prefix: &[TokenId], tokens: &[TokenId]) -> f64 {
    let mut p = prefix.to_vec();
    let mut total = 0.0;
    for &t in tokens {
        total += model.token_logprob(context, &p, t);
        p.push(t);
    }
    total
}

/// Every sequence `open w.. close` with at most `max_len` tokens and no
/// interior `close`, in lexicographic order of the middles.
pub fn enumerate_sequences(vocab_size: usize, open: TokenId, close: TokenId, max_len: usize) -> Vec<Vec<TokenId>> {
    fn go(cur: &mut Vec<TokenId>, v: TokenId, close: TokenId, max_len: usize, out: &mut Vec<Vec<TokenId>>) {
        let mut done = cur.clone();
        done.push(close);
        out.push(done);
        if cur.len() + 2 > max_len {
            return;
        }
        for t in 0..v {
            if t != close {
                cur.push(t);
                go(cur, v, close, max_len, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(&mut vec![open], vocab_size as TokenId, close, max_len, &mut out);
    out
}

/// Highest score, ties to the lexicographically smallest sequence.
pub fn argmax_by<F: Fn(&[TokenId]) -> f64>(cands: &[Vec<TokenId>], score: F) -> (Vec<TokenId>, f64) {
    let mut best: Option<(Vec<TokenId>, f64)> = None;
    for c in cands {
        let s = score(c);
        let better = match &best {
            None => true,
            Some((b, bs)) => s > *bs || (s == *bs && c < b),
        };
        if better {
            best = Some((c.clone(), s));
        }
    }
    best.expect("non-empty candidate set")
}
