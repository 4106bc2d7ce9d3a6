//! Acceptance checks A1 to A11. Each check prints one PASS or FAIL line
//! before asserting, so `cargo test --test acceptance -- --nocapture`
//! gives a readable summary.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::sync::OnceLock;
use std::time::Instant;

use common::{count_models, direct_score, enumerate_sequences, TOY_MARKERS};
use ncdial::corpus::{
    build_vocab, generate_synthetic_corpus, generic_response, DialogueExample, SynthConfig,
    SyntheticCorpus,
};
use ncdial::decoding::{
    decode_turn, direct_decode, direct_search, exact_search, noisy_channel_online, online_search, preset,
    rerank_search, rescore, BeamConfig, DecoderKind, EncodedTurn, ExpansionStrategy, Markers, NoisyModels,
    ScoreWeights, SearchInput, TurnModels,
};
use ncdial::metrics::{
    bleu4, combined, evaluate, has_repetition_loop, repetition_rate, ter, zipf_from_frequencies, EvalTurn,
    MetricOptions, RepetitionConfig, RequestableSlotSet,
};
use ncdial::models::{
    grad_check, make_training_pairs, train_neural_model, CountConfig, CountModel, Model, NeuralConfig, Role,
    SequenceModel, TrainedModel, TrainingConfig, TruncationSampler,
};
use ncdial::{TokenId, Vocab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tempfile::TempDir;

fn verdict(id: &str, name: &str, pass: bool, detail: String) {
    println!("{id} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} {name} failed: {detail}");
}

/// The fixture corpus shared by the decoding checks: 80 dialogues (256 turns), 30% of
/// them generic traps, every offer followed by an attribute request.
fn fixture_config() -> SynthConfig {
    SynthConfig { dialogues: 80, trap_rate: 0.3, request_rate: 1.0, ..SynthConfig::default() }
}

const FIXTURE_SEED: u64 = 5;

struct Fixture {
    corpus: SyntheticCorpus,
    vocab: Vocab,
    models: [TrainedModel; 3],
}

impl Fixture {
    fn turn_models(&self) -> TurnModels<'_> {
        TurnModels { vocab: &self.vocab, direct: &self.models[0], channel: &self.models[1], source: &self.models[2] }
    }

    fn noisy(&self) -> NoisyModels<'_> {
        self.turn_models().noisy()
    }

    fn examples(&self) -> &[DialogueExample] {
        &self.corpus.examples
    }
}

fn fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| {
        let corpus = generate_synthetic_corpus(&fixture_config(), FIXTURE_SEED).unwrap();
        let vocab = build_vocab(&corpus.examples);
        let models = count_models(&corpus.examples, &vocab, 1);
        Fixture { corpus, vocab, models }
    })
}

fn random_weights(rng: &mut ChaCha8Rng) -> ScoreWeights {
    ScoreWeights::new(rng.gen_range(0.0..=2.0), rng.gen_range(0.0..=2.0), rng.gen_range(0.0..=2.0))
}

#[test]
fn a1_reduction_identity() {
    let fx = fixture();
    let tm = fx.turn_models();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let n = fx.examples().len();
    let picks = rand::seq::index::sample(&mut rng, n, 200.min(n)).into_vec();
    let cfg = BeamConfig::default().with_beam(4, 4).with_strategy(ExpansionStrategy::TopKMax);
    let start = Instant::now();
    let mut same = 0;
    for &i in &picks {
        let ctx = &fx.examples()[i].context;
        let d = decode_turn(ctx, &tm, DecoderKind::Direct, &ScoreWeights::ZERO, &cfg, &fx.corpus.database).unwrap();
        let o = decode_turn(ctx, &tm, DecoderKind::Online, &ScoreWeights::ZERO, &cfg, &fx.corpus.database).unwrap();
        if d.tokens() == o.tokens() && d.belief == o.belief && d.response_delex == o.response_delex {
            same += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "A1",
        "reduction identity",
        picks.len() == 200 && same == picks.len() && secs < 60.0,
        format!("{same}/{} turns identical in {secs:.1}s", picks.len()),
    );
}

/// Toy layout `[a]=0 [/a]=1 [r]=2 [/r]=3 x=4 y=5`.
fn toy_models(seed: u64) -> (CountModel, CountModel, CountModel, Vec<TokenId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direct = CountModel::new(6, CountConfig::default()).unwrap();
    let mut channel = direct.clone();
    let mut source = direct.clone();
    let contexts: Vec<Vec<TokenId>> = vec![vec![4, 5], vec![5, 4, 4], vec![4]];
    let random_target = |rng: &mut ChaCha8Rng| {
        let len = rng.gen_range(0..6);
        let mut seq = vec![TOY_MARKERS.act_open];
        seq.extend((0..len).map(|_| [0, 1, 2, 4, 5][rng.gen_range(0..5)]));
        seq.push(TOY_MARKERS.response_close);
        seq
    };
    for _ in 0..40 {
        let ctx = &contexts[rng.gen_range(0..contexts.len())];
        let seq = random_target(&mut rng);
        direct.add_pair(ctx, &seq);
        channel.add_pair(&seq, ctx);
        let other = random_target(&mut rng);
        source.add_pair(&[], &other);
    }
    (direct, channel, source, contexts[0].clone())
}

/// Combined score from token-level probabilities, written independently
/// of the search code.
fn enumerator_score(
    direct: &dyn SequenceModel,
    channel: &dyn SequenceModel,
    source: &dyn SequenceModel,
    ctx: &[TokenId],
    seq: &[TokenId],
    w: &ScoreWeights,
) -> f64 {
    let d = direct_score(direct, ctx, &[], seq);
    let c = direct_score(channel, seq, &[], ctx);
    let s = direct_score(source, &[], &[], seq);
    d + w.lambda1 * c + w.lambda2 * s + w.lambda3 * seq.len() as f64
}

#[test]
fn a2_oracle_exactness() {
    let (direct, channel, source, ctx) = toy_models(7);
    let noisy = NoisyModels { direct: &direct, channel: &channel, source: &source };
    let input = SearchInput { context: &ctx, belief_db: &[], channel_target: &ctx, markers: TOY_MARKERS };
    let max_len = 8;
    let cands = enumerate_sequences(6, TOY_MARKERS.act_open, TOY_MARKERS.response_close, max_len);
    let cfg = BeamConfig::default().with_beam(6, usize::MAX).with_max_len(max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let start = Instant::now();
    let (mut online_ok, mut oracle_ok) = (0, 0);
    for _ in 0..20 {
        let w = random_weights(&mut rng);
        let exact = exact_search(&noisy, &input, &w, max_len).unwrap();
        let online = online_search(&noisy, &input, &w, &cfg).unwrap();
        if online.best().tokens == exact.best().tokens {
            online_ok += 1;
        }
        let best = cands
            .iter()
            .map(|c| enumerator_score(&direct, &channel, &source, &ctx, c, &w))
            .fold(f64::NEG_INFINITY, f64::max);
        let picked = enumerator_score(&direct, &channel, &source, &ctx, &exact.best().tokens, &w);
        if (best - picked).abs() <= 1e-9 {
            oracle_ok += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "A2",
        "oracle exactness",
        online_ok == 20 && oracle_ok == 20 && secs < 300.0,
        format!(
            "online = exact on {online_ok}/20 weight vectors, exact = enumerator max on {oracle_ok}/20, {} candidates, {secs:.1}s",
            cands.len()
        ),
    );
}

fn gold_turn(fx: &Fixture, ex: &DialogueExample) -> EncodedTurn {
    EncodedTurn::new(&fx.vocab, &ex.context, &ex.belief, &ex.db).unwrap()
}

#[test]
fn a3_rerank_membership() {
    let fx = fixture();
    let noisy = fx.noisy();
    let markers = Markers::from_vocab(&fx.vocab);
    let cfg = BeamConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut members, mut maximal) = (0, 0);
    let encoded: Vec<EncodedTurn> = fx.examples().iter().map(|ex| gold_turn(fx, ex)).collect();
    for i in 0..500 {
        let enc = &encoded[i % encoded.len()];
        let input = enc.input(markers);
        let w = random_weights(&mut rng);
        let direct = direct_search(noisy.direct, &input, &cfg).unwrap();
        let pick = rerank_search(&noisy, &input, &w, &cfg).unwrap().best().tokens.clone();
        if direct.beam.iter().any(|h| h.tokens == pick) {
            members += 1;
        }
        let pick_score = rescore(&noisy, &input, &pick, &w).combined;
        let beats = direct
            .beam
            .iter()
            .filter(|h| h.tokens.last() == Some(&markers.response_close))
            .all(|h| rescore(&noisy, &input, &h.tokens, &w).combined <= pick_score + 1e-9);
        if beats {
            maximal += 1;
        }
    }
    verdict(
        "A3",
        "rerank membership",
        members == 500 && maximal == 500,
        format!("member of the direct beam {members}/500, maximal after rescoring {maximal}/500"),
    );
}

#[test]
fn a4_combined_arithmetic() {
    let a = combined(85.2, 72.9, 17.00);
    let b = combined(93.4, 84.3, 24.92);
    verdict(
        "A4",
        "combined-score arithmetic",
        (a - 96.05).abs() < 1e-9 && (b - 113.77).abs() < 1e-9,
        format!("{a} and {b}"),
    );
}

#[test]
fn a5_gradient_check() {
    let fx = fixture();
    let examples = &fx.examples()[..30];
    let cfg = TrainingConfig::new(Role::Source).with_epochs(1).with_seed(3).with_learning_rate(0.1);
    let neural = NeuralConfig { dim: 8, window: 6, hidden: 12, init_scale: 0.1 };
    let m = train_neural_model(examples, &fx.vocab, &neural, &cfg).unwrap();
    let Model::Neural(net) = &m.model else { panic!("neural model expected") };
    let pairs = make_training_pairs(examples, &fx.vocab, Role::Source).unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for pair in pairs.iter().step_by(3).take(10) {
        let report = grad_check(net, pair, eps);
        worst = worst.max(report.max_rel_error);
        checked += report.coords_checked;
        // a second route: the 20 coordinates with the largest analytic
        // gradient, differenced here
        let (_, grad) = net.loss_and_gradient(pair);
        let mut order: Vec<usize> = (0..grad.len()).collect();
        order.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()));
        let mut probe = net.clone();
        for &i in order.iter().take(20) {
            let orig = probe.params[i];
            probe.params[i] = orig + eps;
            let up = probe.loss(pair);
            probe.params[i] = orig - eps;
            let down = probe.loss(pair);
            probe.params[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max((numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()));
            checked += 1;
        }
    }
    verdict(
        "A5",
        "gradient check",
        worst < 1e-4,
        format!("max relative error {worst:.2e} over {checked} coordinates of 10 pairs, epsilon {eps}"),
    );
}

#[test]
fn a6_truncation_distribution() {
    let len = 7;
    let draws = 10_000;
    let mut sampler = TruncationSampler::new(17, 0);
    let mut counts = vec![0u64; len];
    let mut out_of_range = 0;
    for _ in 0..draws {
        match sampler.sample(len) {
            k @ 1..=7 => counts[k - 1] += 1,
            _ => out_of_range += 1,
        }
    }
    let expected = draws as f64 / len as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((len - 1) as f64).unwrap().inverse_cdf(1.0 - 0.001);
    verdict(
        "A6",
        "truncation distribution",
        out_of_range == 0 && (critical - 22.458).abs() < 1e-3 && stat < critical,
        format!("chi-square {stat:.3} < {critical:.3} (df 6, alpha 0.001), counts {counts:?}"),
    );
}

/// A trap-free turn whose request context shares its wording with the
/// trap dialogues, found once by scanning the fixture and frozen here.
const TRAP_TURN: (&str, usize) = ("syn00000", 1);

#[test]
fn a7_generic_trap_separation() {
    let fx = fixture();
    let generic = generic_response(&fixture_config());
    let ex = fx
        .examples()
        .iter()
        .find(|e| (e.dialogue_id.as_str(), e.turn_index) == TRAP_TURN)
        .expect("frozen trap turn exists");
    let generic_count = fx.examples().iter().filter(|e| e.response_delex == generic).count();
    let tm = fx.turn_models();
    let cfg = BeamConfig::default();
    let d = direct_decode(&ex.context, &ex.belief, &ex.db, &tm, &cfg).unwrap();
    let o = noisy_channel_online(&ex.context, &ex.belief, &ex.db, &tm, &ScoreWeights::new(1.0, 1.0, 0.0), &cfg)
        .unwrap();
    verdict(
        "A7",
        "generic-trap separation",
        ex.response_delex != generic && d.response_delex == generic && o.response_delex == ex.response_delex,
        format!(
            "direct {:?}, online {:?}, generic reply annotated {generic_count} times",
            d.response_delex.join(" "),
            o.response_delex.join(" ")
        ),
    );
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

#[test]
fn a8_metric_fixtures() {
    let bleu = bleu4(&[words("a b c d e f g x")], &[words("a b c d e f g h")]).unwrap();
    let shift = ter(&words("table book a"), &words("book a table")).unwrap();
    let zipf = zipf_from_frequencies(&[8, 4, 2, 1]);
    let rep = RepetitionConfig::default();
    let loop_found = has_repetition_loop(&words("the the the the the"), &rep);
    let no_loop = !has_repetition_loop(&words("i can book it for you"), &rep);
    let rate = repetition_rate(&[words("the the the the the"), words("i can book it for you")], &rep);

    let cfg = SynthConfig { dialogues: 20, ..SynthConfig::default() };
    let corpus = generate_synthetic_corpus(&cfg, 5).unwrap();
    let turns: Vec<EvalTurn> = corpus
        .examples
        .iter()
        .map(|e| EvalTurn {
            dialogue_id: e.dialogue_id.clone(),
            turn_index: e.turn_index,
            decoded_belief: e.belief.clone(),
            gt_belief: e.belief.clone(),
            decoded_response: e.response_delex.clone(),
            gt_response: e.response_delex.clone(),
            flagged: false,
        })
        .collect();
    let options = MetricOptions {
        name_placeholders: cfg.name_placeholders(),
        requestables: RequestableSlotSet::new(cfg.requestable_placeholders()),
        repetition: rep,
    };
    let report = evaluate(&turns, &corpus.database, &options).unwrap();
    let identity = report.inform_rate == 100.0
        && report.success_rate == 100.0
        && (report.bleu - 100.0).abs() < 1e-9
        && report.ter == 0.0;
    verdict(
        "A8",
        "metric fixtures",
        (bleu - 84.09).abs() <= 0.01
            && (shift - 0.333).abs() <= 0.001
            && (zipf - 1.459).abs() <= 0.005
            && loop_found
            && no_loop
            && rate == 50.0
            && identity,
        format!(
            "bleu {bleu:.4}, ter {shift:.4}, zipf {zipf:.4}, loops {loop_found}/{no_loop} rate {rate}, identity inform {} success {} bleu {:.2} ter {}",
            report.inform_rate, report.success_rate, report.bleu, report.ter
        ),
    );
}

/// Measured over every fixture turn with the default weights. At fixture
/// creation the totals were ground truth 2311, direct 2295 and online 2291
/// tokens over 256 turns, so the inequality does not hold here; the check
/// reports it as measured.
#[test]
fn a9_length_behavior() {
    let fx = fixture();
    let tm = fx.turn_models();
    let w = preset("multiwoz").unwrap().weights;
    let cfg = BeamConfig::default();
    let turns = fx.examples();
    let n = turns.len() as f64;
    let lengths = |kind: DecoderKind| -> Vec<usize> {
        turns
            .iter()
            .map(|ex| decode_turn(&ex.context, &tm, kind, &w, &cfg, &fx.corpus.database).unwrap().response_delex.len())
            .collect()
    };
    let truth: Vec<usize> = turns.iter().map(|e| e.response_delex.len()).collect();
    let (direct, online) = (lengths(DecoderKind::Direct), lengths(DecoderKind::Online));
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / n;
    // per-turn deviation, reported for context only
    let per_turn = |v: &[usize]| v.iter().zip(&truth).map(|(a, b)| a.abs_diff(*b)).sum::<usize>() as f64 / n;
    let (gt, d, o) = (mean(&truth), mean(&direct), mean(&online));
    verdict(
        "A9",
        "length behavior",
        (o - gt).abs() <= (d - gt).abs(),
        format!(
            "mean length over {} turns: ground truth {gt:.4}, direct {d:.4}, online {o:.4}; mean per-turn deviation direct {:.4}, online {:.4}",
            turns.len(),
            per_turn(&direct),
            per_turn(&online)
        ),
    );
}

#[test]
fn a10_determinism_suite() {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    let mut chats = Vec::new();
    for dir in &dirs {
        let d = dir.path().to_str().unwrap();
        support::prepare(dir.path(), 20);
        for decoder in ["direct", "rerank", "online"] {
            support::ok(&["--out", d, "decode", "--decoder", decoder]);
        }
        support::ok(&["--out", d, "decode", "--decoder", "online", "--strategy", "swr", "--output", &format!("{d}/swr.jsonl")]);
        let a = dir.path().join("decode/test-direct.jsonl");
        let b = dir.path().join("decode/test-online.jsonl");
        support::ok(&["--out", d, "eval", "--results", a.to_str().unwrap(), "--compare", b.to_str().unwrap()]);
        support::ok(&["--out", d, "sweep", "--lambda-grid", "0,1"]);
        let script = "i want a cheap restaurant in the north .\n:weights 1 1 0\nwhat is the phone number ?\n:quit\n";
        chats.push(support::ncdial_with_input(&["--out", d, "chat"], script).unwrap());
    }
    let (a, b) = (support::snapshot(dirs[0].path()), support::snapshot(dirs[1].path()));
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .chain(b.keys().filter(|k| !a.contains_key(*k)).map(|k| k.display().to_string()))
        .collect();
    verdict(
        "A10",
        "determinism suite",
        differing.is_empty() && chats[0] == chats[1] && a.len() >= 15,
        format!("{} artifacts compared, differing {differing:?}, chat transcripts equal {}", a.len(), chats[0] == chats[1]),
    );
}

#[test]
fn a11_timing_ordering() {
    let fx = fixture();
    let tm = fx.turn_models();
    let w = preset("multiwoz").unwrap().weights;
    let cfg = BeamConfig::default();
    let turns = &fx.examples()[..100];
    let kinds = [DecoderKind::Direct, DecoderKind::Rerank, DecoderKind::Online];
    let mut totals = [0.0f64; 3];
    // interleaved per turn, best of three, so background load hits every
    // decoder alike
    for ex in turns {
        for (slot, &kind) in kinds.iter().enumerate() {
            let mut best = f64::INFINITY;
            for _ in 0..3 {
                let start = Instant::now();
                let r = decode_turn(&ex.context, &tm, kind, &w, &cfg, &fx.corpus.database).unwrap();
                best = best.min(start.elapsed().as_secs_f64());
                std::hint::black_box(r);
            }
            totals[slot] += best;
        }
    }
    let [d, r, o] = totals.map(|t| t / turns.len() as f64);
    verdict(
        "A11",
        "timing ordering",
        o >= r && r >= d,
        format!("mean seconds per turn: direct {d:.6}, rerank {r:.6}, online {o:.6}"),
    );
}

