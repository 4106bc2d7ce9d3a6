use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use ncdial::corpus::{lexicalize, DialogueExample};
use ncdial::decoding::{decode_turn, DecodeRequest, DecodeResponse};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{ensure_writable, load_examples, write_json, write_jsonl, DecodeRecord, RunStamp, Workspace};
use crate::config::DecodeSettings;
use crate::error::CliError;
use crate::{Context, DecoderArgs};

#[derive(Debug, Clone, Default, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub decoder: DecoderArgs,
    /// Split to decode [default: test].
    #[arg(long)]
    pub split: Option<String>,
    /// Corpus file to decode instead of a split.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Results file [default: <out>/decode/<split>-<decoder>.jsonl].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Wall-clock summary written next to a results file. Not part of the
/// deterministic output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub run: RunStamp,
    pub decoder: String,
    pub workers: usize,
    pub turns: usize,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    pub per_turn_seconds: Vec<f64>,
}

impl TimingReport {
    pub fn new(run: RunStamp, decoder: String, workers: usize, per_turn: Vec<f64>) -> Self {
        let n = per_turn.len();
        let mean = if n == 0 { 0.0 } else { per_turn.iter().sum::<f64>() / n as f64 };
        let mut sorted = per_turn.clone();
        sorted.sort_by(f64::total_cmp);
        let median = match n {
            0 => 0.0,
            _ if n % 2 == 1 => sorted[n / 2],
            _ => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
        };
        Self { run, decoder, workers, turns: n, mean_seconds: mean, median_seconds: median, per_turn_seconds: per_turn }
    }
}

/// Decodes one annotated turn from its context alone.
pub fn decode_example(
    ws: &Workspace,
    ex: &DialogueExample,
    settings: &DecodeSettings,
) -> Result<DecodeResponse, CliError> {
    let request = DecodeRequest {
        dialogue_id: ex.dialogue_id.clone(),
        turn_index: ex.turn_index,
        context: ex.context.clone(),
        decoder: settings.decoder,
        weights: settings.weights,
        beam: settings.beam.clone(),
    };
    let result = decode_turn(
        &request.context,
        &ws.turn_models(),
        request.decoder,
        &request.weights,
        &request.beam,
        &ws.database,
    )
    .map_err(|e| CliError::from(e).context(format!("{} turn {}", ex.dialogue_id, ex.turn_index)))?;
    let lex = lexicalize(&result.response_delex, &result.belief, &result.db, &ws.database, &ws.dict);
    Ok(DecodeResponse::new(&request, result, lex))
}

/// Decodes `examples` on `pool`, returning responses in input order with
/// each turn's wall-clock time in seconds.
pub fn decode_all(
    pool: &rayon::ThreadPool,
    ws: &Workspace,
    examples: &[DialogueExample],
    settings: &DecodeSettings,
) -> Result<Vec<(DecodeResponse, f64)>, CliError> {
    settings.beam.validate(ws.vocab.len())?;
    settings.weights.validate()?;
    pool.install(|| {
        examples
            .par_iter()
            .map(|ex| {
                let start = Instant::now();
                let r = decode_example(ws, ex, settings)?;
                Ok((r, start.elapsed().as_secs_f64()))
            })
            .collect()
    })
}

pub fn timing_path(output: &std::path::Path) -> PathBuf {
    output.with_extension("timing.json")
}

pub fn run(ctx: &mut Context, args: &DecodeArgs) -> Result<String, CliError> {
    args.decoder.apply(&mut ctx.config.decode)?;
    if let Some(s) = &args.split {
        ctx.config.decode.split = s.clone();
    }
    ctx.config.decode.beam.seed = ctx.config.seed;
    let cfg = &ctx.config;
    let settings = &cfg.decode;
    let output = args.output.clone().unwrap_or_else(|| {
        cfg.paths.out.join("decode").join(format!("{}-{}.jsonl", settings.split, settings.decoder))
    });
    ensure_writable(std::slice::from_ref(&output), ctx.force)?;

    let input = args.input.clone().unwrap_or_else(|| cfg.paths.split_file(&settings.split));
    let examples = load_examples(&input)?;
    let ws = Workspace::load(cfg)?;
    let decoded = decode_all(&ctx.pool()?, &ws, &examples, settings)?;

    let run = RunStamp::new(cfg);
    let records: Vec<DecodeRecord> =
        decoded.iter().map(|(r, _)| DecodeRecord { run: run.clone(), settings: settings.clone(), response: r.clone() }).collect();
    write_jsonl(&output, &records)?;
    let timing = TimingReport::new(
        run,
        settings.decoder.to_string(),
        ctx.workers,
        decoded.iter().map(|(_, t)| *t).collect(),
    );
    write_json(&timing_path(&output), &timing)?;
    let flagged = records.iter().filter(|r| !r.response.flags.is_empty()).count();
    Ok(format!(
        "decoded {} turns with {} into {} ({} flagged, mean {:.4}s per turn)",
        records.len(),
        settings.decoder,
        output.display(),
        flagged,
        timing.mean_seconds
    ))
}
