use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use ncdial::decoding::ScoreWeights;
use ncdial::metrics::evaluate;
use serde::{Deserialize, Serialize};

use super::decode::decode_all;
use super::eval::{metric_options, pair_turns};
use crate::artifact::{ensure_writable, load_examples, write_json, RunStamp, Workspace};
use crate::error::CliError;
use crate::{Context, DecoderArgs};

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub decoder: DecoderArgs,
    /// Values for all three weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda1_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda2_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda3_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub k1_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub k2_grid: Option<Vec<usize>>,
    /// Split to tune on [default: dev].
    #[arg(long)]
    pub split: Option<String>,
    /// Table file [default: <out>/sweep/<split>-<decoder>.json].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub k1: usize,
    pub k2: usize,
    pub inform_rate: f64,
    pub success_rate: f64,
    pub bleu: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub run: RunStamp,
    pub decoder: String,
    pub split: String,
    pub turns: usize,
    pub cells: Vec<SweepRow>,
    pub best: SweepRow,
}

/// Highest combined score; rows arrive in lexicographic cell order, so the
/// first maximum is the lexicographically smallest one.
pub fn select_best(rows: &[SweepRow]) -> Option<&SweepRow> {
    let mut best: Option<&SweepRow> = None;
    for r in rows {
        if best.is_none_or(|b| r.combined.total_cmp(&b.combined).is_gt()) {
            best = Some(r);
        }
    }
    best
}

pub fn run(ctx: &mut Context, args: &SweepArgs) -> Result<String, CliError> {
    args.decoder.apply(&mut ctx.config.decode)?;
    ctx.config.decode.beam.seed = ctx.config.seed;
    let spec = &mut ctx.config.sweep;
    if let Some(g) = &args.lambda_grid {
        spec.lambda1 = g.clone();
        spec.lambda2 = g.clone();
        spec.lambda3 = g.clone();
    }
    for (flag, grid) in [
        (&args.lambda1_grid, &mut spec.lambda1),
        (&args.lambda2_grid, &mut spec.lambda2),
        (&args.lambda3_grid, &mut spec.lambda3),
    ] {
        if let Some(g) = flag {
            *grid = g.clone();
        }
    }
    if let Some(g) = &args.k1_grid {
        spec.k1 = g.clone();
    }
    if let Some(g) = &args.k2_grid {
        spec.k2 = g.clone();
    }
    if let Some(s) = &args.split {
        spec.split = s.clone();
    }
    spec.validate()?;

    let cfg = &ctx.config;
    let split = cfg.sweep.split.clone();
    let output = args.output.clone().unwrap_or_else(|| {
        cfg.paths.out.join("sweep").join(format!("{split}-{}.json", cfg.decode.decoder))
    });
    ensure_writable(std::slice::from_ref(&output), ctx.force)?;

    let examples = load_examples(&cfg.paths.split_file(&split))?;
    let train_path = cfg.paths.split_file("train");
    if split != "train" && train_path.exists() {
        let train: BTreeSet<String> = load_examples(&train_path)?.into_iter().map(|e| e.dialogue_id).collect();
        if let Some(e) = examples.iter().find(|e| train.contains(&e.dialogue_id)) {
            return Err(CliError::Data(format!("dialogue {} is in both {split} and train", e.dialogue_id)));
        }
    }
    let ws = Workspace::load(cfg)?;
    let options = metric_options(cfg)?;
    let pool = ctx.pool()?;

    let mut rows = Vec::new();
    for (l1, l2, l3, k1, k2) in cfg.sweep.cells() {
        let mut settings = cfg.decode.clone();
        settings.weights = ScoreWeights::new(l1, l2, l3);
        settings.beam.k1 = k1;
        settings.beam.k2 = k2;
        let decoded: Vec<_> = decode_all(&pool, &ws, &examples, &settings)?.into_iter().map(|(r, _)| r).collect();
        let report = evaluate(&pair_turns(&decoded, &examples)?, &ws.database, &options)?;
        rows.push(SweepRow {
            lambda1: l1,
            lambda2: l2,
            lambda3: l3,
            k1,
            k2,
            inform_rate: report.inform_rate,
            success_rate: report.success_rate,
            bleu: report.bleu,
            combined: report.combined,
        });
    }
    let best = select_best(&rows).cloned().ok_or_else(|| CliError::Internal("empty sweep".into()))?;
    let table = SweepTable {
        run: RunStamp::new(cfg),
        decoder: cfg.decode.decoder.to_string(),
        split,
        turns: examples.len(),
        cells: rows,
        best,
    };
    write_json(&output, &table)?;
    let b = &table.best;
    Ok(format!(
        "{} cells; best lambda=({}, {}, {}) k1={} k2={} combined {:.2} -> {}",
        table.cells.len(),
        b.lambda1,
        b.lambda2,
        b.lambda3,
        b.k1,
        b.k2,
        b.combined,
        output.display()
    ))
}
