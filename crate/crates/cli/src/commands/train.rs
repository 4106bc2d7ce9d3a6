use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use ncdial::corpus::{build_vocab, DialogueExample, Vocab};
use ncdial::models::{
    fine_tune, make_training_pairs, perplexity, save_model, train_count_model, train_neural_model, Role,
    TrainedModel, TrainingConfig,
};
use serde::{Deserialize, Serialize};

use crate::artifact::{ensure_writable, file_sha256, load_examples, model_file, write_json, RunStamp};
use crate::config::{ModelKind, RunConfig};
use crate::error::CliError;
use crate::Context;

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub kind: Option<ModelKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Corpus for a first training stage; the target corpus then continues
    /// from the pretrained models.
    #[arg(long)]
    pub pretrain: Option<PathBuf>,
    /// Training corpus [default: the train split].
    #[arg(long)]
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleLog {
    pub epochs: usize,
    /// Per-epoch training loss (neural models).
    pub losses: Vec<f64>,
    /// Per-token perplexity on the stage corpus after the stage.
    pub perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: String,
    pub corpus: String,
    pub examples: usize,
    pub roles: BTreeMap<String, RoleLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub run: RunStamp,
    pub kind: ModelKind,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub stages: Vec<StageLog>,
    pub model_sha256: BTreeMap<String, String>,
}

fn training_config(cfg: &RunConfig, role: Role, epochs: usize) -> TrainingConfig {
    TrainingConfig::new(role)
        .with_epochs(epochs)
        .with_seed(cfg.seed)
        .with_learning_rate(cfg.train.learning_rate)
        .with_batch_size(cfg.train.batch_size)
}

fn from_scratch(
    cfg: &RunConfig,
    examples: &[DialogueExample],
    vocab: &Vocab,
    tc: &TrainingConfig,
) -> Result<TrainedModel, CliError> {
    Ok(match cfg.train.kind {
        ModelKind::Count => train_count_model(examples, vocab, &cfg.train.count, tc)?,
        ModelKind::Neural => train_neural_model(examples, vocab, &cfg.train.neural, tc)?,
    })
}

fn file_label(p: &Path) -> String {
    p.file_name().unwrap_or(p.as_os_str()).to_string_lossy().into_owned()
}

/// Runs one stage for every role, continuing from `previous` when given.
fn stage(
    cfg: &RunConfig,
    name: &str,
    corpus: &Path,
    examples: &[DialogueExample],
    vocab: &Vocab,
    epochs: usize,
    previous: Option<Vec<TrainedModel>>,
) -> Result<(Vec<TrainedModel>, StageLog), CliError> {
    let mut models = Vec::new();
    let mut roles = BTreeMap::new();
    for (i, role) in Role::ALL.into_iter().enumerate() {
        let tc = training_config(cfg, role, epochs);
        let (model, losses) = match &previous {
            None => {
                let m = from_scratch(cfg, examples, vocab, &tc)?;
                let l = m.loss_history.clone();
                (m, l)
            }
            Some(prev) => {
                let before = prev[i].loss_history.len();
                let m = fine_tune(&prev[i], examples, vocab, &tc)?;
                let l = m.loss_history[before..].to_vec();
                (m, l)
            }
        };
        let pairs = make_training_pairs(examples, vocab, role)?;
        roles.insert(role.to_string(), RoleLog { epochs, losses, perplexity: perplexity(&model, &pairs) });
        models.push(model);
    }
    let log = StageLog { stage: name.into(), corpus: file_label(corpus), examples: examples.len(), roles };
    Ok((models, log))
}

pub fn run(ctx: &mut Context, args: &TrainArgs) -> Result<String, CliError> {
    if let Some(k) = args.kind {
        ctx.config.train.kind = k;
    }
    if let Some(e) = args.epochs {
        ctx.config.train.epochs = e;
    }
    let cfg = &ctx.config;
    let dir = cfg.paths.models_dir();
    let mut outputs: Vec<PathBuf> = Role::ALL.iter().map(|r| model_file(&dir, *r)).collect();
    outputs.push(dir.join("vocab.json"));
    outputs.push(dir.join("train_log.json"));
    ensure_writable(&outputs, ctx.force)?;

    let target_path = args.target.clone().unwrap_or_else(|| cfg.paths.split_file("train"));
    let target = load_examples(&target_path)?;
    let pretrain = match &args.pretrain {
        Some(p) => Some((p.clone(), load_examples(p)?)),
        None => None,
    };
    let vocab = build_vocab(target.iter().chain(pretrain.iter().flat_map(|(_, e)| e.iter())));

    let mut stages = Vec::new();
    let mut models = None;
    if let Some((path, examples)) = &pretrain {
        let (m, log) = stage(cfg, "pretrain", path, examples, &vocab, cfg.train.pretrain_epochs, None)?;
        models = Some(m);
        stages.push(log);
    }
    let (models, log) = stage(cfg, "target", &target_path, &target, &vocab, cfg.train.epochs, models)?;
    stages.push(log);

    let run = RunStamp::new(cfg);
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join("vocab.json"), &vocab)?;
    let mut model_sha256 = BTreeMap::new();
    for mut m in models {
        m.provenance = run.provenance();
        let path = model_file(&dir, m.role);
        save_model(&m, &path)?;
        model_sha256.insert(m.role.to_string(), file_sha256(&path)?);
    }
    let log = TrainLog {
        run,
        kind: cfg.train.kind,
        vocab_size: vocab.len(),
        vocab_hash: vocab.fingerprint(),
        stages,
        model_sha256,
    };
    write_json(&dir.join("train_log.json"), &log)?;
    Ok(format!(
        "trained {} models ({} stage(s), vocabulary {}) into {}",
        format!("{:?}", cfg.train.kind).to_lowercase(),
        log.stages.len(),
        log.vocab_size,
        dir.display()
    ))
}
