use std::collections::BTreeMap;

use clap::Args;
use ncdial::corpus::{generate_synthetic_corpus, save_corpus, save_database, save_dict, DialogueExample};

use crate::artifact::{ensure_writable, file_sha256, write_json, DataManifest, RunStamp, SplitInfo};
use crate::error::CliError;
use crate::Context;

pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

#[derive(Debug, Clone, Default, Args)]
pub struct GenDataArgs {
    /// Number of dialogues.
    #[arg(long)]
    pub dialogues: Option<usize>,
    /// Fraction of dialogues carrying the generic-trap exchange.
    #[arg(long)]
    pub traps: Option<f64>,
    /// Train,dev,test proportions, e.g. 80,10,10.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<u32>>,
}

/// Dialogue counts per split. Proportions are applied with rounding and
/// the test split takes the remainder.
pub fn split_sizes(dialogues: usize, ratios: [u32; 3]) -> Result<[usize; 3], CliError> {
    let total: u32 = ratios.iter().sum();
    if total == 0 {
        return Err(CliError::Usage("split proportions sum to zero".into()));
    }
    let share = |r: u32| ((dialogues as f64) * r as f64 / total as f64).round() as usize;
    let train = share(ratios[0]).min(dialogues);
    let dev = share(ratios[1]).min(dialogues - train);
    Ok([train, dev, dialogues - train - dev])
}

/// Splits examples by dialogue, keeping dialogues in id order.
pub fn split_examples(
    examples: &[DialogueExample],
    ratios: [u32; 3],
) -> Result<[Vec<DialogueExample>; 3], CliError> {
    let mut ids: Vec<&str> = examples.iter().map(|e| e.dialogue_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let sizes = split_sizes(ids.len(), ratios)?;
    let mut which: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let s = if i < sizes[0] {
            0
        } else if i < sizes[0] + sizes[1] {
            1
        } else {
            2
        };
        which.insert(id, s);
    }
    let mut out: [Vec<DialogueExample>; 3] = Default::default();
    for e in examples {
        out[which[e.dialogue_id.as_str()]].push(e.clone());
    }
    Ok(out)
}

pub fn run(ctx: &mut Context, args: &GenDataArgs) -> Result<String, CliError> {
    let cfg = &mut ctx.config;
    if let Some(n) = args.dialogues {
        cfg.data.synth.dialogues = n;
    }
    if let Some(t) = args.traps {
        cfg.data.synth.trap_rate = t;
    }
    if let Some(s) = &args.split {
        cfg.data.split = s
            .as_slice()
            .try_into()
            .map_err(|_| CliError::Usage(format!("--split needs three proportions, got {}", s.len())))?;
    }
    let cfg = &ctx.config;
    let paths = &cfg.paths;
    let mut outputs: Vec<_> = SPLITS.iter().map(|s| paths.split_file(s)).collect();
    outputs.extend([paths.database_file(), paths.dict_file(), paths.manifest_file()]);
    ensure_writable(&outputs, ctx.force)?;

    let corpus = generate_synthetic_corpus(&cfg.data.synth, cfg.seed)?;
    let splits = split_examples(&corpus.examples, cfg.data.split)?;
    std::fs::create_dir_all(paths.data_dir())?;

    let mut info = BTreeMap::new();
    for (name, examples) in SPLITS.iter().zip(&splits) {
        save_corpus(examples, paths.split_file(name))?;
        let mut ids: Vec<&str> = examples.iter().map(|e| e.dialogue_id.as_str()).collect();
        ids.dedup();
        info.insert(name.to_string(), SplitInfo { dialogues: ids.len(), turns: examples.len() });
    }
    save_database(&corpus.database, paths.database_file())?;
    save_dict(&corpus.dict, paths.dict_file())?;

    let mut files = BTreeMap::new();
    for p in &outputs[..outputs.len() - 1] {
        let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        files.insert(name, file_sha256(p)?);
    }
    let manifest = DataManifest {
        run: RunStamp::new(cfg),
        dialogues: cfg.data.synth.dialogues,
        splits: info,
        name_placeholders: cfg.data.synth.name_placeholders(),
        requestables: cfg.data.synth.requestable_placeholders(),
        files,
    };
    write_json(&paths.manifest_file(), &manifest)?;
    Ok(format!(
        "wrote {} dialogues to {} (train {}, dev {}, test {})",
        manifest.dialogues,
        paths.data_dir().display(),
        manifest.splits["train"].dialogues,
        manifest.splits["dev"].dialogues,
        manifest.splits["test"].dialogues,
    ))
}
