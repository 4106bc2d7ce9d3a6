//! Output files: provenance stamps, overwrite protection, and loaders for
//! the files other commands produce.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ncdial::corpus::{load_corpus, load_database, load_dict, Database, DialogueExample, PlaceholderDict, Vocab};
use ncdial::decoding::{DecodeResponse, TurnModels};
use ncdial::models::{load_model, Role, TrainedModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, DecodeSettings, RunConfig};
use crate::error::CliError;

pub const TOOL_VERSION: &str = concat!("ncdial ", env!("CARGO_PKG_VERSION"));

/// Embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStamp {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl RunStamp {
    pub fn new(config: &RunConfig) -> Self {
        Self { tool_version: TOOL_VERSION.to_string(), seed: config.seed, config_hash: config.hash() }
    }

    pub fn provenance(&self) -> std::collections::BTreeMap<String, String> {
        [
            ("tool_version", self.tool_version.clone()),
            ("seed", self.seed.to_string()),
            ("config_hash", self.config_hash.clone()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Refuses to overwrite existing files unless `force` is set.
pub fn ensure_writable(paths: &[PathBuf], force: bool) -> Result<(), CliError> {
    if force {
        return Ok(());
    }
    if let Some(p) = paths.iter().find(|p| p.exists()) {
        return Err(CliError::Usage(format!("{} exists; pass --force to overwrite", p.display())));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        }
    }
    let f = File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Summary of a `gen-data` run, read back by later commands for the
/// dataset-specific metric options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub run: RunStamp,
    pub dialogues: usize,
    pub splits: std::collections::BTreeMap<String, SplitInfo>,
    pub name_placeholders: Vec<String>,
    pub requestables: Vec<String>,
    /// SHA-256 of each data file.
    pub files: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub dialogues: usize,
    pub turns: usize,
}

/// One line of a decode results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub run: RunStamp,
    /// Settings the turn was decoded with, after presets and flags.
    pub settings: DecodeSettings,
    #[serde(flatten)]
    pub response: DecodeResponse,
}

pub fn load_split(config: &RunConfig, split: &str) -> Result<Vec<DialogueExample>, CliError> {
    let path = config.paths.split_file(split);
    load_examples(&path)
}

/// Loads a corpus sorted by (dialogue id, turn index).
pub fn load_examples(path: &Path) -> Result<Vec<DialogueExample>, CliError> {
    let mut examples = load_corpus(path).map_err(|e| CliError::from(e).context(path.display()))?;
    examples.sort_by(|a, b| (&a.dialogue_id, a.turn_index).cmp(&(&b.dialogue_id, b.turn_index)));
    Ok(examples)
}

pub fn model_file(dir: &Path, role: Role) -> PathBuf {
    dir.join(format!("{role}.model"))
}

/// Everything needed to decode: vocabulary, the three models, database
/// and placeholder dictionary.
pub struct Workspace {
    pub vocab: Vocab,
    pub direct: TrainedModel,
    pub channel: TrainedModel,
    pub source: TrainedModel,
    pub database: Database,
    pub dict: PlaceholderDict,
}

impl Workspace {
    pub fn load(config: &RunConfig) -> Result<Self, CliError> {
        let models = config.paths.models_dir();
        let tokens: Vec<String> = read_json(&models.join("vocab.json"))?;
        let vocab = Vocab::with_words(tokens.iter());
        if vocab.tokens() != tokens.as_slice() {
            return Err(CliError::Data(format!("{}: not a vocabulary file", models.join("vocab.json").display())));
        }
        let load = |role: Role| -> Result<TrainedModel, CliError> {
            let path = model_file(&models, role);
            let m = load_model(&path).map_err(|e| CliError::from(e).context(path.display()))?;
            if m.role != role {
                return Err(CliError::Data(format!("{}: holds a {} model", path.display(), m.role)));
            }
            m.check_vocab(&vocab).map_err(|e| CliError::from(e).context(path.display()))?;
            Ok(m)
        };
        let database_path = config.paths.database_file();
        let dict_path = config.paths.dict_file();
        Ok(Self {
            direct: load(Role::Direct)?,
            channel: load(Role::Channel)?,
            source: load(Role::Source)?,
            database: load_database(&database_path).map_err(|e| CliError::from(e).context(database_path.display()))?,
            dict: load_dict(&dict_path).map_err(|e| CliError::from(e).context(dict_path.display()))?,
            vocab,
        })
    }

    pub fn turn_models(&self) -> TurnModels<'_> {
        TurnModels { vocab: &self.vocab, direct: &self.direct, channel: &self.channel, source: &self.source }
    }
}
