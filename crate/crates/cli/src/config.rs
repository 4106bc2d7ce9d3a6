//! Run configuration: a TOML file mirroring [`RunConfig`], overridden by
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use ncdial::corpus::SynthConfig;
use ncdial::decoding::{preset, BeamConfig, DecoderKind, ScoreWeights, PRESETS};
use ncdial::metrics::RepetitionConfig;
use ncdial::models::{CountConfig, NeuralConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub data: DataConfig,
    pub train: TrainSettings,
    pub decode: DecodeSettings,
    pub eval: EvalSettings,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            paths: PathsConfig::default(),
            data: DataConfig::default(),
            train: TrainSettings::default(),
            decode: DecodeSettings::default(),
            eval: EvalSettings::default(),
            sweep: SweepSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Run directory; every command reads and writes below it.
    pub out: PathBuf,
    /// Overrides `<out>/data`.
    pub data: Option<PathBuf>,
    /// Overrides `<out>/models`.
    pub models: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { out: PathBuf::from("run"), data: None, models: None }
    }
}

impl PathsConfig {
    pub fn data_dir(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.out.join("data"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.models.clone().unwrap_or_else(|| self.out.join("models"))
    }

    pub fn split_file(&self, split: &str) -> PathBuf {
        self.data_dir().join(format!("{split}.jsonl"))
    }

    pub fn database_file(&self) -> PathBuf {
        self.data_dir().join("database.json")
    }

    pub fn dict_file(&self) -> PathBuf {
        self.data_dir().join("dict.json")
    }

    pub fn manifest_file(&self) -> PathBuf {
        self.data_dir().join("manifest.json")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub synth: SynthConfig,
    /// Train/dev/test proportions, applied to dialogues in id order.
    pub split: [u32; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { synth: SynthConfig::default(), split: [80, 10, 10] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Count,
    Neural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub kind: ModelKind,
    pub epochs: usize,
    /// Epochs for the pretraining stage when a pretraining corpus is given.
    pub pretrain_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub count: CountConfig,
    pub neural: NeuralConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            kind: ModelKind::Count,
            epochs: 1,
            pretrain_epochs: 1,
            learning_rate: 0.1,
            batch_size: 16,
            count: CountConfig::default(),
            neural: NeuralConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSettings {
    pub decoder: DecoderKind,
    /// Named hyperparameter preset, applied before explicit values.
    pub preset: Option<String>,
    pub weights: ScoreWeights,
    pub beam: BeamConfig,
    /// Split decoded by `decode`.
    pub split: String,
}

impl Default for DecodeSettings {
    fn default() -> Self {
        let mw = PRESETS[0];
        Self {
            decoder: DecoderKind::Online,
            preset: None,
            weights: mw.weights,
            beam: BeamConfig::default().with_beam(mw.k1, mw.k2),
            split: "test".into(),
        }
    }
}

impl DecodeSettings {
    /// Replaces weights and beam sizes with the named preset.
    pub fn apply_preset(&mut self, name: &str) -> Result<(), CliError> {
        let p = preset(name).ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            CliError::Usage(format!("unknown preset {name:?}; expected one of {}", names.join(", ")))
        })?;
        self.preset = Some(name.to_string());
        self.weights = p.weights;
        self.beam.k1 = p.k1;
        self.beam.k2 = p.k2;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub trials: usize,
    /// Defaults to the list recorded by `gen-data`.
    pub name_placeholders: Option<Vec<String>>,
    /// Defaults to the list recorded by `gen-data`.
    pub requestables: Option<Vec<String>>,
    pub repetition: RepetitionConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { trials: 1000, name_placeholders: None, requestables: None, repetition: RepetitionConfig::default() }
    }
}

/// Grid searched by `sweep`. Cells are every combination of the lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub lambda3: Vec<f64>,
    pub k1: Vec<usize>,
    pub k2: Vec<usize>,
    pub split: String,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let grid = vec![0.0, 1.0, 2.0];
        Self {
            lambda1: grid.clone(),
            lambda2: grid.clone(),
            lambda3: grid,
            k1: vec![4],
            k2: vec![4],
            split: "dev".into(),
        }
    }
}

impl SweepSpec {
    pub const LAMBDA_RANGE: (f64, f64) = (0.0, 2.0);
    pub const BEAM_RANGE: (usize, usize) = (1, 20);

    pub fn validate(&self) -> Result<(), CliError> {
        for (name, grid) in [("lambda1", &self.lambda1), ("lambda2", &self.lambda2), ("lambda3", &self.lambda3)] {
            if grid.is_empty() {
                return Err(CliError::Usage(format!("sweep grid {name} is empty")));
            }
            if let Some(v) = grid.iter().find(|v| !(Self::LAMBDA_RANGE.0..=Self::LAMBDA_RANGE.1).contains(*v)) {
                return Err(CliError::Usage(format!("sweep {name} value {v} outside [0, 2]")));
            }
        }
        for (name, grid) in [("k1", &self.k1), ("k2", &self.k2)] {
            if grid.is_empty() {
                return Err(CliError::Usage(format!("sweep grid {name} is empty")));
            }
            if let Some(v) = grid.iter().find(|v| !(Self::BEAM_RANGE.0..=Self::BEAM_RANGE.1).contains(*v)) {
                return Err(CliError::Usage(format!("sweep {name} value {v} outside [1, 20]")));
            }
        }
        Ok(())
    }

    /// Every cell as (λ1, λ2, λ3, k1, k2), in lexicographic order with
    /// duplicates removed.
    pub fn cells(&self) -> Vec<(f64, f64, f64, usize, usize)> {
        let sorted_f = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let sorted_u = |v: &[usize]| {
            let mut v = v.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        let (l1, l2, l3) = (sorted_f(&self.lambda1), sorted_f(&self.lambda2), sorted_f(&self.lambda3));
        let (k1, k2) = (sorted_u(&self.k1), sorted_u(&self.k2));
        let mut out = Vec::new();
        for &a in &l1 {
            for &b in &l2 {
                for &c in &l3 {
                    for &x in &k1 {
                        for &y in &k2 {
                            out.push((a, b, c, x, y));
                        }
                    }
                }
            }
        }
        out
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// The configuration without filesystem locations, as echoed into
    /// artifacts and hashed. Keeps artifacts independent of where a run
    /// directory lives.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("paths");
        }
        v
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.echo()).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
