//! Declarative experiment configuration (TOML).
//!
//! ```toml
//! seed = 1
//! out_dir = "runs"
//! word_vectors = "glove.840B.300d.txt"
//!
//! [[datasets]]
//! name = "Res14"
//! train = "res14/train.jsonl"
//! test = "res14/test.jsonl"
//! contextual_train = "res14/train.ctx"
//! contextual_test = "res14/test.ctx"
//!
//! [model.encoder]
//! kind = "bilstm"
//!
//! [grid]
//! datasets = ["Res14"]
//! ```
//!
//! Relative data paths resolve against `data_root`, then the `TOWE_DATA_ROOT`
//! environment variable, then the directory of the config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{read_dataset, DatasetSplit};
use crate::error::{Error, Result};
use crate::eval::{GridBase, GridDataset, GridSpec};
use crate::featurize::{ContextualVectors, InputConfig, InputMode, VectorSubset};
use crate::model::{ModelConfig, TrainConfig, WordVectors};

pub const DATA_ROOT_ENV: &str = "TOWE_DATA_ROOT";

/// Raw inline-annotated sources of a dataset, for `import`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSources {
    pub train: PathBuf,
    pub test: PathBuf,
    pub train_parses: PathBuf,
    pub test_parses: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPaths {
    pub name: String,
    /// Canonical JSONL files.
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contextual_train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contextual_test: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawSources>,
}

impl DatasetPaths {
    pub fn has_contextual(&self) -> bool {
        self.contextual_train.is_some() && self.contextual_test.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_root: Option<PathBuf>,
    /// Pretrained word vectors; random vectors are used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word_vectors: Option<PathBuf>,
    pub datasets: Vec<DatasetPaths>,
    pub model: ModelConfig,
    /// Training settings for mode-G models; defaults apply when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    /// Training settings for mode-B models; defaults apply when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_contextual: Option<TrainConfig>,
    pub grid: GridSpec,
    /// Directory relative paths resolve against when neither `data_root`
    /// nor the environment variable is set.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            out_dir: PathBuf::from("runs"),
            data_root: None,
            word_vectors: None,
            datasets: vec![],
            model: ModelConfig::default(),
            train: None,
            train_contextual: None,
            grid: GridSpec::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config =
            Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
        Ok(config)
    }

    pub fn data_root(&self) -> PathBuf {
        self.data_root
            .clone()
            .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| self.base_dir.clone())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_owned()
        } else {
            self.data_root().join(path)
        }
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetPaths> {
        self.datasets.iter().find(|d| d.name == name).ok_or_else(|| {
            Error::Config(format!(
                "unknown dataset {name}; available: {}",
                self.dataset_names().join(", ")
            ))
        })
    }

    pub fn dataset_names(&self) -> Vec<&str> {
        self.datasets.iter().map(|d| d.name.as_str()).collect()
    }

    /// Training settings for a model of `mode`, seeded with `seed`.
    pub fn train_config(&self, mode: InputMode, seed: u64) -> TrainConfig {
        let mut t = match mode {
            InputMode::Glove => self.train.clone().unwrap_or_else(TrainConfig::glove),
            InputMode::Contextual => self.train_contextual.clone().unwrap_or_else(TrainConfig::contextual),
        };
        t.seed = seed;
        t
    }

    fn check_exists(&self, what: &str, path: &Path) -> Result<()> {
        let full = self.resolve(path);
        if full.exists() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} not found: {}", full.display())))
        }
    }

    /// Structural checks plus existence of the files a `train` run on
    /// `datasets` needs.
    pub fn validate_for_train(&self, datasets: &[&str]) -> Result<()> {
        self.validate_structure()?;
        self.validate_data(datasets, &[self.model.input.mode])
    }

    /// Structural checks plus existence of every file the grid needs.
    pub fn validate_for_grid(&self) -> Result<()> {
        self.validate_structure()?;
        self.grid.validate()?;
        let names: Vec<&str> = self.grid.datasets.iter().map(String::as_str).collect();
        self.validate_data(&names, &self.grid.modes)
    }

    fn validate_structure(&self) -> Result<()> {
        let mut model = self.model.clone();
        if model.input.mode == InputMode::Contextual && model.input.contextual_dim == 0 {
            // Taken from the sidecar at load time.
            model.input.contextual_dim = 1;
        }
        model.validate()?;
        for mode in [InputMode::Glove, InputMode::Contextual] {
            self.train_config(mode, self.seed).validate()?;
        }
        let mut seen = HashSet::new();
        for d in &self.datasets {
            if d.name.is_empty() || !seen.insert(d.name.as_str()) {
                return Err(Error::Config(format!("dataset name {:?} is empty or repeated", d.name)));
            }
        }
        Ok(())
    }

    fn validate_data(&self, datasets: &[&str], modes: &[InputMode]) -> Result<()> {
        if modes.contains(&InputMode::Glove) {
            if let Some(v) = &self.word_vectors {
                self.check_exists("word vector file", v)?;
            }
        }
        for name in datasets {
            let d = self.dataset(name)?;
            self.check_exists("training split", &d.train)?;
            self.check_exists("test split", &d.test)?;
            if modes.contains(&InputMode::Contextual) {
                match (&d.contextual_train, &d.contextual_test) {
                    (Some(a), Some(b)) => {
                        self.check_exists("contextual sidecar", a)?;
                        self.check_exists("contextual sidecar", b)?;
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "dataset {name}: contextual input needs contextual_train and contextual_test sidecars"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the serialized config, as 12 hex digits. The seed is not
    /// part of the hash.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.seed = 0;
        let json = serde_json::to_string(&c)?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().take(6).map(|b| format!("{b:02x}")).collect())
    }

    /// `<out_dir>/<command>-<hash>-seed<seed>`.
    pub fn run_dir(&self, command: &str, seed: u64) -> Result<PathBuf> {
        Ok(self.out_dir.join(format!("{command}-{}-seed{seed}", self.hash()?)))
    }

    pub fn load_split(&self, dataset: &DatasetPaths, split: &str) -> Result<DatasetSplit> {
        let path = match split {
            "train" => &dataset.train,
            "test" => &dataset.test,
            other => {
                return Err(Error::Config(format!(
                    "unknown split {other}; available: train, test"
                )))
            }
        };
        read_dataset(&self.resolve(path), &format!("{}/{split}", dataset.name))
    }

    pub fn load_contextual(&self, dataset: &DatasetPaths, split: &str) -> Result<Option<ContextualVectors>> {
        let path = match split {
            "train" => &dataset.contextual_train,
            "test" => &dataset.contextual_test,
            other => return Err(Error::Config(format!("unknown split {other}"))),
        };
        path.as_ref()
            .map(|p| ContextualVectors::read(&self.resolve(p)))
            .transpose()
    }

    /// Word vectors for models over `splits`: read once, restricted to the
    /// words the splits use.
    pub fn word_vectors_for(&self, splits: &[&DatasetSplit], input: &InputConfig) -> Result<WordVectors> {
        let Some(path) = &self.word_vectors else {
            log::warn!("no word_vectors configured; using random word vectors");
            return Ok(WordVectors::Random);
        };
        let wanted: HashSet<String> = splits
            .iter()
            .flat_map(|s| s.instances.iter())
            .flat_map(|i| i.tokens.iter().map(|t| input.normalize(&t.surface).into_owned()))
            .collect();
        let subset = VectorSubset::read(&self.resolve(path), Some(input.word_dim), |w| wanted.contains(w))?;
        log::info!("read {} of {} word vectors", subset.vectors.len(), wanted.len());
        Ok(WordVectors::Subset(Arc::new(subset)))
    }

    /// Grid inputs: shared model/training settings and every grid dataset.
    pub fn grid_inputs(&self) -> Result<(GridBase, Vec<GridDataset>)> {
        let mut datasets = Vec::new();
        for name in &self.grid.datasets {
            let d = self.dataset(name)?;
            let contextual = self.grid.modes.contains(&InputMode::Contextual);
            datasets.push(GridDataset {
                name: name.clone(),
                train: self.load_split(d, "train")?,
                test: self.load_split(d, "test")?,
                train_contextual: if contextual { self.load_contextual(d, "train")? } else { None },
                test_contextual: if contextual { self.load_contextual(d, "test")? } else { None },
            });
        }
        let glove_input = match self.model.input.mode {
            InputMode::Glove => self.model.input.clone(),
            InputMode::Contextual => InputConfig::glove(),
        };
        let contextual_input = match self.model.input.mode {
            InputMode::Contextual => self.model.input.clone(),
            InputMode::Glove => InputConfig::contextual(0),
        };
        let word_vectors = if self.grid.modes.contains(&InputMode::Glove) {
            let splits: Vec<&DatasetSplit> = datasets.iter().flat_map(|d| [&d.train, &d.test]).collect();
            self.word_vectors_for(&splits, &glove_input)?
        } else {
            WordVectors::Random
        };
        let base = GridBase {
            glove_input,
            contextual_input,
            encoders: vec![self.model.encoder.clone()],
            gcn_normalize: self.model.gcn.normalize,
            glove_train: self.train_config(InputMode::Glove, self.seed),
            contextual_train: self.train_config(InputMode::Contextual, self.seed),
            word_vectors,
        };
        Ok((base, datasets))
    }
}
