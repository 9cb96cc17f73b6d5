//! Versioned JSON checkpoint: model config, vocabularies, seed and every
//! parameter matrix by name.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featurize::{InputMode, Vocab};

use super::{ModelConfig, TowModel};

pub const CHECKPOINT_FORMAT: &str = "towe-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlob {
    pub name: String,
    pub shape: [usize; 2],
    pub trainable: bool,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabHashes {
    pub words: String,
    pub pos_tags: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: ModelConfig,
    pub words: Vocab,
    pub pos_tags: Vocab,
    pub vocab_hashes: VocabHashes,
    pub params: Vec<ParamBlob>,
}

pub(crate) fn vocab_hash(v: &Vocab) -> String {
    let mut hasher = Sha256::new();
    for e in v.entries() {
        hasher.update(e.as_bytes());
        hasher.update([0u8]);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Checkpoint {
    pub fn from_model(model: &TowModel) -> Self {
        let words = model.featurizer.words.clone();
        let pos_tags = model.featurizer.pos_tags.clone();
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: model.seed,
            config: model.config.clone(),
            vocab_hashes: VocabHashes {
                words: vocab_hash(&words),
                pos_tags: vocab_hash(&pos_tags),
            },
            words,
            pos_tags,
            params: model
                .store
                .iter()
                .map(|(_, p)| ParamBlob {
                    name: p.name.clone(),
                    shape: [p.value.nrows(), p.value.ncols()],
                    trainable: p.trainable,
                    data: p.value.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn into_model(mut self) -> Result<TowModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        self.words.reindex();
        self.pos_tags.reindex();
        if vocab_hash(&self.words) != self.vocab_hashes.words
            || vocab_hash(&self.pos_tags) != self.vocab_hashes.pos_tags
        {
            return Err(Error::Checkpoint("vocabulary hash mismatch".into()));
        }
        let table = (self.config.input.mode == InputMode::Glove)
            .then(|| TowModel::empty_word_table(&self.words, self.config.input.word_dim));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut model = TowModel::build(
            self.config,
            self.words,
            self.pos_tags,
            table,
            self.seed,
            &mut rng,
        )?;
        if model.store.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} parameters, model expects {}",
                self.params.len(),
                model.store.len()
            )));
        }
        for blob in self.params {
            let id = model
                .store
                .id(&blob.name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown parameter {}", blob.name)))?;
            let expected = model.store.get(id).dim();
            if (blob.shape[0], blob.shape[1]) != expected {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    blob.name, blob.shape, expected
                )));
            }
            let value = Array2::from_shape_vec(expected, blob.data)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            *model.store.get_mut(id) = value;
        }
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
