//! Featurizer → encoder → optional GCN → linear + softmax over {O, B, I}.

mod checkpoint;
mod classify;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use classify::{argmax_labels, classify, loss};
pub use train::{train, EpochLog, TrainConfig, TrainOutcome};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::{softmax_rows, Tape, Var};
use crate::corpus::{DatasetSplit, Instance, Label};
use crate::encoders::{Encoder, EncoderConfig, EncoderKind};
use crate::error::{Error, Result};
use crate::featurize::{
    load_pretrained_vectors, ContextualVectors, EmbeddingTable, Featurizer, InputConfig, InputMode, VectorSubset, Vocab,
};
use crate::gcn::{build_adjacency, Gcn, GcnConfig};
use crate::params::{Matrix, ParamStore};

pub const NUM_LABELS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input: InputConfig,
    pub encoder: EncoderConfig,
    pub gcn: GcnConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input: InputConfig::glove(),
            encoder: EncoderConfig::for_kind(EncoderKind::BiLstm),
            gcn: GcnConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.input.validate()?;
        self.encoder.validate()
    }

    /// Display name in the `BiLSTM+GCN(G)` style.
    pub fn display_name(&self) -> String {
        format!(
            "{}{}({})",
            self.encoder.kind.display_name(),
            if self.gcn.enabled() { "+GCN" } else { "" },
            self.input.mode.suffix()
        )
    }
}

/// Where the word table comes from in mode G.
#[derive(Clone, Debug)]
pub enum WordVectors {
    /// Text vector file, one `word f1 … fD` per line.
    File(PathBuf),
    /// Vectors already read from a file, shared between models.
    Subset(Arc<VectorSubset>),
    /// Frozen random vectors; for tests and synthetic data.
    Random,
}

#[derive(Clone, Debug)]
pub struct TowModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub featurizer: Featurizer,
    pub encoder: Encoder,
    pub gcn: Gcn,
    classifier: crate::encoders::Linear,
    pub seed: u64,
}

impl TowModel {
    /// Fresh model with vocabularies collected from `splits`.
    pub fn initialize(
        config: ModelConfig,
        splits: &[&DatasetSplit],
        word_vectors: &WordVectors,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = Vocab::from_entries(splits.iter().flat_map(|s| {
            s.instances
                .iter()
                .flat_map(|i| i.tokens.iter().map(|t| config.input.normalize(&t.surface).into_owned()))
        }));
        let pos_tags = Vocab::from_entries(
            splits
                .iter()
                .flat_map(|s| s.instances.iter().flat_map(|i| i.tokens.iter().filter_map(|t| t.pos_tag.clone()))),
        );
        let table = match config.input.mode {
            InputMode::Contextual => None,
            InputMode::Glove => Some(match word_vectors {
                WordVectors::File(path) => {
                    let pv = load_pretrained_vectors(
                        path,
                        &words,
                        Some(config.input.word_dim),
                        config.input.train_word_vectors,
                        &mut rng,
                    )?;
                    log::info!(
                        "{} of {} words found in {}",
                        pv.found,
                        words.len() - 1,
                        path.display()
                    );
                    pv.table
                }
                WordVectors::Subset(subset) => {
                    if subset.dim != config.input.word_dim {
                        return Err(Error::Config(format!(
                            "word vectors have {} dimensions, config expects {}",
                            subset.dim, config.input.word_dim
                        )));
                    }
                    subset.table_for(&words, config.input.train_word_vectors, &mut rng).table
                }
                WordVectors::Random => EmbeddingTable::random(
                    &mut rng,
                    words.len(),
                    config.input.word_dim,
                    0.25,
                    config.input.train_word_vectors,
                ),
            }),
        };
        Self::build(config, words, pos_tags, table, seed, &mut rng)
    }

    pub(crate) fn build<R: Rng>(
        config: ModelConfig,
        words: Vocab,
        pos_tags: Vocab,
        table: Option<EmbeddingTable>,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut store = ParamStore::new();
        let featurizer = Featurizer::new(config.input.clone(), words, pos_tags, table, &mut store, rng)?;
        let encoder = Encoder::new(&config.encoder, featurizer.feature_dim(), &mut store, rng)?;
        let h = encoder.output_dim();
        let gcn = Gcn::new("gcn", h, &config.gcn, &mut store, rng);
        let classifier = crate::encoders::Linear::new("cls", h, NUM_LABELS, &mut store, rng);
        Ok(TowModel {
            config,
            store,
            featurizer,
            encoder,
            gcn,
            classifier,
            seed,
        })
    }

    /// Records the label logits for `inst` on `tape`.
    pub fn logits<R: Rng>(
        &self,
        tape: &mut Tape<'_>,
        inst: &Instance,
        contextual: Option<&Matrix>,
        dropout_rng: Option<&mut R>,
    ) -> Result<Var> {
        let x = self.featurizer.forward(tape, inst, contextual, dropout_rng)?;
        let mut h = self.encoder.forward(tape, x);
        if self.gcn.layers() > 0 {
            let adjacency = build_adjacency(inst)?;
            h = self.gcn.forward(tape, h, &adjacency);
        }
        Ok(self.classifier.forward(tape, h))
    }

    fn contextual_for<'c>(
        &self,
        inst: &Instance,
        contextual: Option<&'c ContextualVectors>,
    ) -> Result<Option<&'c Matrix>> {
        if self.config.input.mode != InputMode::Contextual {
            return Ok(None);
        }
        let ctx = contextual.ok_or_else(|| {
            Error::Inference("contextual input requires a sidecar file".into())
        })?;
        ctx.get(&inst.sentence_id).map(Some).ok_or_else(|| {
            Error::Inference(format!(
                "sidecar has no vectors for sentence {}",
                inst.sentence_id
            ))
        })
    }

    /// `n × 3` label distribution in O, B, I column order.
    pub fn probabilities(&self, inst: &Instance, contextual: Option<&ContextualVectors>) -> Result<Matrix> {
        let ctx = self.contextual_for(inst, contextual)?;
        let mut tape = Tape::new(&self.store);
        let logits = self.logits::<ChaCha8Rng>(&mut tape, inst, ctx, None)?;
        Ok(softmax_rows(tape.value(logits)))
    }

    pub fn predict(&self, inst: &Instance, contextual: Option<&ContextualVectors>) -> Result<Vec<Label>> {
        let ctx = self.contextual_for(inst, contextual)?;
        let mut tape = Tape::new(&self.store);
        let logits = self.logits::<ChaCha8Rng>(&mut tape, inst, ctx, None)?;
        Ok(argmax_labels(tape.value(logits)))
    }

    /// Predictions for many instances, computed in parallel.
    pub fn predict_all(
        &self,
        instances: &[Instance],
        contextual: Option<&ContextualVectors>,
    ) -> Result<Vec<Vec<Label>>> {
        instances
            .par_iter()
            .map(|inst| self.predict(inst, contextual))
            .collect()
    }

    /// Summed token cross-entropy and its gradient, accumulated into `grads`.
    pub(crate) fn accumulate_gradient<R: Rng>(
        &self,
        inst: &Instance,
        contextual: Option<&ContextualVectors>,
        rng: &mut R,
        grads: &mut crate::params::GradStore,
    ) -> Result<f64> {
        let ctx = self.contextual_for(inst, contextual)?;
        let mut tape = Tape::new(&self.store);
        let logits = self.logits(&mut tape, inst, ctx, Some(rng))?;
        let targets: Vec<usize> = inst.labels.iter().map(|l| l.index()).collect();
        let loss = tape.softmax_cross_entropy(logits, &targets);
        let value = tape.scalar(loss);
        let g = tape.backward(loss);
        tape.accumulate_params(&g, grads);
        Ok(value)
    }

    pub fn classifier_params(&self) -> (&Matrix, &Matrix) {
        (
            self.store.get(self.classifier.weight),
            self.store.get(self.classifier.bias),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Checkpoint::from_model(self).write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::read(path)?.into_model()
    }

    pub(crate) fn empty_word_table(words: &Vocab, dim: usize) -> EmbeddingTable {
        EmbeddingTable {
            weights: Array2::zeros((words.len(), dim)),
            trainable: false,
        }
    }
}
