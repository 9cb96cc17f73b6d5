//! Per-token input representations: word vectors or contextual vectors,
//! concatenated with position (POSN) and part-of-speech (POST) embeddings.

mod sidecar;
mod vectors;

pub use sidecar::{ContextualVectors, SIDECAR_MAGIC, SIDECAR_VERSION};
pub use vectors::{load_pretrained_vectors, EmbeddingTable, PretrainedVectors, VectorSubset, Vocab, UNK};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::corpus::{Instance, Span};
use crate::error::{Error, Result};
use crate::params::{Matrix, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputMode {
    /// Pretrained word vectors + POST + POSN.
    #[serde(rename = "G")]
    Glove,
    /// Precomputed contextual vectors + POSN.
    #[serde(rename = "B")]
    Contextual,
}

impl InputMode {
    pub fn suffix(self) -> &'static str {
        match self {
            InputMode::Glove => "G",
            InputMode::Contextual => "B",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputConfig {
    pub mode: InputMode,
    pub use_posn: bool,
    pub use_post: bool,
    pub word_dim: usize,
    /// Width of the contextual vectors; taken from the sidecar in mode B.
    pub contextual_dim: usize,
    pub posn_dim: usize,
    pub post_dim: usize,
    /// Drop probability applied to the concatenated input during training.
    pub dropout: f64,
    /// Relative distances are clamped to `[-max_distance, max_distance]`.
    pub max_distance: usize,
    pub train_word_vectors: bool,
    pub lowercase: bool,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self::glove()
    }
}

impl InputConfig {
    pub fn glove() -> Self {
        InputConfig {
            mode: InputMode::Glove,
            use_posn: true,
            use_post: true,
            word_dim: 300,
            contextual_dim: 0,
            posn_dim: 30,
            post_dim: 30,
            dropout: 0.8,
            max_distance: 100,
            train_word_vectors: false,
            lowercase: false,
        }
    }

    pub fn contextual(contextual_dim: usize) -> Self {
        InputConfig {
            mode: InputMode::Contextual,
            use_post: false,
            contextual_dim,
            posn_dim: 100,
            ..Self::glove()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == InputMode::Contextual && self.use_post {
            return Err(Error::Config(
                "contextual input does not use POS-tag embeddings".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        let base = match self.mode {
            InputMode::Glove => self.word_dim,
            InputMode::Contextual => self.contextual_dim,
        };
        if base == 0
            || (self.use_posn && self.posn_dim == 0)
            || (self.use_post && self.post_dim == 0)
        {
            return Err(Error::Config("embedding dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Column count of the feature matrix.
    pub fn feature_dim(&self) -> usize {
        let base = match self.mode {
            InputMode::Glove => self.word_dim,
            InputMode::Contextual => self.contextual_dim,
        };
        base + if self.use_posn { self.posn_dim } else { 0 }
            + if self.use_post && self.mode == InputMode::Glove {
                self.post_dim
            } else {
                0
            }
    }

    pub fn normalize<'a>(&self, word: &'a str) -> std::borrow::Cow<'a, str> {
        if self.lowercase {
            word.to_lowercase().into()
        } else {
            word.into()
        }
    }
}

/// Signed distance of every token to the target span: 0 inside the span,
/// otherwise the offset to the nearest span token (negative to the left).
pub fn relative_distances(n: usize, target: Span) -> Vec<i64> {
    (0..n)
        .map(|i| {
            if i < target.start {
                i as i64 - target.start as i64
            } else if i >= target.end {
                i as i64 - (target.end as i64 - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Row of the position table for a distance, after clamping.
pub fn position_index(distance: i64, max_distance: usize) -> usize {
    let m = max_distance as i64;
    (distance.clamp(-m, m) + m) as usize
}

/// Per-token input matrix, `n × feature_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Embedding tables and vocabularies for one input configuration.
#[derive(Clone, Debug)]
pub struct Featurizer {
    pub config: InputConfig,
    pub words: Vocab,
    pub pos_tags: Vocab,
    word: Option<ParamId>,
    posn: Option<ParamId>,
    post: Option<ParamId>,
}

impl Featurizer {
    /// Registers the active tables in `store`. Without `word_table`, the word
    /// table starts at zero (to be filled from a checkpoint).
    pub fn new<R: Rng>(
        config: InputConfig,
        words: Vocab,
        pos_tags: Vocab,
        word_table: Option<EmbeddingTable>,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let word = match config.mode {
            InputMode::Glove => {
                let weights = match word_table {
                    Some(t) => {
                        if t.dim() != config.word_dim || t.num_entries() != words.len() {
                            return Err(Error::Config(format!(
                                "word table is {}×{}, expected {}×{}",
                                t.num_entries(),
                                t.dim(),
                                words.len(),
                                config.word_dim
                            )));
                        }
                        t.weights
                    }
                    None => Array2::zeros((words.len(), config.word_dim)),
                };
                Some(store.add("embed.word", weights, config.train_word_vectors))
            }
            InputMode::Contextual => None,
        };
        let posn = config.use_posn.then(|| {
            let rows = 2 * config.max_distance + 1;
            let t = EmbeddingTable::random(rng, rows, config.posn_dim, 0.1, true);
            store.add("embed.posn", t.weights, true)
        });
        let post = (config.use_post && config.mode == InputMode::Glove).then(|| {
            let t = EmbeddingTable::random(rng, pos_tags.len(), config.post_dim, 0.1, true);
            store.add("embed.post", t.weights, true)
        });
        Ok(Featurizer {
            config,
            words,
            pos_tags,
            word,
            posn,
            post,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    /// Records the feature matrix of `inst` on the tape. With `dropout_rng`
    /// the configured dropout is applied (training); without it the features
    /// are deterministic.
    pub fn forward<R: Rng>(
        &self,
        tape: &mut Tape<'_>,
        inst: &Instance,
        contextual: Option<&Matrix>,
        dropout_rng: Option<&mut R>,
    ) -> Result<Var> {
        let n = inst.len();
        let mut parts = Vec::with_capacity(3);
        match self.config.mode {
            InputMode::Glove => {
                let id = self
                    .word
                    .ok_or_else(|| Error::Config("word table missing".into()))?;
                let rows = inst
                    .tokens
                    .iter()
                    .map(|t| self.words.lookup(&self.config.normalize(&t.surface)))
                    .collect();
                parts.push(tape.embed(id, rows));
            }
            InputMode::Contextual => {
                let ctx = contextual.ok_or_else(|| {
                    Error::Feature(format!(
                        "no contextual vectors for sentence {}",
                        inst.sentence_id
                    ))
                })?;
                if ctx.nrows() != n || ctx.ncols() != self.config.contextual_dim {
                    return Err(Error::Feature(format!(
                        "contextual matrix for sentence {} is {}×{}, expected {}×{}",
                        inst.sentence_id,
                        ctx.nrows(),
                        ctx.ncols(),
                        n,
                        self.config.contextual_dim
                    )));
                }
                parts.push(tape.input(ctx.clone()));
            }
        }
        if self.config.use_posn {
            let id = self
                .posn
                .ok_or_else(|| Error::Config("position table missing".into()))?;
            let rows = relative_distances(n, inst.target)
                .into_iter()
                .map(|d| position_index(d, self.config.max_distance))
                .collect();
            parts.push(tape.embed(id, rows));
        }
        if self.config.use_post && self.config.mode == InputMode::Glove {
            let id = self
                .post
                .ok_or_else(|| Error::Config("POS-tag table missing".into()))?;
            let rows = inst
                .tokens
                .iter()
                .map(|t| {
                    t.pos_tag
                        .as_deref()
                        .map(|p| self.pos_tags.lookup(p))
                        .ok_or_else(|| {
                            Error::Precondition(format!(
                                "sentence {} has no POS tags",
                                inst.sentence_id
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            parts.push(tape.embed(id, rows));
        }
        let x = if parts.len() == 1 {
            parts[0]
        } else {
            tape.concat_cols(&parts)
        };
        match dropout_rng {
            Some(rng) if self.config.dropout > 0.0 => {
                let keep = 1.0 - self.config.dropout;
                let mask = Array2::from_shape_fn(tape.shape(x), |_| {
                    if rng.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                let m = tape.input(mask);
                Ok(tape.mul(x, m))
            }
            _ => Ok(x),
        }
    }

    /// Feature matrix of `inst` outside of any training graph.
    pub fn build_features<R: Rng>(
        &self,
        store: &ParamStore,
        inst: &Instance,
        contextual: Option<&Matrix>,
        dropout_rng: Option<&mut R>,
    ) -> Result<FeatureMatrix> {
        let mut tape = Tape::new(store);
        let x = self.forward(&mut tape, inst, contextual, dropout_rng)?;
        Ok(FeatureMatrix {
            values: tape.value(x).to_owned(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distances_single_and_multi_token() {
        assert_eq!(relative_distances(5, Span::new(1, 2)), vec![-1, 0, 1, 2, 3]);
        assert_eq!(relative_distances(5, Span::new(1, 3)), vec![-1, 0, 0, 1, 2]);
        assert_eq!(relative_distances(3, Span::new(0, 3)), vec![0, 0, 0]);
    }

    #[test]
    fn clamps_position_index() {
        assert_eq!(position_index(0, 5), 5);
        assert_eq!(position_index(-9, 5), 0);
        assert_eq!(position_index(9, 5), 10);
    }

    #[test]
    fn contextual_mode_rejects_post() {
        let mut cfg = InputConfig::contextual(768);
        cfg.use_post = true;
        assert!(cfg.validate().is_err());
    }

    fn sample() -> Instance {
        let mut inst = Instance::new(
            "s",
            &["the", "food", "is", "good"],
            Span::new(1, 2),
            vec![Label::O, Label::O, Label::O, Label::B],
        )
        .unwrap();
        for t in &mut inst.tokens {
            t.pos_tag = Some("NN".into());
        }
        inst
    }

    fn small_glove(use_posn: bool, use_post: bool) -> InputConfig {
        InputConfig {
            word_dim: 6,
            posn_dim: 3,
            post_dim: 2,
            max_distance: 4,
            use_posn,
            use_post,
            dropout: 0.0,
            ..InputConfig::glove()
        }
    }

    #[test]
    fn glove_feature_width_and_contents() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let words = Vocab::from_entries(["the", "food", "is", "good"]);
        let table = EmbeddingTable::random(&mut rng, words.len(), 6, 1.0, false);
        let expect = table.weights.clone();
        let fz = Featurizer::new(
            small_glove(true, true),
            words,
            Vocab::from_entries(["NN"]),
            Some(table),
            &mut store,
            &mut rng,
        )
        .unwrap();
        let fm = fz
            .build_features::<ChaCha8Rng>(&store, &sample(), None, None)
            .unwrap();
        assert_eq!(fm.ncols(), 11);
        assert_eq!(fm.nrows(), 4);
        assert_eq!(fm.values.row(3).slice(ndarray::s![..6]), expect.row(4));
    }

    #[test]
    fn contextual_row_mismatch_is_feature_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let fz = Featurizer::new(
            InputConfig::contextual(5),
            Vocab::default(),
            Vocab::default(),
            None,
            &mut store,
            &mut rng,
        )
        .unwrap();
        let ctx = Array2::zeros((3, 5));
        let err = fz
            .build_features::<ChaCha8Rng>(&store, &sample(), Some(&ctx), None)
            .unwrap_err();
        assert!(matches!(err, Error::Feature(_)));
        let ctx = Array2::zeros((4, 5));
        let fm = fz
            .build_features::<ChaCha8Rng>(&store, &sample(), Some(&ctx), None)
            .unwrap();
        assert_eq!(fm.ncols(), 105);
    }

    #[test]
    fn dropout_zeroes_and_rescales() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let words = Vocab::from_entries(["the", "food", "is", "good"]);
        let table = EmbeddingTable::random(&mut rng, words.len(), 6, 1.0, false);
        let mut cfg = small_glove(false, false);
        cfg.dropout = 0.5;
        let fz = Featurizer::new(cfg, words, Vocab::default(), Some(table), &mut store, &mut rng)
            .unwrap();
        let clean = fz
            .build_features::<ChaCha8Rng>(&store, &sample(), None, None)
            .unwrap();
        let dropped = fz
            .build_features(&store, &sample(), None, Some(&mut rng))
            .unwrap();
        for (c, d) in clean.values.iter().zip(dropped.values.iter()) {
            assert!(*d == 0.0 || (d - 2.0 * c).abs() < 1e-12);
        }
        assert!(dropped.values.iter().any(|v| *v == 0.0));
    }
}
