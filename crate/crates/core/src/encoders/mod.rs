//! Text encoders mapping a feature matrix to per-token hidden states.

mod cnn;
mod lstm;
mod onlstm;
mod transformer;

pub use cnn::Cnn;
pub use lstm::{BiLstm, LstmCell};
pub use onlstm::{cumax, BiOnLstm, OnLstmCell};
pub use transformer::Transformer;
pub(crate) use transformer::Linear;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::featurize::FeatureMatrix;
use crate::params::{Matrix, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Cnn,
    Transformer,
    #[serde(alias = "bilstm")]
    BiLstm,
    #[serde(alias = "onlstm")]
    OnLstm,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 4] = [
        EncoderKind::Transformer,
        EncoderKind::Cnn,
        EncoderKind::OnLstm,
        EncoderKind::BiLstm,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            EncoderKind::Cnn => "CNN",
            EncoderKind::Transformer => "Transformer",
            EncoderKind::BiLstm => "BiLSTM",
            EncoderKind::OnLstm => "ON-LSTM",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    /// Total width for CNN and Transformer, per-direction width for the
    /// recurrent encoders.
    pub hidden_dim: usize,
    pub cnn_widths: Vec<usize>,
    pub transformer_layers: usize,
    pub transformer_heads: usize,
    pub transformer_ff_dim: usize,
    /// Hidden units per master-gate level in the ON-LSTM.
    pub onlstm_chunk_size: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::for_kind(EncoderKind::BiLstm)
    }
}

impl EncoderConfig {
    pub fn for_kind(kind: EncoderKind) -> Self {
        EncoderConfig {
            kind,
            hidden_dim: if kind == EncoderKind::Cnn { 300 } else { 200 },
            cnn_widths: vec![3, 4, 5],
            transformer_layers: 2,
            transformer_heads: 4,
            transformer_ff_dim: 400,
            onlstm_chunk_size: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        match self.kind {
            EncoderKind::Cnn => {
                if self.cnn_widths.is_empty() || self.cnn_widths.contains(&0) {
                    return Err(Error::Config("CNN needs positive filter widths".into()));
                }
                if !self.hidden_dim.is_multiple_of(self.cnn_widths.len()) {
                    return Err(Error::Config(format!(
                        "CNN hidden_dim {} not divisible by {} filter widths",
                        self.hidden_dim,
                        self.cnn_widths.len()
                    )));
                }
            }
            EncoderKind::Transformer => {
                if self.transformer_heads == 0 || !self.hidden_dim.is_multiple_of(self.transformer_heads) {
                    return Err(Error::Config(format!(
                        "transformer hidden_dim {} not divisible by {} heads",
                        self.hidden_dim, self.transformer_heads
                    )));
                }
                if self.transformer_ff_dim == 0 {
                    return Err(Error::Config("transformer_ff_dim must be positive".into()));
                }
            }
            EncoderKind::OnLstm => {
                if self.onlstm_chunk_size == 0 || !self.hidden_dim.is_multiple_of(self.onlstm_chunk_size) {
                    return Err(Error::Config(format!(
                        "ON-LSTM chunk size {} does not divide hidden_dim {}",
                        self.onlstm_chunk_size, self.hidden_dim
                    )));
                }
            }
            EncoderKind::BiLstm => {}
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            EncoderKind::Cnn | EncoderKind::Transformer => self.hidden_dim,
            EncoderKind::BiLstm | EncoderKind::OnLstm => 2 * self.hidden_dim,
        }
    }
}

/// Per-token encoder output, `n × h`.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenStates {
    pub values: Matrix,
}

#[derive(Clone, Debug)]
pub enum Encoder {
    Cnn(Cnn),
    Transformer(Transformer),
    BiLstm(BiLstm),
    OnLstm(BiOnLstm),
}

impl Encoder {
    pub fn new<R: Rng>(
        config: &EncoderConfig,
        input_dim: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        Ok(match config.kind {
            EncoderKind::Cnn => Encoder::Cnn(Cnn::new(
                "enc",
                input_dim,
                &config.cnn_widths,
                config.hidden_dim / config.cnn_widths.len(),
                store,
                rng,
            )),
            EncoderKind::Transformer => Encoder::Transformer(Transformer::new(
                "enc",
                input_dim,
                config.hidden_dim,
                config.transformer_heads,
                config.transformer_ff_dim,
                config.transformer_layers,
                store,
                rng,
            )),
            EncoderKind::BiLstm => {
                Encoder::BiLstm(BiLstm::new("enc", input_dim, config.hidden_dim, store, rng))
            }
            EncoderKind::OnLstm => Encoder::OnLstm(BiOnLstm::new(
                "enc",
                input_dim,
                config.hidden_dim,
                config.onlstm_chunk_size,
                store,
                rng,
            )?),
        })
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Cnn(e) => e.output_dim(),
            Encoder::Transformer(e) => e.output_dim(),
            Encoder::BiLstm(e) => e.output_dim(),
            Encoder::OnLstm(e) => e.output_dim(),
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        match self {
            Encoder::Cnn(e) => e.forward(tape, x),
            Encoder::Transformer(e) => e.forward(tape, x, None),
            Encoder::BiLstm(e) => e.forward(tape, x),
            Encoder::OnLstm(e) => e.forward(tape, x),
        }
    }

    pub fn encode(&self, store: &ParamStore, x: &FeatureMatrix) -> HiddenStates {
        let mut tape = Tape::new(store);
        let xv = tape.input(x.values.clone());
        let h = self.forward(&mut tape, xv);
        HiddenStates {
            values: tape.value(h).to_owned(),
        }
    }
}
