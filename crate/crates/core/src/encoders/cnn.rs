use ndarray::Array2;
use rand::Rng;

use crate::autograd::{Tape, Var};
use crate::params::{xavier, ParamId, ParamStore};

/// One filter bank per window width; each slides over zero-padded token
/// windows, applies ReLU, and the banks are concatenated per token.
#[derive(Clone, Debug)]
pub struct Cnn {
    pub(crate) banks: Vec<FilterBank>,
}

#[derive(Clone, Debug)]
pub(crate) struct FilterBank {
    pub(crate) width: usize,
    pub(crate) weight: ParamId,
    pub(crate) bias: ParamId,
    pub(crate) channels: usize,
}

impl FilterBank {
    /// Zero rows before the first token; the remainder go after the last.
    pub(crate) fn left_pad(&self) -> usize {
        (self.width - 1) / 2
    }
}

impl Cnn {
    pub fn new<R: Rng>(
        prefix: &str,
        input_dim: usize,
        widths: &[usize],
        channels: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Self {
        let banks = widths
            .iter()
            .map(|&width| FilterBank {
                width,
                weight: store.add(
                    format!("{prefix}.conv{width}.w"),
                    xavier(rng, width * input_dim, channels),
                    true,
                ),
                bias: store.add(
                    format!("{prefix}.conv{width}.b"),
                    Array2::zeros((1, channels)),
                    true,
                ),
                channels,
            })
            .collect();
        Cnn { banks }
    }

    pub fn output_dim(&self) -> usize {
        self.banks.iter().map(|b| b.channels).sum()
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let outs: Vec<Var> = self
            .banks
            .iter()
            .map(|bank| {
                let windows = tape.unfold(x, bank.width, bank.left_pad());
                let w = tape.param(bank.weight);
                let b = tape.param(bank.bias);
                let z = tape.matmul(windows, w);
                let z = tape.add_row(z, b);
                tape.relu(z)
            })
            .collect();
        if outs.len() == 1 {
            outs[0]
        } else {
            tape.concat_cols(&outs)
        }
    }
}
