use ndarray::Array2;
use rand::Rng;

use crate::autograd::{Tape, Var};
use crate::params::{xavier, Matrix, ParamId, ParamStore};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub(crate) struct Linear {
    pub(crate) weight: ParamId,
    pub(crate) bias: ParamId,
}

impl Linear {
    pub(crate) fn new<R: Rng>(
        name: &str,
        input: usize,
        output: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Self {
        Linear {
            weight: store.add(format!("{name}.w"), xavier(rng, input, output), true),
            bias: store.add(format!("{name}.b"), Array2::zeros((1, output)), true),
        }
    }

    pub(crate) fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let y = tape.matmul(x, w);
        tape.add_row(y, b)
    }
}

#[derive(Clone, Debug)]
struct LayerNorm {
    gain: ParamId,
    bias: ParamId,
}

impl LayerNorm {
    fn new(name: &str, dim: usize, store: &mut ParamStore) -> Self {
        LayerNorm {
            gain: store.add(format!("{name}.g"), Array2::ones((1, dim)), true),
            bias: store.add(format!("{name}.b"), Array2::zeros((1, dim)), true),
        }
    }

    fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let normed = tape.layer_norm(x, LN_EPS);
        let g = tape.param(self.gain);
        let b = tape.param(self.bias);
        let scaled = tape.mul_row(normed, g);
        tape.add_row(scaled, b)
    }
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    query: Linear,
    key: Linear,
    value: Linear,
    out: Linear,
    norm1: LayerNorm,
    ff1: Linear,
    ff2: Linear,
    norm2: LayerNorm,
}

/// Linear input projection followed by post-norm self-attention layers.
/// There is no positional encoding: order information enters only through
/// the input channels.
#[derive(Clone, Debug)]
pub struct Transformer {
    input: Linear,
    layers: Vec<EncoderLayer>,
    heads: usize,
    model_dim: usize,
}

impl Transformer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        prefix: &str,
        input_dim: usize,
        model_dim: usize,
        heads: usize,
        ff_dim: usize,
        num_layers: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Self {
        let input = Linear::new(&format!("{prefix}.in"), input_dim, model_dim, store, rng);
        let layers = (0..num_layers)
            .map(|l| {
                let p = format!("{prefix}.layer{l}");
                EncoderLayer {
                    query: Linear::new(&format!("{p}.q"), model_dim, model_dim, store, rng),
                    key: Linear::new(&format!("{p}.k"), model_dim, model_dim, store, rng),
                    value: Linear::new(&format!("{p}.v"), model_dim, model_dim, store, rng),
                    out: Linear::new(&format!("{p}.o"), model_dim, model_dim, store, rng),
                    norm1: LayerNorm::new(&format!("{p}.ln1"), model_dim, store),
                    ff1: Linear::new(&format!("{p}.ff1"), model_dim, ff_dim, store, rng),
                    ff2: Linear::new(&format!("{p}.ff2"), ff_dim, model_dim, store, rng),
                    norm2: LayerNorm::new(&format!("{p}.ln2"), model_dim, store),
                }
            })
            .collect();
        Transformer {
            input,
            layers,
            heads,
            model_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.model_dim
    }

    /// Encodes `x`; when `attention` is given, every head's `n × n` weight
    /// matrix is pushed to it, layer by layer.
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, mut attention: Option<&mut Vec<Matrix>>) -> Var {
        let head_dim = self.model_dim / self.heads;
        let scale = 1.0 / (head_dim as f64).sqrt();
        let mut h = self.input.forward(tape, x);
        for layer in &self.layers {
            let q = layer.query.forward(tape, h);
            let k = layer.key.forward(tape, h);
            let v = layer.value.forward(tape, h);
            let mut heads = Vec::with_capacity(self.heads);
            for hd in 0..self.heads {
                let (a, b) = (hd * head_dim, (hd + 1) * head_dim);
                let qh = tape.slice_cols(q, a, b);
                let kh = tape.slice_cols(k, a, b);
                let vh = tape.slice_cols(v, a, b);
                let scores = tape.matmul_t(qh, kh);
                let scores = tape.affine(scores, scale, 0.0);
                let weights = tape.softmax_rows(scores);
                if let Some(out) = attention.as_deref_mut() {
                    out.push(tape.value(weights).to_owned());
                }
                heads.push(tape.matmul(weights, vh));
            }
            let joined = if heads.len() == 1 {
                heads[0]
            } else {
                tape.concat_cols(&heads)
            };
            let attended = layer.out.forward(tape, joined);
            let res = tape.add(h, attended);
            h = layer.norm1.forward(tape, res);
            let ff = layer.ff1.forward(tape, h);
            let ff = tape.relu(ff);
            let ff = layer.ff2.forward(tape, ff);
            let res = tape.add(h, ff);
            h = layer.norm2.forward(tape, res);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_token_attends_to_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let tr = Transformer::new("t", 5, 8, 2, 16, 2, &mut store, &mut rng);
        let mut tape = Tape::new(&store);
        let x = tape.input(Array2::from_elem((1, 5), 0.7));
        let mut attn = Vec::new();
        let h = tr.forward(&mut tape, x, Some(&mut attn));
        assert_eq!(tape.shape(h), (1, 8));
        assert_eq!(attn.len(), 4);
        for a in attn {
            assert_eq!(a, Array2::from_elem((1, 1), 1.0));
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let tr = Transformer::new("t", 3, 4, 2, 8, 1, &mut store, &mut rng);
        let mut tape = Tape::new(&store);
        let x = tape.input(crate::params::uniform(&mut rng, 5, 3, 1.0));
        let mut attn = Vec::new();
        tr.forward(&mut tape, x, Some(&mut attn));
        for a in attn {
            for row in a.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }
}
