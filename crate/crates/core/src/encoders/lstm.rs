use ndarray::{s, Array2};
use rand::Rng;

use crate::autograd::{Tape, Var};
use crate::params::{xavier, ParamId, ParamStore};

/// Single-direction LSTM. Gate blocks are ordered input, forget, cell,
/// output along the columns of the weight matrices.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Self {
        let mut bias = Array2::zeros((1, 4 * hidden));
        bias.slice_mut(s![.., hidden..2 * hidden]).fill(1.0);
        LstmCell {
            w_x: store.add(format!("{prefix}.w_x"), xavier(rng, input_dim, 4 * hidden), true),
            w_h: store.add(format!("{prefix}.w_h"), xavier(rng, hidden, 4 * hidden), true),
            bias: store.add(format!("{prefix}.b"), bias, true),
            hidden,
        }
    }

    /// Runs the recurrence over the rows of `x`, right to left when
    /// `reverse`. Returns the hidden states in token order.
    pub fn run(&self, tape: &mut Tape<'_>, x: Var, reverse: bool) -> Vec<Var> {
        let n = tape.shape(x).0;
        let h_dim = self.hidden;
        let w_x = tape.param(self.w_x);
        let w_h = tape.param(self.w_h);
        let b = tape.param(self.bias);
        let proj = tape.matmul(x, w_x);
        let proj = tape.add_row(proj, b);

        let mut h = tape.input(Array2::zeros((1, h_dim)));
        let mut c = tape.input(Array2::zeros((1, h_dim)));
        let mut out = vec![h; n];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..n).rev())
        } else {
            Box::new(0..n)
        };
        for t in order {
            let xt = tape.slice_rows(proj, t, t + 1);
            let rec = tape.matmul(h, w_h);
            let z = tape.add(xt, rec);
            let zi = tape.slice_cols(z, 0, h_dim);
            let zf = tape.slice_cols(z, h_dim, 2 * h_dim);
            let zg = tape.slice_cols(z, 2 * h_dim, 3 * h_dim);
            let zo = tape.slice_cols(z, 3 * h_dim, 4 * h_dim);
            let i = tape.sigmoid(zi);
            let f = tape.sigmoid(zf);
            let g = tape.tanh(zg);
            let o = tape.sigmoid(zo);
            let keep = tape.mul(f, c);
            let write = tape.mul(i, g);
            c = tape.add(keep, write);
            let tc = tape.tanh(c);
            h = tape.mul(o, tc);
            out[t] = h;
        }
        out
    }
}

/// Forward and backward LSTMs, concatenated per token.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn new<R: Rng>(
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Self {
        BiLstm {
            forward: LstmCell::new(&format!("{prefix}.fwd"), input_dim, hidden, store, rng),
            backward: LstmCell::new(&format!("{prefix}.bwd"), input_dim, hidden, store, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let fw = self.forward.run(tape, x, false);
        let bw = self.backward.run(tape, x, true);
        let f = tape.concat_rows(&fw);
        let b = tape.concat_rows(&bw);
        tape.concat_cols(&[f, b])
    }
}
