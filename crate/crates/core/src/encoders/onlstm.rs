//! Ordered-neurons LSTM.
//!
//! Master forget and input gates are computed at chunk resolution with
//! `cumax = cumsum ∘ softmax`, expanded to the hidden width, and modulate the
//! ordinary LSTM gates:
//!
//! ```text
//! mf = cumax(z_mf)          mi = 1 - cumax(z_mi)
//! w  = mf * mi
//! f' = f * w + (mf - w)     i' = i * w + (mi - w)
//! c  = f' * c_prev + i' * tanh(z_c)
//! h  = o * tanh(c)
//! ```

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::Rng;

use crate::autograd::{softmax_rows, Tape, Var};
use crate::error::{Error, Result};
use crate::params::{xavier, ParamId, ParamStore};

/// Cumulative softmax of a vector: non-decreasing, ending at 1.
pub fn cumax(x: ArrayView1<f64>) -> Array1<f64> {
    let p = softmax_rows(x.insert_axis(ndarray::Axis(0)));
    let mut acc = 0.0;
    p.row(0)
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Column layout of the gate pre-activations: `[mf | mi | f | i | o | c]`,
/// master blocks `levels` wide and the rest `hidden` wide.
#[derive(Clone, Debug)]
pub struct OnLstmCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
    pub chunk_size: usize,
}

impl OnLstmCell {
    pub fn new<R: Rng>(
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        chunk_size: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        if chunk_size == 0 || !hidden.is_multiple_of(chunk_size) {
            return Err(Error::Config(format!(
                "ON-LSTM chunk size {chunk_size} does not divide hidden size {hidden}"
            )));
        }
        let levels = hidden / chunk_size;
        let width = 2 * levels + 4 * hidden;
        let mut bias = Array2::zeros((1, width));
        let f0 = 2 * levels;
        bias.slice_mut(s![.., f0..f0 + hidden]).fill(1.0);
        Ok(OnLstmCell {
            w_x: store.add(format!("{prefix}.w_x"), xavier(rng, input_dim, width), true),
            w_h: store.add(format!("{prefix}.w_h"), xavier(rng, hidden, width), true),
            bias: store.add(format!("{prefix}.b"), bias, true),
            hidden,
            chunk_size,
        })
    }

    pub fn levels(&self) -> usize {
        self.hidden / self.chunk_size
    }

    pub fn run(&self, tape: &mut Tape<'_>, x: Var, reverse: bool) -> Vec<Var> {
        let n = tape.shape(x).0;
        let hd = self.hidden;
        let lv = self.levels();
        let w_x = tape.param(self.w_x);
        let w_h = tape.param(self.w_h);
        let b = tape.param(self.bias);
        let proj = tape.matmul(x, w_x);
        let proj = tape.add_row(proj, b);

        let mut h = tape.input(Array2::zeros((1, hd)));
        let mut c = tape.input(Array2::zeros((1, hd)));
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

            let z_mf = tape.slice_cols(z, 0, lv);
            let z_mi = tape.slice_cols(z, lv, 2 * lv);
            let p_mf = tape.softmax_rows(z_mf);
            let mf = tape.cumsum_rows(p_mf);
            let p_mi = tape.softmax_rows(z_mi);
            let cmi = tape.cumsum_rows(p_mi);
            let mi = tape.affine(cmi, -1.0, 1.0);
            let mf = tape.repeat_cols(mf, self.chunk_size);
            let mi = tape.repeat_cols(mi, self.chunk_size);

            let base = 2 * lv;
            let zf = tape.slice_cols(z, base, base + hd);
            let zi = tape.slice_cols(z, base + hd, base + 2 * hd);
            let zo = tape.slice_cols(z, base + 2 * hd, base + 3 * hd);
            let zc = tape.slice_cols(z, base + 3 * hd, base + 4 * hd);
            let f = tape.sigmoid(zf);
            let i = tape.sigmoid(zi);
            let o = tape.sigmoid(zo);
            let cand = tape.tanh(zc);

            let overlap = tape.mul(mf, mi);
            let f_ov = tape.mul(f, overlap);
            let mf_rest = tape.sub(mf, overlap);
            let f_hat = tape.add(f_ov, mf_rest);
            let i_ov = tape.mul(i, overlap);
            let mi_rest = tape.sub(mi, overlap);
            let i_hat = tape.add(i_ov, mi_rest);

            let keep = tape.mul(f_hat, c);
            let write = tape.mul(i_hat, cand);
            c = tape.add(keep, write);
            let tc = tape.tanh(c);
            h = tape.mul(o, tc);
            out[t] = h;
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct BiOnLstm {
    pub forward: OnLstmCell,
    pub backward: OnLstmCell,
}

impl BiOnLstm {
    pub fn new<R: Rng>(
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        chunk_size: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiOnLstm {
            forward: OnLstmCell::new(&format!("{prefix}.fwd"), input_dim, hidden, chunk_size, store, rng)?,
            backward: OnLstmCell::new(&format!("{prefix}.bwd"), input_dim, hidden, chunk_size, store, rng)?,
        })
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
