//! Encoders, GCN and classifier against direct scalar-loop implementations.

mod common;

use common::{random_matrix, rng};
use ndarray::Array2;
use towe::autograd::Tape;
use towe::encoders::{Encoder, EncoderConfig, EncoderKind, HiddenStates};
use towe::featurize::FeatureMatrix;
use towe::gcn::{gcn_layer, gcn_stack, AdjacencyMatrix};
use towe::model::classify;
use towe::params::ParamStore;

type Rows = Vec<Vec<f64>>;

fn rows(m: &Array2<f64>) -> Rows {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn param(store: &ParamStore, name: &str) -> Rows {
    let id = store.id(name).unwrap_or_else(|| panic!("no parameter {name}"));
    rows(store.get(id))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x · W + b` for a single row.
fn affine(x: &[f64], w: &Rows, b: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|c| b[c] + x.iter().enumerate().map(|(k, v)| v * w[k][c]).sum::<f64>())
        .collect()
}

fn assert_close(actual: &Array2<f64>, expected: &Rows, tol: f64) {
    assert_eq!(actual.nrows(), expected.len());
    for (r, row) in expected.iter().enumerate() {
        assert_eq!(actual.ncols(), row.len());
        for (c, e) in row.iter().enumerate() {
            let a = actual[(r, c)];
            assert!((a - e).abs() <= tol, "({r},{c}): {a} vs {e}");
        }
    }
}

fn encode(config: &EncoderConfig, x: &Array2<f64>, seed: u64) -> (ParamStore, Array2<f64>) {
    let mut store = ParamStore::new();
    let enc = Encoder::new(config, x.ncols(), &mut store, &mut rng(seed)).unwrap();
    let h = enc.encode(&store, &FeatureMatrix { values: x.clone() });
    (store, h.values)
}

#[test]
fn cnn_matches_sliding_window() {
    let mut config = EncoderConfig::for_kind(EncoderKind::Cnn);
    config.hidden_dim = 12;
    config.cnn_widths = vec![2, 3, 4, 5];
    let x = random_matrix(&mut rng(1), 4, 3);
    let (store, h) = encode(&config, &x, 2);
    let (n, d) = x.dim();
    let mut expected = vec![Vec::new(); n];
    for &w in &config.cnn_widths {
        let weight = param(&store, &format!("enc.conv{w}.w"));
        let bias = param(&store, &format!("enc.conv{w}.b"))[0].clone();
        let left = (w - 1) / 2;
        for (t, out) in expected.iter_mut().enumerate() {
            for (c, b) in bias.iter().enumerate() {
                let mut acc = *b;
                for j in 0..w {
                    let src = t as i64 - left as i64 + j as i64;
                    if src < 0 || src >= n as i64 {
                        continue;
                    }
                    for k in 0..d {
                        acc += x[(src as usize, k)] * weight[j * d + k][c];
                    }
                }
                out.push(acc.max(0.0));
            }
        }
    }
    assert_close(&h, &expected, 1e-12);
}

#[test]
fn cnn_single_token_and_zero_input() {
    let config = EncoderConfig::for_kind(EncoderKind::Cnn);
    let (_, h) = encode(&config, &Array2::from_elem((1, 7), 0.3), 0);
    assert_eq!(h.dim(), (1, 300));
    let (_, h) = encode(&config, &Array2::zeros((3, 7)), 0);
    assert!(h.iter().all(|&v| v == 0.0));
}

fn layer_norm(x: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + 1e-5).sqrt();
    x.iter()
        .zip(g.iter().zip(b))
        .map(|(v, (g, b))| (v - mean) * inv * g + b)
        .collect()
}

#[test]
fn transformer_matches_step_by_step_attention() {
    let config = EncoderConfig {
        kind: EncoderKind::Transformer,
        hidden_dim: 6,
        transformer_layers: 1,
        transformer_heads: 1,
        transformer_ff_dim: 5,
        ..EncoderConfig::for_kind(EncoderKind::Transformer)
    };
    let x = random_matrix(&mut rng(3), 3, 4);
    let (mut store, _) = encode(&config, &x, 4);
    let mut r = rng(5);
    for id in store.ids().collect::<Vec<_>>() {
        let name = store.param(id).name.clone();
        if name.ends_with(".b") || name.ends_with(".g") {
            let shape = store.get(id).dim();
            *store.get_mut(id) = random_matrix(&mut r, shape.0, shape.1);
        }
    }
    let enc = Encoder::new(&config, 4, &mut ParamStore::new(), &mut rng(4)).unwrap();
    let h = enc.encode(&store, &FeatureMatrix { values: x.clone() }).values;

    let p = |n: &str| param(&store, n);
    let row = |n: &str| param(&store, n)[0].clone();
    let inp: Rows = rows(&x).iter().map(|t| affine(t, &p("enc.in.w"), &row("enc.in.b"))).collect();
    let l = "enc.layer0";
    let q: Rows = inp.iter().map(|t| affine(t, &p(&format!("{l}.q.w")), &row(&format!("{l}.q.b")))).collect();
    let k: Rows = inp.iter().map(|t| affine(t, &p(&format!("{l}.k.w")), &row(&format!("{l}.k.b")))).collect();
    let v: Rows = inp.iter().map(|t| affine(t, &p(&format!("{l}.v.w")), &row(&format!("{l}.v.b")))).collect();
    let scale = 1.0 / (6.0f64).sqrt();
    let mut expected = Vec::new();
    for i in 0..3 {
        let scores: Vec<f64> = (0..3)
            .map(|j| q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>() * scale)
            .collect();
        let max = scores.iter().cloned().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let weights: Vec<f64> = exps.iter().map(|e| e / z).collect();
        let ctx: Vec<f64> = (0..6).map(|c| (0..3).map(|j| weights[j] * v[j][c]).sum()).collect();
        let att = affine(&ctx, &p(&format!("{l}.o.w")), &row(&format!("{l}.o.b")));
        let res: Vec<f64> = inp[i].iter().zip(&att).map(|(a, b)| a + b).collect();
        let h1 = layer_norm(&res, &row(&format!("{l}.ln1.g")), &row(&format!("{l}.ln1.b")));
        let ff: Vec<f64> = affine(&h1, &p(&format!("{l}.ff1.w")), &row(&format!("{l}.ff1.b")))
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        let ff = affine(&ff, &p(&format!("{l}.ff2.w")), &row(&format!("{l}.ff2.b")));
        let res: Vec<f64> = h1.iter().zip(&ff).map(|(a, b)| a + b).collect();
        expected.push(layer_norm(&res, &row(&format!("{l}.ln2.g")), &row(&format!("{l}.ln2.b"))));
    }
    assert_close(&h, &expected, 1e-10);
}

/// One LSTM direction; gate blocks i, f, g, o.
fn lstm_oracle(x: &Rows, wx: &Rows, wh: &Rows, b: &[f64], hidden: usize, reverse: bool) -> Rows {
    let n = x.len();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut out = vec![vec![]; n];
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    for t in order {
        let mut z = affine(&x[t], wx, b);
        for (col, zc) in z.iter_mut().enumerate() {
            *zc += (0..hidden).map(|k| h[k] * wh[k][col]).sum::<f64>();
        }
        for j in 0..hidden {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[hidden + j]);
            let g = z[2 * hidden + j].tanh();
            let o = sigmoid(z[3 * hidden + j]);
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        out[t] = h.clone();
    }
    out
}

#[test]
fn bilstm_matches_scalar_recurrence() {
    let mut config = EncoderConfig::for_kind(EncoderKind::BiLstm);
    config.hidden_dim = 4;
    let x = random_matrix(&mut rng(6), 3, 5);
    let (store, h) = encode(&config, &x, 7);
    let xr = rows(&x);
    let dir = |p: &str, rev| {
        lstm_oracle(
            &xr,
            &param(&store, &format!("{p}.w_x")),
            &param(&store, &format!("{p}.w_h")),
            &param(&store, &format!("{p}.b"))[0],
            4,
            rev,
        )
    };
    let fwd = dir("enc.fwd", false);
    let bwd = dir("enc.bwd", true);
    let expected: Rows = fwd.into_iter().zip(bwd).map(|(a, b)| [a, b].concat()).collect();
    assert_close(&h, &expected, 1e-6);
}

#[test]
fn bilstm_single_token_and_bounded_states() {
    let config = EncoderConfig::for_kind(EncoderKind::BiLstm);
    let (_, h) = encode(&config, &Array2::from_elem((1, 3), 0.5), 1);
    assert_eq!(h.dim(), (1, 400));
    let (_, h) = encode(&config, &Array2::zeros((4, 3)), 1);
    assert!(h.iter().all(|v| v.abs() < 1.0));
}

fn cumax_oracle(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    let mut acc = 0.0;
    e.iter()
        .map(|v| {
            acc += v / s;
            acc
        })
        .collect()
}

/// One ON-LSTM direction; columns `[mf | mi | f | i | o | c]`, master gates
/// shared by `chunk` consecutive hidden units.
fn onlstm_oracle(x: &Rows, wx: &Rows, wh: &Rows, b: &[f64], hidden: usize, chunk: usize, reverse: bool) -> Rows {
    let n = x.len();
    let lv = hidden / chunk;
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut out = vec![vec![]; n];
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    for t in order {
        let mut z = affine(&x[t], wx, b);
        for (col, zc) in z.iter_mut().enumerate() {
            *zc += (0..hidden).map(|k| h[k] * wh[k][col]).sum::<f64>();
        }
        let mf = cumax_oracle(&z[..lv]);
        let mi: Vec<f64> = cumax_oracle(&z[lv..2 * lv]).iter().map(|v| 1.0 - v).collect();
        let base = 2 * lv;
        for j in 0..hidden {
            let (mfj, mij) = (mf[j / chunk], mi[j / chunk]);
            let w = mfj * mij;
            let f = sigmoid(z[base + j]);
            let i = sigmoid(z[base + hidden + j]);
            let o = sigmoid(z[base + 2 * hidden + j]);
            let g = z[base + 3 * hidden + j].tanh();
            let f_hat = f * w + (mfj - w);
            let i_hat = i * w + (mij - w);
            c[j] = f_hat * c[j] + i_hat * g;
            h[j] = o * c[j].tanh();
        }
        out[t] = h.clone();
    }
    out
}

#[test]
fn onlstm_matches_scalar_recurrence() {
    let config = EncoderConfig {
        kind: EncoderKind::OnLstm,
        hidden_dim: 8,
        onlstm_chunk_size: 2,
        ..EncoderConfig::for_kind(EncoderKind::OnLstm)
    };
    let x = random_matrix(&mut rng(8), 2, 5);
    let (store, h) = encode(&config, &x, 9);
    let xr = rows(&x);
    let dir = |p: &str, rev| {
        onlstm_oracle(
            &xr,
            &param(&store, &format!("{p}.w_x")),
            &param(&store, &format!("{p}.w_h")),
            &param(&store, &format!("{p}.b"))[0],
            8,
            2,
            rev,
        )
    };
    let expected: Rows = dir("enc.fwd", false)
        .into_iter()
        .zip(dir("enc.bwd", true))
        .map(|(a, b)| [a, b].concat())
        .collect();
    assert_close(&h, &expected, 1e-6);
}

fn matmul_oracle(a: &Rows, b: &Rows) -> Rows {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            for p in 0..k {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

fn gcn_oracle(h: &Rows, a: &Rows, w: &Rows) -> Rows {
    let ahw = matmul_oracle(&matmul_oracle(a, h), w);
    ahw.iter()
        .zip(h)
        .map(|(r, hr)| r.iter().zip(hr).map(|(v, x)| v.max(0.0) + x).collect())
        .collect()
}

#[test]
fn gcn_layer_matches_triple_loop() {
    let mut r = rng(10);
    let h = random_matrix(&mut r, 3, 4);
    let w = random_matrix(&mut r, 4, 4);
    let a = AdjacencyMatrix::from_heads(&[None, Some(0), Some(1)]);
    let out = gcn_layer(&h, &a.values, &w).unwrap();
    assert_close(&out, &gcn_oracle(&rows(&h), &rows(&a.values), &rows(&w)), 1e-10);
}

#[test]
fn gcn_hand_examples() {
    let h = Array2::from_shape_vec((1, 2), vec![-2.0, 3.0]).unwrap();
    let a = Array2::ones((1, 1));
    let out = gcn_layer(&h, &a, &Array2::eye(2)).unwrap();
    assert_eq!(out.row(0).to_vec(), vec![-2.0, 6.0]);

    let h = random_matrix(&mut rng(0), 3, 2);
    assert_eq!(gcn_layer(&h, &Array2::ones((3, 3)), &Array2::zeros((2, 2))).unwrap(), h);
}

#[test]
fn gcn_stack_is_layer_composition() {
    let mut r = rng(11);
    let h0 = HiddenStates {
        values: random_matrix(&mut r, 5, 3),
    };
    let a = AdjacencyMatrix::from_heads(&[Some(1), None, Some(1), Some(2), Some(1)]);
    let ws = vec![random_matrix(&mut r, 3, 3), random_matrix(&mut r, 3, 3)];
    let stacked = gcn_stack(&h0, &a, &ws).unwrap();
    let manual = gcn_layer(&gcn_layer(&h0.values, &a.values, &ws[0]).unwrap(), &a.values, &ws[1]).unwrap();
    assert_close(&stacked.values, &rows(&manual), 1e-12);

    assert_eq!(gcn_stack(&h0, &a, &[]).unwrap(), h0);
    let zeros = vec![Array2::zeros((3, 3)); 2];
    assert_eq!(gcn_stack(&h0, &a, &zeros).unwrap(), h0);
}

#[test]
fn gcn_tape_matches_plain_stack() {
    use towe::gcn::{Gcn, GcnConfig};
    let mut store = ParamStore::new();
    let mut r = rng(12);
    let gcn = Gcn::new("gcn", 3, &GcnConfig { layers: 3, normalize: false }, &mut store, &mut r);
    let h0 = random_matrix(&mut r, 4, 3);
    let a = AdjacencyMatrix::from_heads(&[None, Some(0), Some(0), Some(2)]);
    let mut tape = Tape::new(&store);
    let hv = tape.input(h0.clone());
    let out = gcn.forward(&mut tape, hv, &a);
    let ws: Vec<Array2<f64>> = gcn.weights.iter().map(|&w| store.get(w).clone()).collect();
    let plain = gcn_stack(&HiddenStates { values: h0 }, &a, &ws).unwrap();
    assert_close(&tape.value(out).to_owned(), &rows(&plain.values), 1e-12);
}

#[test]
fn classify_matches_explicit_softmax() {
    let mut r = rng(13);
    let h = random_matrix(&mut r, 2, 4);
    let w = random_matrix(&mut r, 4, 3);
    let b = random_matrix(&mut r, 1, 3);
    let probs = classify(&HiddenStates { values: h.clone() }, &w, &b).unwrap();
    let expected: Rows = rows(&h)
        .iter()
        .map(|t| {
            let z = affine(t, &rows(&w), &rows(&b)[0]);
            let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        })
        .collect();
    assert_close(&probs, &expected, 1e-12);
    for row in probs.rows() {
        assert!((row.sum() - 1.0).abs() < 1e-6);
    }
}
