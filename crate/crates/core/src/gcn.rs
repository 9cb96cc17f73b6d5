//! Residual graph convolution over the dependency tree:
//! `H_k = ReLU(A · H_{k-1} · W_k) + H_{k-1}`.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::corpus::Instance;
use crate::encoders::HiddenStates;
use crate::error::{Error, Result};
use crate::params::{xavier, Matrix, ParamId, ParamStore};

/// Symmetric 0/1 matrix with ones on the diagonal and at every undirected
/// dependency edge.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    pub values: Matrix,
}

impl AdjacencyMatrix {
    pub fn from_heads(heads: &[Option<usize>]) -> Self {
        let n = heads.len();
        let mut a = Array2::<f64>::eye(n);
        for (i, h) in heads.iter().enumerate() {
            if let Some(h) = *h {
                a[[i, h]] = 1.0;
                a[[h, i]] = 1.0;
            }
        }
        AdjacencyMatrix { values: a }
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `D^{-1/2} A D^{-1/2}` with `D` the row degrees.
    pub fn normalized(&self) -> Matrix {
        let deg: Vec<f64> = self.values.rows().into_iter().map(|r| r.sum()).collect();
        Array2::from_shape_fn(self.values.dim(), |(i, j)| {
            self.values[[i, j]] / (deg[i] * deg[j]).sqrt()
        })
    }
}

pub fn build_adjacency(inst: &Instance) -> Result<AdjacencyMatrix> {
    Ok(AdjacencyMatrix::from_heads(&inst.heads()?))
}

/// One residual GCN layer on plain matrices.
pub fn gcn_layer(h: &Matrix, a: &Matrix, w: &Matrix) -> Result<Matrix> {
    let n = h.nrows();
    if a.dim() != (n, n) {
        return Err(Error::Dimension(format!(
            "adjacency is {:?}, expected ({n}, {n})",
            a.dim()
        )));
    }
    if w.nrows() != h.ncols() || w.ncols() != h.ncols() {
        return Err(Error::Dimension(format!(
            "weight is {:?}, expected ({1}, {1})",
            w.dim(),
            h.ncols()
        )));
    }
    let prop = a.dot(h).dot(w);
    Ok(prop.mapv(|v| v.max(0.0)) + h)
}

/// `weights.len()` residual layers applied in order; no weights is identity.
pub fn gcn_stack(h0: &HiddenStates, a: &AdjacencyMatrix, weights: &[Matrix]) -> Result<HiddenStates> {
    let mut h = h0.values.clone();
    for w in weights {
        h = gcn_layer(&h, &a.values, w)?;
    }
    Ok(HiddenStates { values: h })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct GcnConfig {
    /// Number of layers `K`; 0 disables the GCN.
    pub layers: usize,
    /// Use the symmetrically normalized adjacency instead of raw `A`.
    pub normalize: bool,
}


impl GcnConfig {
    pub fn enabled(&self) -> bool {
        self.layers > 0
    }
}

#[derive(Clone, Debug)]
pub struct Gcn {
    pub weights: Vec<ParamId>,
    pub normalize: bool,
}

impl Gcn {
    pub fn new<R: Rng>(
        prefix: &str,
        dim: usize,
        config: &GcnConfig,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Self {
        let weights = (0..config.layers)
            .map(|k| store.add(format!("{prefix}.w{k}"), xavier(rng, dim, dim), true))
            .collect();
        Gcn {
            weights,
            normalize: config.normalize,
        }
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, tape: &mut Tape<'_>, h: Var, adjacency: &AdjacencyMatrix) -> Var {
        if self.weights.is_empty() {
            return h;
        }
        let a = if self.normalize {
            adjacency.normalized()
        } else {
            adjacency.values.clone()
        };
        let a = tape.input(a);
        let mut h = h;
        for &w in &self.weights {
            let w = tape.param(w);
            let ah = tape.matmul(a, h);
            let ahw = tape.matmul(ah, w);
            let act = tape.relu(ahw);
            h = tape.add(act, h);
        }
        h
    }
}
