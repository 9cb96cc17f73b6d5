use ndarray::ArrayView2;

use crate::autograd::softmax_rows;
use crate::corpus::Label;
use crate::encoders::HiddenStates;
use crate::error::{Error, Result};
use crate::params::Matrix;

/// Linear map to label logits followed by a row softmax. Columns follow
/// [`Label`] order (O, B, I).
pub fn classify(h: &HiddenStates, weight: &Matrix, bias: &Matrix) -> Result<Matrix> {
    if weight.nrows() != h.values.ncols() || bias.dim() != (1, weight.ncols()) {
        return Err(Error::Dimension(format!(
            "classifier {:?}/{:?} does not fit hidden width {}",
            weight.dim(),
            bias.dim(),
            h.values.ncols()
        )));
    }
    Ok(softmax_rows((h.values.dot(weight) + bias).view()))
}

/// Mean token cross-entropy `-log p(gold)`.
pub fn loss(probs: &Matrix, gold: &[Label]) -> Result<f64> {
    if probs.nrows() != gold.len() {
        return Err(Error::Dimension(format!(
            "{} probability rows for {} labels",
            probs.nrows(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = gold
        .iter()
        .enumerate()
        .map(|(i, l)| -probs[[i, l.index()]].ln())
        .sum();
    Ok(total / gold.len() as f64)
}

/// Per-row argmax; ties resolve to the lowest column, i.e. O, then B, then I.
pub fn argmax_labels(scores: ArrayView2<f64>) -> Vec<Label> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            Label::from_index(best).unwrap_or(Label::O)
        })
        .collect()
}
