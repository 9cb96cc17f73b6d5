use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{bio_decode, Instance, Label, Span};
use crate::error::{Error, Result};

/// Exact-match span precision / recall / F1, micro-averaged over spans.
/// Values are fractions in `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub num_pred_spans: usize,
    pub num_gold_spans: usize,
    pub num_correct: usize,
}

impl EvalReport {
    pub fn from_counts(num_pred: usize, num_gold: usize, num_correct: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(num_correct, num_pred);
        let recall = ratio(num_correct, num_gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            precision,
            recall,
            f1,
            num_pred_spans: num_pred,
            num_gold_spans: num_gold,
            num_correct,
        }
    }
}

/// Scores predicted spans against gold spans, aligned per instance. A
/// predicted span is correct only if the same instance has a gold span with
/// identical boundaries.
pub fn score(pred: &[Vec<Span>], gold: &[Vec<Span>]) -> Result<EvalReport> {
    if pred.len() != gold.len() {
        return Err(Error::Precondition(format!(
            "{} predicted instances for {} gold instances",
            pred.len(),
            gold.len()
        )));
    }
    let (mut np, mut ng, mut nc) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let p: HashSet<&Span> = p.iter().collect();
        let g: HashSet<&Span> = g.iter().collect();
        np += p.len();
        ng += g.len();
        nc += p.intersection(&g).count();
    }
    Ok(EvalReport::from_counts(np, ng, nc))
}

/// Decodes predicted label sequences and scores them against the gold
/// labels of `gold`.
pub fn score_labels(pred: &[Vec<Label>], gold: &[Instance]) -> Result<EvalReport> {
    let p: Vec<Vec<Span>> = pred.iter().map(|l| bio_decode(l)).collect();
    let g: Vec<Vec<Span>> = gold.iter().map(Instance::gold_spans).collect();
    score(&p, &g)
}
