use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{DatasetSplit, Span};

/// Summary statistics of a split in the layout of the usual TOWE data table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_sentences: usize,
    pub avg_sentence_length: f64,
    pub num_aspect_terms: usize,
    pub num_opinion_terms: usize,
    /// Mean dependency-tree distance over (target, opinion) pairs.
    pub avg_dependency_distance: f64,
    /// Mean token distance over (target, opinion) pairs.
    pub avg_sequential_distance: f64,
    /// Number of (target, opinion) pairs behind the two distance means.
    pub num_pairs: usize,
}

/// Token-index gap between two spans: 0 when they overlap, 1 when adjacent.
pub fn sequential_distance(a: Span, b: Span) -> usize {
    if a.overlaps(&b) {
        0
    } else if a.end <= b.start {
        b.start + 1 - a.end
    } else {
        a.start + 1 - b.end
    }
}

/// The token of `span` whose head lies outside the span (first such token),
/// or the span's first token if none does.
pub fn span_head(span: Span, heads: &[Option<usize>]) -> usize {
    (span.start..span.end)
        .find(|&i| match heads[i] {
            None => true,
            Some(h) => !span.contains(h),
        })
        .unwrap_or(span.start)
}

/// Shortest path length between two tokens in the undirected dependency tree.
pub fn dependency_distance(heads: &[Option<usize>], from: usize, to: usize) -> Option<usize> {
    let n = heads.len();
    let mut adj = vec![Vec::new(); n];
    for (i, h) in heads.iter().enumerate() {
        if let Some(h) = *h {
            adj[i].push(h);
            adj[h].push(i);
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::from([from]);
    dist[from] = 0;
    while let Some(u) = queue.pop_front() {
        if u == to {
            return Some(dist[u]);
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    None
}

pub fn compute_statistics(split: &DatasetSplit) -> Result<CorpusStats> {
    let mut lengths: HashMap<&str, usize> = HashMap::new();
    let mut num_opinions = 0usize;
    let mut seq_total = 0usize;
    let mut dep_total = 0usize;
    let mut pairs = 0usize;

    for inst in &split.instances {
        let heads = inst.heads()?;
        lengths.insert(&inst.sentence_id, inst.len());
        let target_head = span_head(inst.target, &heads);
        for span in inst.gold_spans() {
            num_opinions += 1;
            pairs += 1;
            seq_total += sequential_distance(inst.target, span);
            let opinion_head = span_head(span, &heads);
            dep_total += dependency_distance(&heads, target_head, opinion_head).ok_or_else(|| {
                Error::Parse {
                    sentence_id: inst.sentence_id.clone(),
                    message: "dependency graph is disconnected".into(),
                }
            })?;
        }
    }

    let mean = |total: usize, count: usize| {
        if count == 0 {
            0.0
        } else {
            total as f64 / count as f64
        }
    };
    Ok(CorpusStats {
        num_sentences: lengths.len(),
        avg_sentence_length: mean(lengths.values().sum(), lengths.len()),
        num_aspect_terms: split.instances.len(),
        num_opinion_terms: num_opinions,
        avg_dependency_distance: mean(dep_total, pairs),
        avg_sequential_distance: mean(seq_total, pairs),
        num_pairs: pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Head, Instance, Label};

    fn parsed(id: &str, n: usize, target: Span, labels: Vec<Label>, heads: &[Option<usize>]) -> Instance {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = words.iter().map(|s| s.as_str()).collect();
        let mut inst = Instance::new(id, &refs, target, labels).unwrap();
        for (t, h) in inst.tokens.iter_mut().zip(heads) {
            t.pos_tag = Some("NN".into());
            t.head = Some(h.map_or(Head::Root, Head::Token));
        }
        inst
    }

    #[test]
    fn adjacent_opinion_has_unit_sequential_distance() {
        let inst = parsed(
            "a",
            3,
            Span::new(0, 1),
            vec![Label::O, Label::B, Label::O],
            &[None, Some(0), Some(0)],
        );
        let stats = compute_statistics(&DatasetSplit::new("x", vec![inst])).unwrap();
        assert_eq!(stats.avg_sequential_distance, 1.0);
        assert_eq!(stats.num_opinion_terms, 1);
    }

    #[test]
    fn chain_dependency_distance() {
        // a -> b -> c: a's head is b, b's head is c
        let heads = [Some(1), Some(2), None];
        assert_eq!(dependency_distance(&heads, 0, 2), Some(2));
        let inst = parsed(
            "c",
            3,
            Span::new(0, 1),
            vec![Label::O, Label::O, Label::B],
            &heads,
        );
        let stats = compute_statistics(&DatasetSplit::new("x", vec![inst])).unwrap();
        assert_eq!(stats.avg_dependency_distance, 2.0);
        assert_eq!(stats.avg_sequential_distance, 2.0);
    }

    #[test]
    fn missing_parses_is_precondition_error() {
        let inst = Instance::new("a", &["x", "y"], Span::new(0, 1), vec![Label::O, Label::B]).unwrap();
        assert!(matches!(
            compute_statistics(&DatasetSplit::new("x", vec![inst])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn span_head_prefers_token_with_outside_head() {
        // span [1,3): token 1 depends on 2, token 2 on 0 (outside)
        let heads = [None, Some(2), Some(0)];
        assert_eq!(span_head(Span::new(1, 3), &heads), 2);
    }
}
