mod common;

use common::{labels, parsed_instance};
use proptest::prelude::*;
use towe::corpus::{
    bio_decode, bio_encode, compute_statistics, dependency_distance, join_parses, span_head, validate_bio,
    DatasetSplit, Label, ParseRecord, Span,
};

/// Span scanner written independently of the decoder: a span starts at any
/// B, or at an I whose predecessor is O or absent, and extends over the
/// following I labels.
fn scan_spans(labels: &[Label]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let starts = labels[i] == Label::B || (labels[i] == Label::I && (i == 0 || labels[i - 1] == Label::O));
        if starts {
            let mut j = i + 1;
            while j < labels.len() && labels[j] == Label::I {
                j += 1;
            }
            spans.push(Span::new(i, j));
            i = j;
        } else {
            i += 1;
        }
    }
    spans
}

fn all_label_strings(max_len: usize) -> Vec<Vec<Label>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|p: &Vec<Label>| {
                Label::ALL.iter().map(move |&l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

#[test]
fn decode_matches_scanner_on_every_string_up_to_six() {
    let strings = all_label_strings(6);
    assert_eq!(strings.len(), (0..=6).map(|k| 3usize.pow(k)).sum::<usize>());
    for s in strings {
        let spans = bio_decode(&s);
        assert_eq!(spans, scan_spans(&s), "{s:?}");
        let strict = s
            .iter()
            .enumerate()
            .all(|(i, &l)| l != Label::I || (i > 0 && s[i - 1] != Label::O));
        assert_eq!(validate_bio(&s).is_ok(), strict, "{s:?}");
        let reencoded = bio_encode(s.len(), &spans).unwrap();
        if strict {
            assert_eq!(reencoded, s);
        }
        assert_eq!(bio_decode(&reencoded), spans);
    }
}

#[test]
fn decode_examples() {
    assert_eq!(bio_decode(&labels("OOOBOOOOOO")), vec![Span::new(3, 4)]);
    assert_eq!(bio_decode(&labels("OOOOOOOOBI")), vec![Span::new(8, 10)]);
    assert_eq!(bio_decode(&labels("IOBII")), vec![Span::new(0, 1), Span::new(2, 5)]);
}

#[test]
fn stats_small_cases() {
    let adj = parsed_instance("a", &["x", "y", "z"], Span::new(0, 1), &[Span::new(1, 2)]);
    let s = compute_statistics(&DatasetSplit::new("t", vec![adj])).unwrap();
    assert_eq!(s.avg_sequential_distance, 1.0);

    let chain = parsed_instance("b", &["a", "b", "c"], Span::new(0, 1), &[Span::new(2, 3)]);
    let s = compute_statistics(&DatasetSplit::new("t", vec![chain])).unwrap();
    assert_eq!(s.avg_dependency_distance, 2.0);
    assert_eq!(s.avg_sequential_distance, 2.0);
}

#[test]
fn food_and_service_counts() {
    let s = compute_statistics(&DatasetSplit::new("t", common::food_and_service())).unwrap();
    assert_eq!(s.num_sentences, 1);
    assert_eq!(s.num_aspect_terms, 2);
    assert_eq!(s.num_opinion_terms, 2);
    assert_eq!(s.avg_sentence_length, 10.0);
}

/// Random tree given as a head array: token `i > 0` attaches to some
/// earlier token, then indices are permuted.
fn tree() -> impl Strategy<Value = Vec<Option<usize>>> {
    (1usize..12).prop_flat_map(|n| {
        (
            proptest::collection::vec(any::<prop::sample::Index>(), n),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
            .prop_map(move |(picks, perm)| {
                let mut heads = vec![None; n];
                for i in 1..n {
                    heads[perm[i]] = Some(perm[picks[i].index(i)]);
                }
                heads
            })
    })
}

/// All-pairs shortest paths by Floyd-Warshall.
fn floyd(heads: &[Option<usize>]) -> Vec<Vec<usize>> {
    let n = heads.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        if let Some(h) = heads[i] {
            d[i][h] = 1;
            d[h][i] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

/// Disjoint opinion spans that avoid the target, plus a target.
fn annotated(n: usize) -> impl Strategy<Value = (Span, Vec<Span>)> {
    (0..n).prop_flat_map(move |t| {
        proptest::collection::vec(0usize..4, n).prop_map(move |cuts| {
            let target = Span::new(t, t + 1);
            let mut spans = Vec::new();
            let mut i = 0;
            while i < n {
                let len = cuts[i];
                let end = (i + len).min(n);
                if len > 0 && !Span::new(i, end).overlaps(&target) {
                    spans.push(Span::new(i, end));
                    i = end + 1;
                } else {
                    i += 1;
                }
            }
            (target, spans)
        })
    })
}

fn split_from(seed_words: &[(Span, Vec<Span>)], prefix: &str) -> DatasetSplit {
    let instances = seed_words
        .iter()
        .enumerate()
        .map(|(k, (t, spans))| {
            let n = spans.iter().map(|s| s.end).chain([t.end]).max().unwrap() + k % 3;
            let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            parsed_instance(&format!("{prefix}{k}"), &refs, *t, spans)
        })
        .collect();
    DatasetSplit::new(prefix, instances)
}

proptest! {
    #[test]
    #[allow(clippy::needless_range_loop)]
    fn bfs_matches_floyd_warshall(heads in tree()) {
        let d = floyd(&heads);
        for i in 0..heads.len() {
            for j in 0..heads.len() {
                prop_assert_eq!(dependency_distance(&heads, i, j), Some(d[i][j]));
            }
        }
    }

    #[test]
    fn span_head_has_outside_head_or_is_first(heads in tree(), a in 0usize..12, b in 0usize..12) {
        let n = heads.len();
        let (s, e) = (a.min(b) % n, (a.max(b) % n) + 1);
        prop_assume!(s < e);
        let span = Span::new(s, e);
        let h = span_head(span, &heads);
        prop_assert!(span.contains(h));
        let outside = |i: usize| heads[i].is_none_or(|p| !span.contains(p));
        if (s..e).any(outside) {
            prop_assert!(outside(h));
            prop_assert!((s..h).all(|i| !outside(i)));
        } else {
            prop_assert_eq!(h, s);
        }
    }

    #[test]
    fn encode_decode_round_trip((target, spans) in (3usize..15).prop_flat_map(annotated)) {
        let n = spans.iter().map(|s| s.end).chain([target.end]).max().unwrap();
        let labels = bio_encode(n, &spans).unwrap();
        prop_assert_eq!(bio_decode(&labels), spans.clone());
        for s in bio_decode(&labels) {
            prop_assert!(!s.overlaps(&target));
        }
    }

    #[test]
    fn stats_of_concatenation_are_weighted_means(
        a in proptest::collection::vec((3usize..10).prop_flat_map(annotated), 1..6),
        b in proptest::collection::vec((3usize..10).prop_flat_map(annotated), 1..6),
    ) {
        let sa = split_from(&a, "a");
        let sb = split_from(&b, "b");
        let mut joined = sa.clone();
        joined.instances.extend(sb.instances.clone());
        let (x, y, z) = (
            compute_statistics(&sa).unwrap(),
            compute_statistics(&sb).unwrap(),
            compute_statistics(&joined).unwrap(),
        );
        prop_assert_eq!(z.num_sentences, x.num_sentences + y.num_sentences);
        prop_assert_eq!(z.num_aspect_terms, x.num_aspect_terms + y.num_aspect_terms);
        prop_assert_eq!(z.num_opinion_terms, x.num_opinion_terms + y.num_opinion_terms);
        let w = |p: f64, q: f64, np: usize, nq: usize| {
            if np + nq == 0 { 0.0 } else { (p * np as f64 + q * nq as f64) / (np + nq) as f64 }
        };
        let asl = w(x.avg_sentence_length, y.avg_sentence_length, x.num_sentences, y.num_sentences);
        prop_assert!((z.avg_sentence_length - asl).abs() < 1e-9);
        let dd = w(x.avg_dependency_distance, y.avg_dependency_distance, x.num_pairs, y.num_pairs);
        prop_assert!((z.avg_dependency_distance - dd).abs() < 1e-9);
        let sd = w(x.avg_sequential_distance, y.avg_sequential_distance, x.num_pairs, y.num_pairs);
        prop_assert!((z.avg_sequential_distance - sd).abs() < 1e-9);
    }

    #[test]
    fn join_preserves_surfaces_and_labels(
        items in proptest::collection::vec((3usize..10).prop_flat_map(annotated), 1..5),
        heads in tree(),
    ) {
        let split = split_from(&items, "s");
        let records: Vec<ParseRecord> = split
            .instances
            .iter()
            .map(|inst| {
                let n = inst.len();
                let h: Vec<Option<usize>> = (0..n)
                    .map(|i| if i == 0 { None } else { Some(heads.get(i).and_then(|h| *h).unwrap_or(0).min(i - 1)) })
                    .collect();
                ParseRecord {
                    sentence_id: Some(inst.sentence_id.clone()),
                    pos_tags: vec!["X".into(); n],
                    heads: h,
                }
            })
            .collect();
        let joined = join_parses(split.clone(), &records).unwrap();
        for (a, b) in split.instances.iter().zip(&joined.instances) {
            prop_assert_eq!(&a.labels, &b.labels);
            let sa: Vec<&str> = a.tokens.iter().map(|t| t.surface.as_str()).collect();
            let sb: Vec<&str> = b.tokens.iter().map(|t| t.surface.as_str()).collect();
            prop_assert_eq!(sa, sb);
            prop_assert!(b.tokens.iter().all(|t| t.pos_tag.as_deref() == Some("X")));
        }
    }
}
