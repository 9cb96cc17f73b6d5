//! Constructed corpora with a known labelling rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{bio_encode, DatasetSplit, Head, Instance, Span};

/// Sentences of random tokens with a one-token target at a random position;
/// the opinion is always the token right after the target. Tokens carry a
/// single POS tag and a left-branching chain parse.
///
/// Word identity carries no signal, so a tagger can only solve the task
/// through the target's position.
pub fn next_token_corpus(n: usize, vocab: usize, min_len: usize, max_len: usize, seed: u64) -> DatasetSplit {
    assert!(min_len >= 2 && min_len <= max_len && vocab > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
    let instances = (0..n)
        .map(|k| {
            let len = rng.gen_range(min_len..=max_len);
            let tokens: Vec<&str> = (0..len).map(|_| words[rng.gen_range(0..vocab)].as_str()).collect();
            let t = rng.gen_range(0..len - 1);
            let labels = bio_encode(len, &[Span::new(t + 1, t + 2)]).expect("valid span");
            let mut inst =
                Instance::new(format!("syn{k}"), &tokens, Span::new(t, t + 1), labels).expect("valid instance");
            for (i, tok) in inst.tokens.iter_mut().enumerate() {
                tok.pos_tag = Some("X".into());
                tok.head = Some(if i == 0 { Head::Root } else { Head::Token(i - 1) });
            }
            inst
        })
        .collect();
    DatasetSplit::new("synthetic", instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opinion_follows_target() {
        let split = next_token_corpus(20, 5, 3, 8, 4);
        assert_eq!(split.len(), 20);
        for inst in &split.instances {
            assert_eq!(inst.gold_spans(), vec![Span::new(inst.target.end, inst.target.end + 1)]);
            inst.validate().unwrap();
        }
        assert_eq!(split.instances, next_token_corpus(20, 5, 3, 8, 4).instances);
    }
}
