#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use towe::corpus::{Head, Instance, Label, Span};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Instance with POS tags and a chain parse rooted at the first token.
pub fn parsed_instance(id: &str, words: &[&str], target: Span, opinions: &[Span]) -> Instance {
    let labels = towe::corpus::bio_encode(words.len(), opinions).unwrap();
    let mut inst = Instance::new(id, words, target, labels).unwrap();
    for (i, t) in inst.tokens.iter_mut().enumerate() {
        t.pos_tag = Some(if i % 2 == 0 { "NN" } else { "JJ" }.to_owned());
        t.head = Some(if i == 0 { Head::Root } else { Head::Token(i - 1) });
    }
    inst
}

/// "The food is good but the service is extremely slow", once per target.
pub fn food_and_service() -> Vec<Instance> {
    let words = [
        "The", "food", "is", "good", "but", "the", "service", "is", "extremely", "slow",
    ];
    vec![
        parsed_instance("s1", &words, Span::new(1, 2), &[Span::new(3, 4)]),
        parsed_instance("s1", &words, Span::new(6, 7), &[Span::new(8, 10)]),
    ]
}

pub fn labels(s: &str) -> Vec<Label> {
    s.chars()
        .map(|c| Label::parse(&c.to_string()).unwrap())
        .collect()
}
