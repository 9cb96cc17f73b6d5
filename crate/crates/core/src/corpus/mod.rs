//! TOWE datasets: sentences with one marked target, their parses and the
//! gold opinion spans for that target.

mod bio;
mod format;
mod import;
mod stats;

pub use bio::{bio_decode, bio_encode, validate_bio};
pub use format::{read_dataset, write_dataset, DatasetRecord};
pub use import::{
    import_inline_annotated, join_parses, read_inline_file, read_parse_file, ParseRecord,
};
pub use stats::{compute_statistics, dependency_distance, sequential_distance, span_head, CorpusStats};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tag of the BIO scheme. The discriminant is the classifier's output column,
/// so argmax ties resolve toward `O`, then `B`, then `I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    O = 0,
    B = 1,
    I = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::O, Label::B, Label::I];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Label> {
        Label::ALL.get(idx).copied()
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "O" => Some(Label::O),
            "B" => Some(Label::B),
            "I" => Some(Label::I),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::O => "O",
            Label::B => "B",
            Label::I => "I",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open token interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, idx: usize) -> bool {
        idx >= self.start && idx < self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Dependency head of a token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    Root,
    Token(usize),
}

impl Head {
    /// On-disk encoding: `-1` for the root, the 0-based head index otherwise.
    pub fn to_raw(self) -> i64 {
        match self {
            Head::Root => -1,
            Head::Token(i) => i as i64,
        }
    }

    pub fn from_raw(raw: i64) -> Option<Head> {
        match raw {
            -1 => Some(Head::Root),
            i if i >= 0 => Some(Head::Token(i as usize)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub pos_tag: Option<String>,
    pub head: Option<Head>,
}

impl Token {
    pub fn new(index: usize, surface: impl Into<String>) -> Self {
        Token {
            index,
            surface: surface.into(),
            pos_tag: None,
            head: None,
        }
    }
}

/// One (sentence, target) pair. A sentence with k targets yields k instances
/// sharing `sentence_id`.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub sentence_id: String,
    pub tokens: Vec<Token>,
    pub target: Span,
    pub labels: Vec<Label>,
    pub split: String,
}

impl Instance {
    /// Builds an instance and checks the target and label invariants.
    pub fn new(
        sentence_id: impl Into<String>,
        surfaces: &[&str],
        target: Span,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let inst = Instance {
            sentence_id: sentence_id.into(),
            tokens: surfaces
                .iter()
                .enumerate()
                .map(|(i, s)| Token::new(i, *s))
                .collect(),
            target,
            labels,
            split: String::new(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn gold_spans(&self) -> Vec<Span> {
        bio_decode(&self.labels)
    }

    pub fn has_parses(&self) -> bool {
        self.tokens
            .iter()
            .all(|t| t.pos_tag.is_some() && t.head.is_some())
    }

    /// Head indices with `None` for the root; errors if parses are missing.
    pub fn heads(&self) -> Result<Vec<Option<usize>>> {
        self.tokens
            .iter()
            .map(|t| match t.head {
                Some(Head::Root) => Ok(None),
                Some(Head::Token(h)) => Ok(Some(h)),
                None => Err(Error::Precondition(format!(
                    "sentence {} has no dependency heads; join parses first",
                    self.sentence_id
                ))),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(Error::annotation(0, "empty sentence"));
        }
        if self.labels.len() != n {
            return Err(Error::annotation(
                self.labels.len().min(n),
                format!("{} labels for {} tokens", self.labels.len(), n),
            ));
        }
        if self.target.start >= self.target.end || self.target.end > n {
            return Err(Error::annotation(
                self.target.start,
                format!("target span {} outside sentence of length {}", self.target, n),
            ));
        }
        validate_bio(&self.labels)?;
        for i in self.target.start..self.target.end {
            if self.labels[i] != Label::O {
                return Err(Error::annotation(i, "target token labelled as opinion"));
            }
        }
        Ok(())
    }
}

/// A named collection of instances, e.g. `Res14-train`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub name: String,
    pub instances: Vec<Instance>,
}

impl DatasetSplit {
    pub fn new(name: impl Into<String>, instances: Vec<Instance>) -> Self {
        DatasetSplit {
            name: name.into(),
            instances,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn sentence_ids(&self) -> BTreeSet<&str> {
        self.instances
            .iter()
            .map(|i| i.sentence_id.as_str())
            .collect()
    }

    pub fn pos_tagset(&self) -> BTreeSet<&str> {
        self.instances
            .iter()
            .flat_map(|i| i.tokens.iter().filter_map(|t| t.pos_tag.as_deref()))
            .collect()
    }
}
