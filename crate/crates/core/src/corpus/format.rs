//! Canonical dataset file: one JSON record per line.
//!
//! ```text
//! {"id":"s12","tokens":["The","food",...],"pos_tags":["DT","NN",...],
//!  "heads":[1,3,...],"target_span":[1,2],"labels":["O","O","O","B",...]}
//! ```
//!
//! `heads` are 0-based with `-1` for the root. `pos_tags` and `heads` may be
//! `null` for instances whose parses have not been joined yet.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{DatasetSplit, Head, Instance, Label, Span, Token};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub tokens: Vec<String>,
    pub pos_tags: Option<Vec<String>>,
    pub heads: Option<Vec<i64>>,
    pub target_span: [usize; 2],
    pub labels: Vec<String>,
}

impl DatasetRecord {
    pub fn from_instance(inst: &Instance) -> Self {
        let pos_tags = inst
            .tokens
            .iter()
            .map(|t| t.pos_tag.clone())
            .collect::<Option<Vec<_>>>();
        let heads = inst
            .tokens
            .iter()
            .map(|t| t.head.map(Head::to_raw))
            .collect::<Option<Vec<_>>>();
        DatasetRecord {
            id: inst.sentence_id.clone(),
            tokens: inst.tokens.iter().map(|t| t.surface.clone()).collect(),
            pos_tags,
            heads,
            target_span: [inst.target.start, inst.target.end],
            labels: inst.labels.iter().map(|l| l.as_str().to_owned()).collect(),
        }
    }

    pub fn into_instance(self, split: &str, location: &str) -> Result<Instance> {
        let n = self.tokens.len();
        let labels = self
            .labels
            .iter()
            .map(|l| {
                Label::parse(l).ok_or_else(|| Error::format(location, format!("bad label {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(tags) = &self.pos_tags {
            if tags.len() != n {
                return Err(Error::format(location, "pos_tags length differs from tokens"));
            }
        }
        let heads = match &self.heads {
            Some(raw) => {
                if raw.len() != n {
                    return Err(Error::format(location, "heads length differs from tokens"));
                }
                Some(
                    raw.iter()
                        .map(|&h| {
                            Head::from_raw(h)
                                .ok_or_else(|| Error::format(location, format!("bad head {h}")))
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            None => None,
        };
        let tokens = self
            .tokens
            .into_iter()
            .enumerate()
            .map(|(i, surface)| Token {
                index: i,
                surface,
                pos_tag: self.pos_tags.as_ref().map(|t| t[i].clone()),
                head: heads.as_ref().map(|h| h[i]),
            })
            .collect();
        let inst = Instance {
            sentence_id: self.id,
            tokens,
            target: Span::new(self.target_span[0], self.target_span[1]),
            labels,
            split: split.to_owned(),
        };
        inst.validate()
            .map_err(|e| Error::format(location, e.to_string()))?;
        if inst.tokens.iter().any(|t| t.head.is_some()) {
            super::import::check_tree(&inst.sentence_id, &inst.heads()?)?;
        }
        Ok(inst)
    }
}

pub fn read_dataset(path: &Path, name: &str) -> Result<DatasetSplit> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut instances = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), lineno + 1);
        let record: DatasetRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(&location, e.to_string()))?;
        instances.push(record.into_instance(name, &location)?);
    }
    if instances.is_empty() {
        return Err(Error::format(path.display().to_string(), "dataset is empty"));
    }
    Ok(DatasetSplit::new(name, instances))
}

pub fn write_dataset(path: &Path, split: &DatasetSplit) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for inst in &split.instances {
        serde_json::to_writer(&mut out, &DatasetRecord::from_instance(inst))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip_keeps_parses() {
        let mut inst = Instance::new(
            "s1",
            &["food", "is", "good"],
            Span::new(0, 1),
            vec![Label::O, Label::O, Label::B],
        )
        .unwrap();
        let heads = [Head::Token(2), Head::Token(2), Head::Root];
        for (t, h) in inst.tokens.iter_mut().zip(heads) {
            t.pos_tag = Some("X".into());
            t.head = Some(h);
        }
        let rec = DatasetRecord::from_instance(&inst);
        assert_eq!(rec.heads, Some(vec![2, 2, -1]));
        let back = rec.into_instance("", "test").unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn rejects_bad_label() {
        let rec = DatasetRecord {
            id: "x".into(),
            tokens: vec!["a".into(), "b".into()],
            pos_tags: None,
            heads: None,
            target_span: [0, 1],
            labels: vec!["O".into(), "X".into()],
        };
        assert!(matches!(rec.into_instance("", "l"), Err(Error::Format { .. })));
    }
}
