//! Converters from the inline-annotated distribution format and from parser
//! output into [`Instance`]s.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::{validate_bio, DatasetSplit, Head, Instance, Label, Span, Token};

fn split_tagged(token: &str) -> Option<(&str, Label)> {
    let (word, tag) = token.rsplit_once('\\')?;
    Some((word, Label::parse(tag)?))
}

fn parse_tag_line(line: &str, what: &str) -> Result<Vec<Label>> {
    line.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            split_tagged(tok).map(|(_, l)| l).ok_or_else(|| {
                Error::format(
                    format!("{what} line, token {i}"),
                    format!("{tok:?} lacks a \\B, \\I or \\O suffix"),
                )
            })
        })
        .collect()
}

/// Builds an instance from one example of the inline-annotated format: the
/// raw sentence, the sentence with target tags, and the sentence with opinion
/// tags. Tags are `\B`, `\I` or `\O` suffixes on each token.
///
/// POS tags and heads are left unset; see [`join_parses`].
pub fn import_inline_annotated(
    sentence_line: &str,
    target_line: &str,
    opinion_line: &str,
) -> Result<Instance> {
    let words: Vec<&str> = sentence_line.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::format("sentence line", "empty sentence"));
    }
    let target_tags = parse_tag_line(target_line, "target")?;
    if target_tags.len() != words.len() {
        return Err(Error::format(
            "target line",
            format!("{} tags for {} tokens", target_tags.len(), words.len()),
        ));
    }
    let labels = parse_tag_line(opinion_line, "opinion")?;
    if labels.len() != words.len() {
        return Err(Error::format(
            "opinion line",
            format!("{} tags for {} tokens", labels.len(), words.len()),
        ));
    }

    let marked: Vec<usize> = target_tags
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != Label::O)
        .map(|(i, _)| i)
        .collect();
    let (first, last) = match (marked.first(), marked.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::annotation(0, "no target tokens marked")),
    };
    if let Some(gap) = (first..=last).find(|i| !marked.contains(i)) {
        return Err(Error::annotation(gap, "target span is not contiguous"));
    }

    validate_bio(&labels)?;
    let inst = Instance {
        sentence_id: String::new(),
        tokens: words
            .iter()
            .enumerate()
            .map(|(i, w)| Token::new(i, *w))
            .collect(),
        target: Span::new(first, last + 1),
        labels,
        split: String::new(),
    };
    inst.validate()?;
    Ok(inst)
}

/// Reads an inline-annotated file.
///
/// Two layouts are accepted: tab-separated rows
/// `s_id<TAB>sentence<TAB>target_tags<TAB>opinion_tags` (an optional header
/// row is skipped; the id column may be omitted), or blocks of three lines
/// (sentence, target tags, opinion tags). Without ids, identical sentence
/// text shares one sentence id.
pub fn read_inline_file(path: &Path, split: &str) -> Result<DatasetSplit> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let tabular = lines
        .first()
        .map(|(_, l)| l.split('\t').count() >= 3)
        .unwrap_or(false);

    let mut by_text: HashMap<String, String> = HashMap::new();
    let mut auto_id = |sentence: &str| -> String {
        let next = by_text.len();
        by_text
            .entry(sentence.to_owned())
            .or_insert_with(|| next.to_string())
            .clone()
    };
    let wrap = |lineno: usize, e: Error| match e {
        Error::Format { location, message } => Error::format(
            format!("{}:{} ({location})", path.display(), lineno),
            message,
        ),
        other => Error::format(format!("{}:{}", path.display(), lineno), other.to_string()),
    };

    let mut instances = Vec::new();
    if tabular {
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            let (id, sentence, target, opinion) = match fields.as_slice() {
                [id, s, t, o] => (Some(*id), *s, *t, *o),
                [s, t, o] => (None, *s, *t, *o),
                _ => {
                    return Err(Error::format(
                        format!("{}:{}", path.display(), lineno),
                        format!("expected 3 or 4 tab-separated fields, got {}", fields.len()),
                    ))
                }
            };
            if lineno == 1 && (id == Some("s_id") || sentence == "sentence") {
                continue;
            }
            let mut inst =
                import_inline_annotated(sentence, target, opinion).map_err(|e| wrap(lineno, e))?;
            inst.sentence_id = match id {
                Some(id) => id.trim().to_owned(),
                None => auto_id(sentence.trim()),
            };
            inst.split = split.to_owned();
            instances.push(inst);
        }
    } else {
        if !lines.len().is_multiple_of(3) {
            return Err(Error::format(
                path.display().to_string(),
                format!("{} non-empty lines is not a multiple of three", lines.len()),
            ));
        }
        for block in lines.chunks(3) {
            let lineno = block[0].0;
            let mut inst = import_inline_annotated(block[0].1, block[1].1, block[2].1)
                .map_err(|e| wrap(lineno, e))?;
            inst.sentence_id = auto_id(block[0].1.trim());
            inst.split = split.to_owned();
            instances.push(inst);
        }
    }
    if instances.is_empty() {
        return Err(Error::format(path.display().to_string(), "no examples found"));
    }
    Ok(DatasetSplit::new(split, instances))
}

/// POS tags and dependency heads for one sentence. `heads[i]` is `None` for
/// the root.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseRecord {
    pub sentence_id: Option<String>,
    pub pos_tags: Vec<String>,
    pub heads: Vec<Option<usize>>,
}

#[derive(Deserialize)]
struct JsonParse {
    id: Option<String>,
    pos_tags: Vec<String>,
    heads: Vec<i64>,
}

/// Reads parser output, either CoNLL-X/CoNLL-U (1-based heads, 0 = root,
/// sentences separated by blank lines) or JSON lines with `pos_tags` and
/// 0-based `heads` (`-1` = root) plus an optional `id`.
pub fn read_parse_file(path: &Path) -> Result<Vec<ParseRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim_start().starts_with('{') {
        read_json_parses(path, &text)
    } else {
        read_conll(path, &text)
    }
}

fn read_json_parses(path: &Path, text: &str) -> Result<Vec<ParseRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("{}:{}", path.display(), i + 1);
        let rec: JsonParse =
            serde_json::from_str(line).map_err(|e| Error::format(loc(), e.to_string()))?;
        let heads = rec
            .heads
            .iter()
            .map(|&h| match Head::from_raw(h) {
                Some(Head::Root) => Ok(None),
                Some(Head::Token(t)) => Ok(Some(t)),
                None => Err(Error::format(loc(), format!("bad head {h}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ParseRecord {
            sentence_id: rec.id,
            pos_tags: rec.pos_tags,
            heads,
        });
    }
    Ok(out)
}

fn read_conll(path: &Path, text: &str) -> Result<Vec<ParseRecord>> {
    let mut out = Vec::new();
    let mut cur = ParseRecord {
        sentence_id: None,
        pos_tags: Vec::new(),
        heads: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            if !cur.pos_tags.is_empty() {
                out.push(std::mem::replace(
                    &mut cur,
                    ParseRecord {
                        sentence_id: None,
                        pos_tags: Vec::new(),
                        heads: Vec::new(),
                    },
                ));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let loc = || format!("{}:{}", path.display(), i + 1);
        if cols.len() < 7 {
            return Err(Error::format(loc(), "expected at least 7 tab-separated columns"));
        }
        // multiword ranges and empty nodes
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let pos = if cols[4] != "_" { cols[4] } else { cols[3] };
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::format(loc(), format!("bad head {:?}", cols[6])))?;
        cur.pos_tags.push(pos.to_owned());
        cur.heads.push(head.checked_sub(1));
    }
    if !cur.pos_tags.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

/// Checks that `heads` form one tree: a single root, in-range heads, no
/// self-dependency and no cycles.
pub(crate) fn check_tree(sentence_id: &str, heads: &[Option<usize>]) -> Result<()> {
    let err = |message: String| Error::Parse {
        sentence_id: sentence_id.to_owned(),
        message,
    };
    let n = heads.len();
    let roots = heads.iter().filter(|h| h.is_none()).count();
    if roots != 1 {
        return Err(err(format!("{roots} root tokens, expected 1")));
    }
    for (i, h) in heads.iter().enumerate() {
        match *h {
            Some(h) if h >= n => return Err(err(format!("token {i} has head {h} out of range"))),
            Some(h) if h == i => return Err(err(format!("token {i} depends on itself"))),
            _ => {}
        }
    }
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(h) = heads[cur] {
            cur = h;
            steps += 1;
            if steps > n {
                return Err(err(format!("cycle through token {start}")));
            }
        }
    }
    Ok(())
}

/// Attaches POS tags and heads to every instance.
///
/// Records carrying ids are matched by sentence id. Records without ids are
/// matched positionally against the split's distinct sentences in order of
/// first appearance.
pub fn join_parses(split: DatasetSplit, parse_records: &[ParseRecord]) -> Result<DatasetSplit> {
    let keyed = parse_records.iter().all(|r| r.sentence_id.is_some());
    let mut table: HashMap<String, &ParseRecord> = HashMap::new();
    if keyed {
        for rec in parse_records {
            table.insert(rec.sentence_id.clone().unwrap_or_default(), rec);
        }
    } else {
        let mut order: Vec<&str> = Vec::new();
        for inst in &split.instances {
            if !order.contains(&inst.sentence_id.as_str()) {
                order.push(&inst.sentence_id);
            }
        }
        if order.len() != parse_records.len() {
            return Err(Error::Join {
                sentence_id: "*".into(),
                message: format!(
                    "{} parse records for {} sentences",
                    parse_records.len(),
                    order.len()
                ),
            });
        }
        for (id, rec) in order.into_iter().zip(parse_records) {
            table.insert(id.to_owned(), rec);
        }
    }

    let DatasetSplit { name, instances } = split;
    let mut checked: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(instances.len());
    for mut inst in instances {
        let join_err = |message: String| Error::Join {
            sentence_id: inst.sentence_id.clone(),
            message,
        };
        let rec = table
            .get(&inst.sentence_id)
            .ok_or_else(|| join_err("no parse record".into()))?;
        let n = inst.tokens.len();
        if rec.pos_tags.len() != n || rec.heads.len() != n {
            return Err(join_err(format!(
                "parse has {} tags / {} heads for {} tokens",
                rec.pos_tags.len(),
                rec.heads.len(),
                n
            )));
        }
        if checked.insert(inst.sentence_id.clone()) {
            check_tree(&inst.sentence_id, &rec.heads)?;
        }
        for (tok, (tag, head)) in inst
            .tokens
            .iter_mut()
            .zip(rec.pos_tags.iter().zip(&rec.heads))
        {
            tok.pos_tag = Some(tag.clone());
            tok.head = Some(match head {
                None => Head::Root,
                Some(h) => Head::Token(*h),
            });
        }
        out.push(inst);
    }
    Ok(DatasetSplit::new(name, out))
}
