use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Matrix;

pub const UNK: &str = "<unk>";

/// String-to-row mapping; row 0 is always the unknown entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    entries: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_entries(Vec::<String>::new())
    }
}

impl Vocab {
    /// Builds a vocabulary from items in first-seen order.
    pub fn from_entries<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab {
            entries: vec![UNK.to_owned()],
            index: HashMap::new(),
        };
        vocab.index.insert(UNK.to_owned(), 0);
        for item in items {
            vocab.insert(item.into());
        }
        vocab
    }

    pub fn insert(&mut self, item: String) -> usize {
        if let Some(&i) = self.index.get(&item) {
            return i;
        }
        self.entries.push(item.clone());
        self.index.insert(item, self.entries.len() - 1);
        self.entries.len() - 1
    }

    /// Row of `item`, or 0 if unknown.
    pub fn lookup(&self, item: &str) -> usize {
        self.index.get(item).copied().unwrap_or(0)
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.len() <= 1
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Restores the lookup index after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
    }
}

/// Lookup table of `num_entries × dim` vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub weights: Matrix,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn num_entries(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn random<R: Rng>(rng: &mut R, rows: usize, dim: usize, bound: f64, trainable: bool) -> Self {
        EmbeddingTable {
            weights: crate::params::uniform(rng, rows, dim, bound),
            trainable,
        }
    }
}

/// Result of reading a pretrained vector file for a vocabulary.
#[derive(Clone, Debug)]
pub struct PretrainedVectors {
    pub table: EmbeddingTable,
    /// Vocabulary entries (excluding the unknown row) found in the file.
    pub found: usize,
}

/// The vectors of a file restricted to a set of words of interest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VectorSubset {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl VectorSubset {
    /// Reads a text vector file (`word f1 … fD` per line), keeping the words
    /// accepted by `wanted`.
    ///
    /// Lines with more than `D + 1` fields are read as words containing
    /// spaces; lines with fewer are an error. A leading `count dim` header is
    /// skipped.
    pub fn read(path: &Path, expected_dim: Option<usize>, wanted: impl Fn(&str) -> bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dim = expected_dim;
        let mut vectors = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
            if fields.is_empty() {
                continue;
            }
            if lineno == 1 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let d = *dim.get_or_insert(fields.len() - 1);
            if d == 0 || fields.len() < d + 1 {
                return Err(Error::Load {
                    path: path.to_owned(),
                    line: lineno,
                    message: format!("expected {} values, found {}", d, fields.len().saturating_sub(1)),
                });
            }
            let split = fields.len() - d;
            let word = fields[..split].join(" ");
            if !wanted(&word) || vectors.contains_key(&word) {
                continue;
            }
            let values = fields[split..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Load {
                            path: path.to_owned(),
                            line: lineno,
                            message: format!("bad value {f:?}"),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            vectors.insert(word, values);
        }
        let dim = dim.ok_or_else(|| Error::Load {
            path: path.to_owned(),
            line: 0,
            message: "no vectors in file".into(),
        })?;
        Ok(VectorSubset { dim, vectors })
    }

    /// Table over `vocab`. Words without a vector, and the unknown row, share
    /// one vector drawn uniformly from `[-0.25, 0.25]`.
    pub fn table_for<R: Rng>(&self, vocab: &Vocab, trainable: bool, rng: &mut R) -> PretrainedVectors {
        let oov: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-0.25..=0.25)).collect();
        let mut found = 0;
        let mut weights = Array2::zeros((vocab.len(), self.dim));
        for (r, mut out) in weights.rows_mut().into_iter().enumerate() {
            let src = match self.vectors.get(&vocab.entries()[r]) {
                Some(v) if r != 0 => {
                    found += 1;
                    v
                }
                _ => &oov,
            };
            for (o, v) in out.iter_mut().zip(src) {
                *o = *v;
            }
        }
        PretrainedVectors {
            table: EmbeddingTable { weights, trainable },
            found,
        }
    }
}

/// Reads a vector file and builds a table over `vocab`; see
/// [`VectorSubset::read`] and [`VectorSubset::table_for`].
pub fn load_pretrained_vectors<R: Rng>(
    path: &Path,
    vocab: &Vocab,
    expected_dim: Option<usize>,
    trainable: bool,
    rng: &mut R,
) -> Result<PretrainedVectors> {
    let subset = VectorSubset::read(path, expected_dim, |w| vocab.get(w).is_some_and(|i| i != 0))?;
    if subset.vectors.is_empty() {
        log::warn!(
            "{}: none of the {} vocabulary words have vectors",
            path.display(),
            vocab.len() - 1
        );
    }
    Ok(subset.table_for(vocab, trainable, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn copies_known_rows_and_shares_oov() {
        let f = write("good 0.5 -1.0 2.0\nbad 1 1 1\n");
        let vocab = Vocab::from_entries(["good", "meh", "zzz"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pv = load_pretrained_vectors(f.path(), &vocab, Some(3), false, &mut rng).unwrap();
        let w = &pv.table.weights;
        assert_eq!(pv.found, 1);
        assert_eq!(w.row(1).to_vec(), vec![0.5, -1.0, 2.0]);
        assert_eq!(w.row(2), w.row(3));
        assert_eq!(w.row(0), w.row(2));
        assert!(w.row(2).iter().all(|v| v.abs() <= 0.25));
    }

    #[test]
    fn short_line_is_load_error_with_line_number() {
        let f = write("a 1 2 3\nb 1 2\n");
        let vocab = Vocab::from_entries(["a"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = load_pretrained_vectors(f.path(), &vocab, Some(3), false, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Load { line: 2, .. }), "{err}");
    }

    #[test]
    fn no_overlap_is_not_an_error() {
        let f = write("x 1 2\n");
        let vocab = Vocab::from_entries(["y"]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pv = load_pretrained_vectors(f.path(), &vocab, None, true, &mut rng).unwrap();
        assert_eq!(pv.found, 0);
        assert_eq!(pv.table.dim(), 2);
    }

    #[test]
    fn words_with_spaces() {
        let f = write(". . . 1 2\n");
        let vocab = Vocab::from_entries([". . ."]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pv = load_pretrained_vectors(f.path(), &vocab, Some(2), false, &mut rng).unwrap();
        assert_eq!(pv.found, 1);
    }
}
