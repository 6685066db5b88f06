//! Static word embeddings.
//!
//! Files are GloVe-style text: `word f1 f2 ... fd` per line, with `d` taken
//! from the first line. A fastText `.vec` header (`<count> <dim>`) is
//! recognised and skipped. Every vector is L2-normalised once at load so that
//! downstream cosine math reduces to dot products; zero vectors carry no
//! direction and are dropped.
//!
//! Keys are used verbatim. The tokenizer lowercases, so embedding files are
//! expected to be lowercase.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    index: HashMap<String, usize>,
    words: Vec<String>,
    data: Vec<f32>,
    dropped_zero: usize,
    duplicates: usize,
}

impl EmbeddingTable {
    fn empty(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            index: HashMap::new(),
            words: Vec::new(),
            data: Vec::new(),
            dropped_zero: 0,
            duplicates: 0,
        }
    }

    /// Builds a table from raw vectors, normalising each one.
    pub fn from_entries<I, S>(dimension: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        if dimension == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        let mut table = EmbeddingTable::empty(dimension);
        for (word, vector) in entries {
            if vector.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: vector.len(),
                });
            }
            table.insert(word.into(), &vector);
        }
        Ok(table)
    }

    fn insert(&mut self, word: String, raw: &[f32]) {
        if self.index.contains_key(&word) {
            self.duplicates += 1;
            return;
        }
        let norm = raw.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            self.dropped_zero += 1;
            return;
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data
            .extend(raw.iter().map(|&x| (f64::from(x) / norm) as f32));
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn dropped_zero_vectors(&self) -> usize {
        self.dropped_zero
    }

    pub fn duplicate_words(&self) -> usize {
        self.duplicates
    }

    /// The unit vector for `word`, or `None` if it is not in the vocabulary.
    #[inline]
    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        self.index.get(word).map(|&row| self.row(row))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    #[inline]
    fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dimension..(row + 1) * self.dimension]
    }

    /// Words and vectors in load order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        self.words
            .iter()
            .enumerate()
            .map(move |(i, w)| (w.as_str(), self.row(i)))
    }

    /// Writes the table in GloVe text format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (word, vector) in self.iter() {
            let mut line = String::with_capacity(word.len() + vector.len() * 12);
            line.push_str(word);
            for x in vector {
                line.push(' ');
                line.push_str(&x.to_string());
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

fn is_vec_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::with_capacity(1 << 20, file);

    let mut table: Option<EmbeddingTable> = None;
    let mut raw = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_ascii_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        raw.clear();
        for field in fields {
            let x: f32 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("cannot parse {field:?} as a float"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("non-finite component {field:?}"),
                });
            }
            raw.push(x);
        }

        let table = match &mut table {
            Some(t) => t,
            None => {
                if line_no == 1 && is_vec_header(&line.split_ascii_whitespace().collect::<Vec<_>>())
                {
                    continue;
                }
                if raw.is_empty() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: "no vector components".into(),
                    });
                }
                table.insert(EmbeddingTable::empty(raw.len()))
            }
        };
        if raw.len() != table.dimension {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!(
                    "expected {} components, found {}",
                    table.dimension,
                    raw.len()
                ),
            });
        }
        table.insert(word.to_string(), &raw);
    }

    let table = table.ok_or_else(|| Error::EmptyEmbeddings(path.to_path_buf()))?;
    if table.vocab_size() == 0 {
        return Err(Error::EmptyEmbeddings(path.to_path_buf()));
    }
    if table.dropped_zero > 0 {
        log::warn!(
            "{}: dropped {} zero vectors",
            path.display(),
            table.dropped_zero
        );
    }
    if table.duplicates > 0 {
        log::warn!(
            "{}: ignored {} repeated words (first occurrence kept)",
            path.display(),
            table.duplicates
        );
    }
    log::info!(
        "loaded {} vectors of dimension {} from {}",
        table.vocab_size(),
        table.dimension,
        path.display()
    );
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn load_str(body: &str) -> Result<EmbeddingTable> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        fs::write(&path, body).unwrap();
        load_embeddings(&path)
    }

    #[test]
    fn two_line_file_is_normalised() {
        let t = load_str("a 1 0\nb 0 2\n").unwrap();
        assert_eq!(t.dimension(), 2);
        assert_eq!(t.vocab_size(), 2);
        assert_eq!(t.lookup("a").unwrap(), &[1.0, 0.0]);
        assert_eq!(t.lookup("b").unwrap(), &[0.0, 1.0]);
        assert!(t.lookup("zzz-absent").is_none());
    }

    #[test]
    fn inconsistent_dimension_names_the_line() {
        let err = load_str("a 1 0\nb 1 2 3\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_fatal() {
        assert!(matches!(load_str(""), Err(Error::EmptyEmbeddings(_))));
        assert!(matches!(load_str("\n\n"), Err(Error::EmptyEmbeddings(_))));
        assert!(matches!(load_str("z 0 0\n"), Err(Error::EmptyEmbeddings(_))));
    }

    #[test]
    fn zero_vectors_are_dropped() {
        let t = load_str("a 3 4\nz 0 0\nb 0 1\n").unwrap();
        assert_eq!(t.vocab_size(), 2);
        assert_eq!(t.dropped_zero_vectors(), 1);
        assert!(t.lookup("z").is_none());
        let a = t.lookup("a").unwrap();
        assert!((a[0] - 0.6).abs() < 1e-7 && (a[1] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn fasttext_header_is_skipped() {
        let t = load_str("2 3\na 1 0 0\nb 0 1 0\n").unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.vocab_size(), 2);
    }

    #[test]
    fn bad_float_is_fatal() {
        assert!(matches!(load_str("a 1 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_str("a 1 0\nb inf 0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn save_then_load_is_stable() {
        let t = EmbeddingTable::from_entries(
            3,
            vec![("x", vec![1.0, 2.0, 3.0]), ("y", vec![-0.5, 0.1, 0.0])],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        t.save(&path).unwrap();
        let back = load_embeddings(&path).unwrap();
        for (w, v) in t.iter() {
            let u = back.lookup(w).unwrap();
            for (a, b) in u.iter().zip(v) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
